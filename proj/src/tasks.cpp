#include "findrift/tasks.hpp"

#include <sqlite3.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/prng.hpp"

namespace findrift {

namespace {

// Civil-date arithmetic (proleptic Gregorian), the standard
// days-from-civil/civil-from-days pair.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

std::string date_string(std::int64_t day_number) {
    int y;
    unsigned m, d;
    civil_from_days(day_number, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

const std::vector<std::string> kFirstNames = {
    "Avery", "Blake", "Casey", "Dana", "Ellis", "Finley", "Gray", "Harper",
    "Indra", "Jordan", "Kai", "Lane", "Morgan", "Noor", "Parker", "Quinn"};
const std::vector<std::string> kLastNames = {
    "Alvarez", "Bennett", "Chen", "Dawson", "Escobar", "Fitzgerald", "Gupta",
    "Hughes", "Ivanov", "Johansson", "Kim", "Liu", "Mensah", "Novak",
    "Okafor", "Price"};
const std::vector<std::string> kRegions = {"NA", "EU", "APAC"};
const std::vector<std::string> kCategories = {
    "payroll", "vendor_payment", "refund", "interest",
    "fees",    "settlement",     "transfer", "dividend"};
const std::vector<std::string> kDescriptions = {
    "monthly payroll disbursement", "vendor invoice settlement",
    "customer refund issued",       "accrued interest posting",
    "account maintenance fees",     "trade settlement",
    "internal ledger transfer",     "quarterly dividend payment",
    "subscription billing",         "treasury sweep",
    "fx conversion",                "collateral adjustment"};

void exec_or_throw(sqlite3* db, const char* sql) {
    char* errmsg = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &errmsg) != SQLITE_OK) {
        std::string message = errmsg != nullptr ? errmsg : "unknown error";
        sqlite3_free(errmsg);
        sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure,
                           "fixture setup failed: " + message);
    }
}

}  // namespace

std::string task_id_name(TaskId id) {
    switch (id) {
        case TaskId::rag: return "rag";
        case TaskId::summary: return "summary";
        case TaskId::sql: return "sql";
    }
    return "unknown";
}

std::optional<TaskId> parse_task_id(const std::string& name) {
    if (name == "rag") return TaskId::rag;
    if (name == "summary") return TaskId::summary;
    if (name == "sql") return TaskId::sql;
    return std::nullopt;
}

const TaskBundle& TaskLibrary::find(TaskId id) const {
    for (const TaskBundle& bundle : tasks) {
        if (bundle.spec.task_id == id) return bundle;
    }
    throw HarnessError(ErrorCode::ConfigError,
                       "task library has no entry for " + task_id_name(id));
}

std::string render_prompt(const TaskSpec& spec,
                          const std::map<std::string, std::string>& bindings) {
    const std::string& tpl = spec.template_text;
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] != '{') {
            out.push_back(tpl[i]);
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        std::string name;
        while (j < tpl.size() &&
               ((tpl[j] >= 'a' && tpl[j] <= 'z') ||
                (tpl[j] >= '0' && tpl[j] <= '9') || tpl[j] == '_')) {
            name.push_back(tpl[j]);
            ++j;
        }
        if (name.empty() || j >= tpl.size() || tpl[j] != '}') {
            out.push_back(tpl[i]);  // not a placeholder; braces pass through
            ++i;
            continue;
        }
        auto found = bindings.find(name);
        if (found == bindings.end()) {
            throw HarnessError(ErrorCode::UnboundPlaceholder,
                               "unbound placeholder {" + name + "} in " +
                                   task_id_name(spec.task_id) + " template");
        }
        out += found->second;
        i = j + 1;
    }
    return out;
}

std::string render_prompt(const TaskSpec& spec, const TaskCase& task_case) {
    return render_prompt(spec, task_case.bindings);
}

std::string format_context(const std::vector<ScoredSnippet>& snippets) {
    std::string out;
    for (const ScoredSnippet& scored : snippets) {
        if (!out.empty()) out += "\n\n";
        out += "[" + scored.snippet.doc_id + "] " + scored.snippet.text;
    }
    return out;
}

TaskLibrary load_task_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot open task library " + path);
    }
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw HarnessError(ErrorCode::ConfigError,
                           std::string("task library is not valid JSON: ") +
                               e.what());
    }
    TaskLibrary library;
    library.schema_version = root.at("schema_version").get<std::string>();
    for (const auto& entry : root.at("tasks")) {
        TaskBundle bundle;
        std::string id_name = entry.at("task_id").get<std::string>();
        auto id = parse_task_id(id_name);
        if (!id) {
            throw HarnessError(ErrorCode::ConfigError,
                               "unknown task_id " + id_name);
        }
        bundle.spec.task_id = *id;
        bundle.spec.template_text = entry.at("template").get<std::string>();
        bundle.spec.template_version =
            entry.at("template_version").get<std::string>();
        bundle.spec.template_sha256 =
            entry.at("template_sha256").get<std::string>();
        // Published templates are immutable: any byte drift from the recorded
        // digest is a refusal, not a warning.
        std::string actual = sha256_hex(bundle.spec.template_text);
        if (actual != bundle.spec.template_sha256) {
            throw HarnessError(
                ErrorCode::TemplateTampered,
                "template bytes for " + id_name + " (version " +
                    bundle.spec.template_version +
                    ") do not match their recorded hash");
        }
        if (entry.contains("json_policy")) {
            const auto& policy = entry["json_policy"];
            bundle.spec.json_policy.required_fields =
                policy.at("required_fields").get<std::vector<std::string>>();
            bundle.spec.json_policy.disclaimer_template =
                policy.at("disclaimer_template").get<std::string>();
            bundle.spec.json_policy.allow_extra_fields =
                policy.value("allow_extra_fields", true);
        }
        if (entry.contains("positive_markers")) {
            bundle.spec.positive_markers =
                entry["positive_markers"].get<std::vector<std::string>>();
        }
        if (entry.contains("negative_markers")) {
            bundle.spec.negative_markers =
                entry["negative_markers"].get<std::vector<std::string>>();
        }
        for (const auto& case_entry : entry.at("cases")) {
            TaskCase task_case;
            task_case.case_id = case_entry.at("case_id").get<std::string>();
            if (case_entry.contains("bindings")) {
                for (const auto& [key, value] : case_entry["bindings"].items()) {
                    task_case.bindings[key] = value.get<std::string>();
                }
            }
            if (case_entry.contains("allowed_citations")) {
                for (const auto& tag : case_entry["allowed_citations"]) {
                    task_case.expected_citation_universe.tags.insert(
                        tag.get<std::string>());
                }
            }
            if (case_entry.contains("oracle_query")) {
                task_case.oracle_query =
                    case_entry["oracle_query"].get<std::string>();
            }
            if (bundle.spec.task_id == TaskId::rag &&
                task_case.expected_citation_universe.tags.empty()) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "rag case " + task_case.case_id +
                                       " allows no citations");
            }
            bundle.cases.push_back(std::move(task_case));
        }
        library.tasks.push_back(std::move(bundle));
    }
    return library;
}

std::vector<TaskCase> list_protocol_cases(const TaskLibrary& library,
                                          TaskId id) {
    return library.find(id).cases;
}

FixtureDB generate_fixture_db(std::uint64_t seed, std::size_t n_rows,
                              const std::string& path) {
    if (n_rows == 0) {
        throw HarnessError(ErrorCode::InvalidPlan,
                           "fixture needs at least one transaction row");
    }
    std::remove(path.c_str());
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(path.c_str(), &db,
                        SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE,
                        nullptr) != SQLITE_OK) {
        if (db) sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot create fixture at " + path);
    }
    exec_or_throw(db,
                  "CREATE TABLE accounts ("
                  "id INTEGER PRIMARY KEY, name TEXT NOT NULL, "
                  "region TEXT NOT NULL, opened TEXT NOT NULL)");
    exec_or_throw(db,
                  "CREATE TABLE transactions ("
                  "id INTEGER PRIMARY KEY, account_id INTEGER NOT NULL, "
                  "date TEXT NOT NULL, amount REAL NOT NULL, "
                  "region TEXT NOT NULL, category TEXT NOT NULL, "
                  "description TEXT NOT NULL)");
    exec_or_throw(db,
                  "CREATE TABLE balances ("
                  "account_id INTEGER PRIMARY KEY, balance REAL NOT NULL)");
    exec_or_throw(db, "BEGIN");

    Xorshift64Star rng(seed);
    const std::int64_t accounts_epoch = days_from_civil(2020, 1, 1);
    constexpr int kAccounts = 50;
    {
        sqlite3_stmt* stmt = nullptr;
        sqlite3_prepare_v2(db,
                           "INSERT INTO accounts (id, name, region, opened) "
                           "VALUES (?,?,?,?)",
                           -1, &stmt, nullptr);
        for (int id = 1; id <= kAccounts; ++id) {
            std::string name =
                kFirstNames[rng.bounded(kFirstNames.size())] + " " +
                kLastNames[rng.bounded(kLastNames.size())];
            const std::string& region = kRegions[rng.bounded(kRegions.size())];
            std::string opened = date_string(
                accounts_epoch + static_cast<std::int64_t>(rng.bounded(1462)));
            sqlite3_bind_int(stmt, 1, id);
            sqlite3_bind_text(stmt, 2, name.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 3, region.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 4, opened.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_step(stmt);
            sqlite3_reset(stmt);
        }
        sqlite3_finalize(stmt);
    }

    // Transaction dates must satisfy the bounded protocol query: every date
    // within [2025-01-01, 2025-09-01]. That window spans 244 calendar days
    // inclusive.
    const std::int64_t tx_epoch = days_from_civil(2025, 1, 1);
    std::vector<std::int64_t> cents_per_account(kAccounts + 1, 0);
    {
        sqlite3_stmt* stmt = nullptr;
        sqlite3_prepare_v2(db,
                           "INSERT INTO transactions (id, account_id, date, "
                           "amount, region, category, description) "
                           "VALUES (?,?,?,?,?,?,?)",
                           -1, &stmt, nullptr);
        for (std::size_t id = 1; id <= n_rows; ++id) {
            int account_id = 1 + static_cast<int>(rng.bounded(kAccounts));
            std::string date = date_string(
                tx_epoch + static_cast<std::int64_t>(rng.bounded(244)));
            // Integer cents in [-1,000,000, +1,000,000] keep every amount an
            // exact two-decimal value.
            std::int64_t cents =
                static_cast<std::int64_t>(rng.bounded(2000001)) - 1000000;
            const std::string& region = kRegions[rng.bounded(kRegions.size())];
            const std::string& category =
                kCategories[rng.bounded(kCategories.size())];
            const std::string& description =
                kDescriptions[rng.bounded(kDescriptions.size())];
            cents_per_account[static_cast<std::size_t>(account_id)] += cents;
            sqlite3_bind_int64(stmt, 1, static_cast<sqlite3_int64>(id));
            sqlite3_bind_int(stmt, 2, account_id);
            sqlite3_bind_text(stmt, 3, date.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_double(stmt, 4, static_cast<double>(cents) / 100.0);
            sqlite3_bind_text(stmt, 5, region.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 6, category.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_bind_text(stmt, 7, description.c_str(), -1,
                              SQLITE_TRANSIENT);
            sqlite3_step(stmt);
            sqlite3_reset(stmt);
        }
        sqlite3_finalize(stmt);
    }
    {
        sqlite3_stmt* stmt = nullptr;
        sqlite3_prepare_v2(
            db, "INSERT INTO balances (account_id, balance) VALUES (?,?)", -1,
            &stmt, nullptr);
        for (int id = 1; id <= kAccounts; ++id) {
            sqlite3_bind_int(stmt, 1, id);
            sqlite3_bind_double(
                stmt, 2,
                static_cast<double>(cents_per_account[static_cast<std::size_t>(id)]) /
                    100.0);
            sqlite3_step(stmt);
            sqlite3_reset(stmt);
        }
        sqlite3_finalize(stmt);
    }
    exec_or_throw(db, "COMMIT");
    sqlite3_close(db);

    FixtureDB fixture;
    fixture.path = path;
    fixture.schema_version = "1";
    fixture.seed = seed;
    fixture.content_hash = fixture_content_hash(path);
    return fixture;
}

Decimal exact_transaction_total(const std::string& db_path) {
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) !=
        SQLITE_OK) {
        if (db) sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure, "cannot open " + db_path);
    }
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, "SELECT amount FROM transactions ORDER BY id",
                           -1, &stmt, nullptr) != SQLITE_OK) {
        sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure,
                           "fixture has no transactions table");
    }
    std::int64_t cents = 0;
    while (sqlite3_step(stmt) == SQLITE_ROW) {
        cents += std::llround(sqlite3_column_double(stmt, 0) * 100.0);
    }
    sqlite3_finalize(stmt);
    sqlite3_close(db);
    return Decimal(cents, -2);
}

}  // namespace findrift
