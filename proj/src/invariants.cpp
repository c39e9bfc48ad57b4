#include "findrift/invariants.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <json.hpp>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"

namespace findrift {

namespace {

std::string fold_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// The widest balanced {...} block outside of string literals; models often
// wrap the JSON payload in prose.
std::optional<std::string> largest_json_block(const std::string& text) {
    std::optional<std::string> best;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        std::size_t depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t j = i;
        std::size_t block_end = std::string::npos;
        for (; j < text.size(); ++j) {
            char c = text[j];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    block_end = j;
                    break;
                }
            }
        }
        if (block_end == std::string::npos) {
            ++i;
            continue;
        }
        std::size_t len = block_end - i + 1;
        if (!best || len > best->size()) best = text.substr(i, len);
        i = block_end + 1;
    }
    return best;
}

// Strips SQL comments ("-- ..." and "/* ... */") and collapses the remainder
// for the statement gate; string literals are preserved untouched.
std::string strip_sql_comments(const std::string& sql) {
    std::string out;
    std::size_t i = 0;
    bool in_string = false;
    while (i < sql.size()) {
        char c = sql[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\'') {
                if (i + 1 < sql.size() && sql[i + 1] == '\'') {
                    out.push_back(sql[i + 1]);
                    ++i;
                } else {
                    in_string = false;
                }
            }
            ++i;
            continue;
        }
        if (c == '\'') {
            in_string = true;
            out.push_back(c);
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < sql.size() && !(sql[i] == '*' && sql[i + 1] == '/'))
                ++i;
            i = i + 2 <= sql.size() ? i + 2 : sql.size();
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct ProgressDeadline {
    std::chrono::steady_clock::time_point deadline;
    bool expired = false;
};

int progress_callback(void* ctx) {
    auto* state = static_cast<ProgressDeadline*>(ctx);
    if (std::chrono::steady_clock::now() >= state->deadline) {
        state->expired = true;
        return 1;  // interrupt the statement
    }
    return 0;
}

std::optional<Decimal> column_to_decimal(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_INTEGER:
            return Decimal(sqlite3_column_int64(stmt, col), 0);
        case SQLITE_FLOAT: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g",
                          sqlite3_column_double(stmt, col));
            return Decimal::parse(buf);
        }
        case SQLITE_TEXT: {
            const unsigned char* text = sqlite3_column_text(stmt, col);
            return Decimal::parse(reinterpret_cast<const char*>(text));
        }
        default:
            return std::nullopt;
    }
}

}  // namespace

std::optional<Decimal> run_scalar_query(const std::string& db_path,
                                        const std::string& sql, int timeout_ms,
                                        std::string* error_out) {
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) !=
        SQLITE_OK) {
        if (error_out) *error_out = "cannot open database read-only";
        if (db) sqlite3_close(db);
        return std::nullopt;
    }
    ProgressDeadline deadline{std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(timeout_ms)};
    sqlite3_progress_handler(db, 256, progress_callback, &deadline);

    sqlite3_stmt* stmt = nullptr;
    std::optional<Decimal> result;
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
        if (error_out)
            *error_out = std::string("prepare failed: ") + sqlite3_errmsg(db);
        sqlite3_close(db);
        return std::nullopt;
    }
    int rc = sqlite3_step(stmt);
    if (rc == SQLITE_ROW) {
        result = column_to_decimal(stmt, 0);
        if (!result && error_out) *error_out = "first column is not numeric";
    } else if (rc == SQLITE_INTERRUPT || deadline.expired) {
        if (error_out) *error_out = "timeout";
    } else if (rc == SQLITE_DONE) {
        if (error_out) *error_out = "query returned no rows";
    } else {
        if (error_out)
            *error_out = std::string("step failed: ") + sqlite3_errmsg(db);
    }
    sqlite3_finalize(stmt);
    sqlite3_close(db);
    if (deadline.expired && error_out) *error_out = "timeout";
    return deadline.expired ? std::nullopt : result;
}

std::string fixture_content_hash(const std::string& db_path) {
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) !=
        SQLITE_OK) {
        if (db) sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot open fixture " + db_path);
    }
    std::string dump;
    auto fail = [&](const std::string& what) {
        std::string detail = sqlite3_errmsg(db);
        sqlite3_close(db);
        throw HarnessError(ErrorCode::IoFailure, what + ": " + detail);
    };

    std::vector<std::string> tables;
    {
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db,
                               "SELECT name FROM sqlite_master WHERE "
                               "type='table' AND name NOT LIKE 'sqlite_%' "
                               "ORDER BY name",
                               -1, &stmt, nullptr) != SQLITE_OK) {
            fail("cannot list fixture tables");
        }
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            tables.emplace_back(
                reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0)));
        }
        sqlite3_finalize(stmt);
    }
    for (const std::string& table : tables) {
        std::string sql = "SELECT * FROM \"" + table + "\" ORDER BY rowid";
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) !=
            SQLITE_OK) {
            fail("cannot dump fixture table " + table);
        }
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            int cols = sqlite3_column_count(stmt);
            for (int c = 0; c < cols; ++c) {
                if (c > 0) dump.push_back('\t');
                switch (sqlite3_column_type(stmt, c)) {
                    case SQLITE_INTEGER:
                        dump += std::to_string(sqlite3_column_int64(stmt, c));
                        break;
                    case SQLITE_FLOAT: {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), "%.2f",
                                      sqlite3_column_double(stmt, c));
                        dump += buf;
                        break;
                    }
                    case SQLITE_TEXT:
                        dump += reinterpret_cast<const char*>(
                            sqlite3_column_text(stmt, c));
                        break;
                    case SQLITE_NULL:
                        dump += "NULL";
                        break;
                    default:
                        dump += "BLOB";
                        break;
                }
            }
            dump.push_back('\n');
        }
        sqlite3_finalize(stmt);
    }
    sqlite3_close(db);
    return sha256_hex(dump);
}

InvariantVerdict check_json_policy(const std::string& text,
                                   const JsonPolicyConfig& config) {
    InvariantVerdict verdict;
    nlohmann::json parsed;
    bool have_object = false;

    auto try_parse = [&](const std::string& candidate) {
        nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            parsed = std::move(j);
            have_object = true;
        }
    };
    try_parse(text);
    if (!have_object) {
        if (auto block = largest_json_block(text)) try_parse(*block);
    }
    if (!have_object) {
        verdict.add("JSON_PARSE", "output does not contain a JSON object");
        return verdict;
    }

    for (const std::string& field : config.required_fields) {
        if (!parsed.contains(field)) {
            verdict.add("MISSING_FIELD", "missing required field " + field);
            continue;
        }
        if (!parsed[field].is_string()) {
            verdict.add("TYPE_MISMATCH", "field " + field + " must be a string");
            continue;
        }
        if (field == "compliance_disclaimer" &&
            parsed[field].get<std::string>() != config.disclaimer_template) {
            verdict.add("DISCLAIMER_MISMATCH",
                        "disclaimer is not byte-identical to the template");
        }
    }
    if (!config.allow_extra_fields) {
        for (const auto& [key, value] : parsed.items()) {
            if (std::find(config.required_fields.begin(),
                          config.required_fields.end(),
                          key) == config.required_fields.end()) {
                verdict.add("EXTRA_FIELD", "unexpected field " + key);
            }
        }
    }
    return verdict;
}

InvariantVerdict check_sql_invariant(const std::string& sql_text,
                                     const SqlInvariantConfig& config) {
    if (!config.fixture_content_hash.empty()) {
        std::string actual = fixture_content_hash(config.fixture_path);
        if (actual != config.fixture_content_hash) {
            throw HarnessError(ErrorCode::FixtureTampered,
                               "fixture does not match its recorded hash");
        }
    }
    InvariantVerdict verdict;
    std::string cleaned = trim(strip_sql_comments(sql_text));
    if (!cleaned.empty() && cleaned.back() == ';') {
        cleaned = trim(cleaned.substr(0, cleaned.size() - 1));
    }
    bool single_statement = cleaned.find(';') == std::string::npos;
    std::string head = fold_lower(cleaned.substr(0, 6));
    bool is_select = head == "select" &&
                     (cleaned.size() == 6 ||
                      !std::isalnum(static_cast<unsigned char>(cleaned[6])));
    if (cleaned.empty() || !single_statement || !is_select) {
        verdict.add("NON_SELECT",
                    "only a single SELECT statement may be executed");
        return verdict;
    }

    std::string error;
    std::optional<Decimal> observed =
        run_scalar_query(config.fixture_path, cleaned, config.timeout_ms, &error);
    if (error == "timeout") {
        throw HarnessError(ErrorCode::QueryTimeout, "query exceeded time budget");
    }
    if (!observed) {
        verdict.add("NON_SCALAR", "no numeric scalar result: " + error);
        return verdict;
    }

    std::string oracle_error;
    std::optional<Decimal> expected = run_scalar_query(
        config.fixture_path, config.oracle_query, config.timeout_ms,
        &oracle_error);
    if (!expected) {
        throw HarnessError(ErrorCode::ConfigError,
                           "oracle query failed: " + oracle_error);
    }
    verdict.observed_value = observed;
    verdict.expected_value = expected;
    if (!Decimal::within_rel_tolerance(*observed, *expected, config.tolerance)) {
        verdict.add("TOLERANCE_EXCEEDED",
                    "observed " + observed->to_string() + " vs expected " +
                        expected->to_string() + " exceeds tolerance " +
                        config.tolerance.to_string());
    }
    return verdict;
}

InvariantVerdict check_citations(const std::string& text,
                                 const CitationSet& allowed,
                                 bool require_nonempty) {
    InvariantVerdict verdict;
    CitationSet found = extract_citations(text);
    if (require_nonempty && found.tags.empty()) {
        verdict.add("NO_CITATION", "output cites no sources");
    }
    for (const std::string& tag : found.tags) {
        if (allowed.tags.count(tag) == 0) {
            verdict.add("UNKNOWN_CITATION", "tag " + tag + " is not allowed");
        }
    }
    return verdict;
}

std::optional<std::string> extract_decision(
    const std::string& text, const std::vector<std::string>& positive_markers,
    const std::vector<std::string>& negative_markers) {
    std::vector<std::string> pos, neg;
    for (const auto& m : positive_markers)
        if (!m.empty()) pos.push_back(fold_lower(m));
    for (const auto& m : negative_markers)
        if (!m.empty()) neg.push_back(fold_lower(m));
    for (const auto& m : pos) {
        if (std::find(neg.begin(), neg.end(), m) != neg.end()) {
            throw HarnessError(ErrorCode::InvalidMarkers,
                               "marker " + m + " appears on both sides");
        }
    }
    std::string folded = fold_lower(text);
    auto any_hit = [&](const std::vector<std::string>& markers) {
        for (const auto& m : markers) {
            if (folded.find(m) != std::string::npos) return true;
        }
        return false;
    };
    bool positive = any_hit(pos);
    bool negative = any_hit(neg);
    if (positive == negative) return std::nullopt;  // neither, or ambiguous
    return positive ? std::optional<std::string>("positive")
                    : std::optional<std::string>("negative");
}

}  // namespace findrift
