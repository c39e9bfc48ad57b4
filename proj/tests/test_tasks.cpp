#include <doctest.h>

#include <sqlite3.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/invariants.hpp"
#include "findrift/tasks.hpp"

using namespace findrift;
namespace fs = std::filesystem;

namespace {

const char* kRepoDir = FINDRIFT_REPO_DIR;

// Exact content hash of the fixture generated from seed 42 with 1000 rows.
// Frozen once; any change to the generator's byte-level output breaks replay
// of recorded experiments and must fail loudly here.
const char* kSeed42Hash =
    "727e98eea389647adbc94a18f09a27333cf046e0d76d9101812c9ea184d15f33";

fs::path scratch_dir() {
    fs::path dir = fs::temp_directory_path() /
                   ("findrift_tasks_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

fs::path tasks_json_path() {
    return fs::path(kRepoDir) / "fixtures/tasks.json";
}

ErrorCode thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const HarnessError& err) {
        return err.code();
    }
    FAIL("expected a HarnessError");
    return ErrorCode::ConfigError;
}

TaskSpec spec_with_template(std::string text) {
    TaskSpec spec;
    spec.template_text = std::move(text);
    return spec;
}

const std::map<std::string, std::string> kNoBindings{};

std::map<std::string, std::string> binds(
    std::map<std::string, std::string> m) {
    return m;
}

// The frozen reference fixture, generated once per test process.
const FixtureDB& seed42_fixture() {
    static FixtureDB fixture = generate_fixture_db(
        42, 1000, (scratch_dir() / "seed42.sqlite3").string());
    return fixture;
}

Decimal count_rows(const std::string& db, const std::string& where) {
    auto n = run_scalar_query(db, "SELECT COUNT(*) " + where, 5000);
    REQUIRE(n.has_value());
    return *n;
}

}  // namespace

TEST_CASE("task id names round-trip") {
    CHECK(task_id_name(TaskId::rag) == "rag");
    CHECK(task_id_name(TaskId::summary) == "summary");
    CHECK(task_id_name(TaskId::sql) == "sql");
    CHECK(parse_task_id("rag") == TaskId::rag);
    CHECK(parse_task_id("summary") == TaskId::summary);
    CHECK(parse_task_id("sql") == TaskId::sql);
    CHECK(!parse_task_id("RAG").has_value());
    CHECK(!parse_task_id("").has_value());
    CHECK(!parse_task_id("rag ").has_value());
}

TEST_CASE("render_prompt substitutes bound placeholders") {
    TaskSpec spec = spec_with_template("Q: {question}\nContext:\n{context}\n");
    std::map<std::string, std::string> bindings{
        {"question", "What changed?"}, {"context", "[doc] nothing"}};
    CHECK(render_prompt(spec, bindings) ==
          "Q: What changed?\nContext:\n[doc] nothing\n");

    TaskSpec repeated = spec_with_template("{x} and {x} and {x}");
    CHECK(render_prompt(repeated, binds({{"x", "again"}})) ==
          "again and again and again");

    // Unused bindings are fine; substitution is not recursive.
    TaskSpec once = spec_with_template("{a}");
    CHECK(render_prompt(once, binds({{"a", "{b}"}, {"b", "nope"}})) == "{b}");
}

TEST_CASE("render_prompt leaves non-placeholder braces verbatim") {
    CHECK(render_prompt(spec_with_template("json: {\"k\": \"v\"}"),
                        kNoBindings) == "json: {\"k\": \"v\"}");
    CHECK(render_prompt(spec_with_template("set {1, 2} and {UPPER} and { }"),
                        binds({{"upper", "x"}})) == "set {1, 2} and {UPPER} and { }");
    CHECK(render_prompt(spec_with_template("trailing {name"), kNoBindings) ==
          "trailing {name");
    CHECK(render_prompt(spec_with_template("empty {} braces"), kNoBindings) ==
          "empty {} braces");
    CHECK(render_prompt(spec_with_template("{{x}}"), binds({{"x", "V"}})) == "{V}");
    CHECK(render_prompt(spec_with_template(""), kNoBindings) == "");
}

TEST_CASE("render_prompt fails closed on unbound placeholders") {
    TaskSpec spec = spec_with_template("needs {question} here");
    spec.task_id = TaskId::rag;
    CHECK(thrown_code([&] { render_prompt(spec, kNoBindings); }) ==
          ErrorCode::UnboundPlaceholder);
    try {
        render_prompt(spec, binds({{"other", "x"}}));
        FAIL("expected throw");
    } catch (const HarnessError& err) {
        CHECK(std::string(err.what()).find("question") != std::string::npos);
    }
}

TEST_CASE("format_context lists snippets with their source tags") {
    CHECK(format_context({}) == "");
    Snippet a;
    a.doc_id = "jpm_2024_10k";
    a.text = "first snippet";
    Snippet b;
    b.doc_id = "citi_2024_10k";
    b.text = "second snippet";
    CHECK(format_context({{a, {1, 1}}}) == "[jpm_2024_10k] first snippet");
    CHECK(format_context({{a, {1, 1}}, {b, {1, 2}}}) ==
          "[jpm_2024_10k] first snippet\n\n[citi_2024_10k] second snippet");
}

TEST_CASE("load_task_library reads the bundled protocol") {
    TaskLibrary library = load_task_library(tasks_json_path().string());
    CHECK(library.schema_version == "1");
    REQUIRE(library.tasks.size() == 3);

    const TaskBundle& rag = library.find(TaskId::rag);
    CHECK(rag.spec.template_sha256 == sha256_hex(rag.spec.template_text));
    CHECK(rag.spec.template_text.find("{context}") != std::string::npos);
    CHECK(rag.spec.template_text.find("{question}") != std::string::npos);
    REQUIRE(rag.cases.size() == 2);
    for (const TaskCase& c : rag.cases) {
        CHECK(c.bindings.count("question") == 1);
        CHECK(!c.expected_citation_universe.tags.empty());
    }
    CHECK(rag.cases[0].case_id == "rag_jpm_credit_losses");
    CHECK(rag.cases[1].case_id == "rag_citi_risk_factors");

    const TaskBundle& summary = library.find(TaskId::summary);
    CHECK(summary.spec.json_policy.disclaimer_template ==
          kComplianceDisclaimer);
    CHECK(summary.spec.positive_markers ==
          std::vector<std::string>{"recommend proceeding"});
    CHECK(summary.spec.negative_markers ==
          std::vector<std::string>{"recommend holding"});
    REQUIRE(summary.cases.size() == 2);
    // Rendering a summary case embeds the exact disclaimer text.
    std::string prompt = render_prompt(summary.spec, summary.cases[0]);
    CHECK(prompt.find(kComplianceDisclaimer) != std::string::npos);

    const TaskBundle& sql = library.find(TaskId::sql);
    REQUIRE(sql.cases.size() == 2);
    for (const TaskCase& c : sql.cases) CHECK(!c.oracle_query.empty());
    CHECK(sql.cases[0].oracle_query ==
          "SELECT SUM(amount) FROM transactions");

    CHECK(list_protocol_cases(library, TaskId::rag).size() == 2);
    CHECK(list_protocol_cases(library, TaskId::rag)[0].case_id ==
          rag.cases[0].case_id);
}

TEST_CASE("TaskLibrary::find fails on an absent task") {
    TaskLibrary empty;
    CHECK(thrown_code([&] { empty.find(TaskId::sql); }) ==
          ErrorCode::ConfigError);
}

TEST_CASE("load_task_library refuses tampered templates") {
    fs::path dir = scratch_dir();
    nlohmann::json doc;
    {
        std::ifstream in(tasks_json_path());
        in >> doc;
    }

    SUBCASE("template text edited without updating the hash") {
        doc["tasks"][0]["template"] =
            doc["tasks"][0]["template"].get<std::string>() + " ";
        fs::path path = dir / "tampered_text.json";
        std::ofstream(path) << doc.dump();
        CHECK(thrown_code([&] { load_task_library(path.string()); }) ==
              ErrorCode::TemplateTampered);
    }
    SUBCASE("recorded hash edited") {
        doc["tasks"][1]["template_sha256"] = std::string(64, '0');
        fs::path path = dir / "tampered_hash.json";
        std::ofstream(path) << doc.dump();
        CHECK(thrown_code([&] { load_task_library(path.string()); }) ==
              ErrorCode::TemplateTampered);
    }
}

TEST_CASE("load_task_library input validation") {
    fs::path dir = scratch_dir();
    CHECK(thrown_code([&] {
              load_task_library((dir / "absent.json").string());
          }) == ErrorCode::IoFailure);

    std::ofstream(dir / "broken.json") << "{oops";
    CHECK(thrown_code([&] {
              load_task_library((dir / "broken.json").string());
          }) == ErrorCode::ConfigError);

    // A rag case that allows no citations can never pass its own gate.
    std::string tpl = "ask {question}";
    nlohmann::json task;
    task["task_id"] = "rag";
    task["template"] = tpl;
    task["template_version"] = "v1";
    task["template_sha256"] = sha256_hex(tpl);
    nlohmann::json no_universe_case;
    no_universe_case["case_id"] = "no_universe";
    no_universe_case["bindings"]["question"] = "q";
    task["cases"] = nlohmann::json::array({no_universe_case});
    nlohmann::json bad;
    bad["schema_version"] = "1";
    bad["tasks"] = nlohmann::json::array({task});
    std::ofstream(dir / "no_universe.json") << bad.dump();
    CHECK(thrown_code([&] {
              load_task_library((dir / "no_universe.json").string());
          }) == ErrorCode::ConfigError);

    nlohmann::json unknown = bad;
    unknown["tasks"][0]["task_id"] = "poetry";
    unknown["tasks"][0]["cases"] = nlohmann::json::array();
    std::ofstream(dir / "unknown_task.json") << unknown.dump();
    CHECK(thrown_code([&] {
              load_task_library((dir / "unknown_task.json").string());
          }) == ErrorCode::ConfigError);
}

TEST_CASE("generate_fixture_db is a pure function of the seed") {
    const FixtureDB& fixture = seed42_fixture();
    CHECK(fixture.schema_version == "1");
    CHECK(fixture.seed == 42);
    CHECK(fixture.content_hash == kSeed42Hash);
    CHECK(fixture_content_hash(fixture.path) == kSeed42Hash);

    // Same seed at a different path: byte-identical content.
    FixtureDB again = generate_fixture_db(
        42, 1000, (scratch_dir() / "seed42_again.sqlite3").string());
    CHECK(again.content_hash == kSeed42Hash);

    FixtureDB other = generate_fixture_db(
        43, 1000, (scratch_dir() / "seed43.sqlite3").string());
    CHECK(other.content_hash != kSeed42Hash);
}

TEST_CASE("generated fixture satisfies its structural contract") {
    const FixtureDB& fixture = seed42_fixture();
    const std::string& db = fixture.path;

    CHECK(count_rows(db, "FROM accounts") == Decimal(50, 0));
    CHECK(count_rows(db, "FROM transactions") == Decimal(1000, 0));
    CHECK(count_rows(db, "FROM balances") == Decimal(50, 0));

    // Every transaction date inside [2025-01-01, 2025-09-01].
    CHECK(count_rows(db, "FROM transactions WHERE date < '2025-01-01' OR "
                         "date > '2025-09-01'") == Decimal(0, 0));
    // Amounts bounded and two-decimal exact (up to REAL representation).
    CHECK(count_rows(db, "FROM transactions WHERE amount < -10000.0 OR "
                         "amount > 10000.0") == Decimal(0, 0));
    CHECK(count_rows(db, "FROM transactions WHERE "
                         "ABS(amount * 100 - ROUND(amount * 100)) > 0.0001") ==
          Decimal(0, 0));
    // Balances equal the per-account transaction sums.
    CHECK(count_rows(db,
                     "FROM balances b WHERE ABS(b.balance - (SELECT "
                     "COALESCE(SUM(t.amount), 0) FROM transactions t WHERE "
                     "t.account_id = b.account_id)) > 0.005") == Decimal(0, 0));
}

TEST_CASE("exact_transaction_total matches the frozen reference") {
    const FixtureDB& fixture = seed42_fixture();
    Decimal exact = exact_transaction_total(fixture.path);
    CHECK(exact == Decimal(9495366, -2));  // 94,953.66
    CHECK(exact.to_string() == "94953.66");

    // SQLite's float SUM agrees within accumulation error.
    auto sql_sum = run_scalar_query(
        fixture.path, "SELECT SUM(amount) FROM transactions", 5000);
    REQUIRE(sql_sum.has_value());
    CHECK(std::abs(sql_sum->to_double() - exact.to_double()) < 0.001);
    CHECK(Decimal::within_rel_tolerance(*sql_sum, exact, Decimal(1, -6)));
}

TEST_CASE("exact_transaction_total sums integer cents independently") {
    // Hand-built table with known amounts; 0.01 is not binary-representable,
    // so this also exercises the cent-rounding path.
    fs::path path = scratch_dir() / "tiny_total.sqlite3";
    fs::remove(path);
    {
        sqlite3* db = nullptr;
        REQUIRE(sqlite3_open(path.string().c_str(), &db) == SQLITE_OK);
        REQUIRE(sqlite3_exec(db,
                             "CREATE TABLE transactions (id INTEGER PRIMARY "
                             "KEY, amount REAL);"
                             "INSERT INTO transactions VALUES (1, 10.5);"
                             "INSERT INTO transactions VALUES (2, -5.75);"
                             "INSERT INTO transactions VALUES (3, 0.01);",
                             nullptr, nullptr, nullptr) == SQLITE_OK);
        sqlite3_close(db);
    }
    CHECK(exact_transaction_total(path.string()) == Decimal(476, -2));  // 4.76

    CHECK(thrown_code([] { exact_transaction_total("/no/such/db.sqlite3"); }) ==
          ErrorCode::IoFailure);
}

TEST_CASE("generate_fixture_db input validation") {
    CHECK(thrown_code([] {
              generate_fixture_db(1, 0, (scratch_dir() / "zero.sqlite3").string());
          }) == ErrorCode::InvalidPlan);
}
