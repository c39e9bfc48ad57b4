#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "findrift/corpus.hpp"
#include "findrift/decimal.hpp"
#include "findrift/invariants.hpp"
#include "findrift/metrics.hpp"

namespace findrift {

// The exact disclaimer the JSON-summary policy requires, byte for byte.
inline constexpr const char* kComplianceDisclaimer =
    "This summary is for informational purposes only and does not constitute "
    "investment advice.";

enum class TaskId { rag, summary, sql };

std::string task_id_name(TaskId id);
std::optional<TaskId> parse_task_id(const std::string& name);

// A versioned prompt template. Templates are immutable once published: the
// sha256 recorded next to the template is re-checked at load time, and a
// mismatch refuses to run.
struct TaskSpec {
    TaskId task_id = TaskId::rag;
    std::string template_text;  // placeholders written as {name}
    std::string template_version;
    std::string template_sha256;
    JsonPolicyConfig json_policy;  // summary only
    std::vector<std::string> positive_markers;  // decision extraction, optional
    std::vector<std::string> negative_markers;
};

struct TaskCase {
    std::string case_id;
    std::map<std::string, std::string> bindings;
    CitationSet expected_citation_universe;  // rag only
    std::string oracle_query;                // sql only
};

struct TaskBundle {
    TaskSpec spec;
    std::vector<TaskCase> cases;
};

struct TaskLibrary {
    std::string schema_version;
    std::vector<TaskBundle> tasks;

    const TaskBundle& find(TaskId id) const;
};

// Deterministic placeholder substitution. A placeholder is '{' followed by
// one or more of [a-z0-9_] followed by '}'; every placeholder must be bound
// or the render fails with UnboundPlaceholder. Other brace usage passes
// through verbatim.
std::string render_prompt(const TaskSpec& spec,
                          const std::map<std::string, std::string>& bindings);
std::string render_prompt(const TaskSpec& spec, const TaskCase& task_case);

// Context block for retrieval-augmented prompts: one "[doc_id] text"
// paragraph per snippet, in retrieval order.
std::string format_context(const std::vector<ScoredSnippet>& snippets);

// Loads the bundled task definitions (JSON) and verifies every template
// against its recorded sha256.
TaskLibrary load_task_library(const std::string& path);

std::vector<TaskCase> list_protocol_cases(const TaskLibrary& library,
                                          TaskId id);

struct FixtureDB {
    std::string path;
    std::string schema_version;
    std::uint64_t seed = 0;
    std::string content_hash;
};

// Generates the synthetic finance database: accounts (50 rows), transactions
// (exactly n_rows, dates within [2025-01-01, 2025-09-01], amounts in
// [-10000.00, +10000.00]), balances (exact per-account sums). Content is a
// pure function of the seed; content_hash covers a canonical dump.
FixtureDB generate_fixture_db(std::uint64_t seed, std::size_t n_rows,
                              const std::string& path);

// Exact sum of transactions.amount in integer cents, independent of SQL
// aggregation; used as the reference total.
Decimal exact_transaction_total(const std::string& db_path);

}  // namespace findrift
