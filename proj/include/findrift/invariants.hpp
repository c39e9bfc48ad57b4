#pragma once

#include <optional>
#include <string>
#include <vector>

#include "findrift/decimal.hpp"
#include "findrift/metrics.hpp"

namespace findrift {

// Policy for the JSON-summary task: which fields must be present (all
// string-typed) and the exact disclaimer text the output must carry.
struct JsonPolicyConfig {
    std::vector<std::string> required_fields{"client_name", "summary",
                                             "compliance_disclaimer"};
    std::string disclaimer_template;
    bool allow_extra_fields = true;
};

// Policy for the SQL task: which fixture to run against, the reference query
// producing the known-good total, and the relative tolerance on the result.
struct SqlInvariantConfig {
    std::string fixture_path;
    std::string fixture_content_hash;  // refuse to run against altered data
    std::string oracle_query;
    Decimal tolerance = Decimal(5, -2);
    int timeout_ms = 5000;
};

// Violation codes are a stable public contract (exact strings):
//   JSON_PARSE, MISSING_FIELD, TYPE_MISMATCH, DISCLAIMER_MISMATCH,
//   EXTRA_FIELD, NON_SELECT, NON_SCALAR, NO_CITATION, UNKNOWN_CITATION,
//   TOLERANCE_EXCEEDED
struct Violation {
    std::string code;
    std::string message;
};

struct InvariantVerdict {
    bool passed = true;
    std::vector<Violation> violations;
    std::optional<Decimal> observed_value;  // sql only
    std::optional<Decimal> expected_value;  // sql only

    void add(std::string code, std::string message) {
        violations.push_back({std::move(code), std::move(message)});
        passed = false;
    }
    bool has(const std::string& code) const {
        for (const auto& v : violations)
            if (v.code == code) return true;
        return false;
    }
};

// Validates output text against the JSON policy. The text may wrap the JSON
// object in prose; the whole text is tried first, then the largest balanced
// {...} block. All listed fields must be present, string-typed, and the
// disclaimer byte-identical to the template.
InvariantVerdict check_json_policy(const std::string& text,
                                   const JsonPolicyConfig& config);

// Gates then executes generated SQL against the fixture: single SELECT
// statement only, read-only connection, bounded runtime; the scalar result
// must match the oracle query's result within the relative tolerance.
InvariantVerdict check_sql_invariant(const std::string& sql_text,
                                     const SqlInvariantConfig& config);

// Citation gate: at least one tag when required, and every tag must belong
// to the allowed universe.
InvariantVerdict check_citations(const std::string& text,
                                 const CitationSet& allowed,
                                 bool require_nonempty);

// Case-insensitive marker scan; a label is returned only when exactly one
// side matches ("positive"/"negative"); ambiguous or silent text gives none.
std::optional<std::string> extract_decision(
    const std::string& text, const std::vector<std::string>& positive_markers,
    const std::vector<std::string>& negative_markers);

// Extracts the first scalar of the first row of a read-only query; used both
// for the oracle side and exposed for tests.
std::optional<Decimal> run_scalar_query(const std::string& db_path,
                                        const std::string& sql, int timeout_ms,
                                        std::string* error_out = nullptr);

// Canonical content hash of a fixture database: tables in name order, rows
// in primary-key (rowid) order, columns tab-separated (REAL columns printed
// with two decimals), rows newline-joined, hashed with SHA-256.
std::string fixture_content_hash(const std::string& db_path);

}  // namespace findrift
