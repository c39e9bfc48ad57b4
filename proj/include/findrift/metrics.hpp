#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "findrift/decimal.hpp"

namespace findrift {

// One numeric literal extracted from output text, in canonical form.
// Canonicalization strips commas and currency symbols, applies percent and
// K/M/B scale suffixes, and resolves signs (including accounting
// parentheses), so "$1.05M" and "1,050,000" compare equal.
struct CanonicalNumber {
    Decimal value;
    std::size_t span_start = 0;  // byte offsets into the source text
    std::size_t span_end = 0;
    std::string original_text;

    bool operator==(const CanonicalNumber& other) const {
        return value == other.value && span_start == other.span_start &&
               span_end == other.span_end && original_text == other.original_text;
    }
};

// Bracketed source tags cited by an output, e.g. [jpm_2024_10k].
struct CitationSet {
    std::set<std::string> tags;

    bool operator==(const CitationSet& other) const { return tags == other.tags; }
    bool operator!=(const CitationSet& other) const { return !(*this == other); }
};

// One generation's output plus everything derived from it.
struct RunOutput {
    std::string text;
    CitationSet citations;
    std::vector<CanonicalNumber> numbers;
    std::optional<std::string> decision;
    double latency_ms = 0.0;
    std::optional<std::uint64_t> generated_tokens;
};

// Derives citations and numbers from the text with this module's extractors.
RunOutput make_run_output(std::string text, double latency_ms = 0.0,
                          std::optional<std::uint64_t> generated_tokens = {},
                          std::optional<std::string> decision = {});

// Aggregate statistics for one experiment condition.
struct ConditionStats {
    std::size_t n = 0;
    std::size_t identical_count = 0;
    double identity_rate = 0.0;
    double wilson_low = 0.0;
    double wilson_high = 0.0;
    double mean_drift = 0.0;
    double factual_drift_rate = 0.0;
    double schema_violation_rate = 0.0;
    double decision_flip_rate = 0.0;
    double mean_latency_ms = 0.0;
    std::optional<double> tokens_per_sec;
    std::string reference_text;  // modal output the other rates are measured against
};

// Levenshtein distance (unit-cost insert/delete/substitute) over Unicode
// scalar values, not bytes.
std::size_t edit_distance(const std::string& s1, const std::string& s2);

// edit_distance / max(length in scalar values); 0.0 when both empty.
double normalized_edit_distance(const std::string& s1, const std::string& s2);

// All tags matching the grammar '[' lowercase-letter [a-z0-9_]{2,} ']'.
// Duplicates collapse; "array[0]" matches nothing (no leading letter).
CitationSet extract_citations(const std::string& text);

// Left-to-right extraction of numeric literals; unparseable spans are
// skipped, never errors.
std::vector<CanonicalNumber> canonicalize_numbers(const std::string& text);

// True iff the two outputs disagree factually: citation sets differ, number
// lists differ in length, or any aligned pair of numbers differs by a
// relative difference >= eps (measured against the smaller magnitude; a pair
// with exactly one zero counts as drift, both-zero compares equal).
// Symmetric; eps must be positive.
bool factual_drift(const RunOutput& o1, const RunOutput& o2,
                   const Decimal& eps = Decimal(5, -2));

struct IdentityResult {
    double rate = 0.0;
    std::size_t reference_index = 0;  // first run whose text is the reference
    std::string reference_text;
};

// Reference = modal exact output string (ties broken by lexicographically
// smallest); rate = fraction of outputs within normalized edit distance eps
// of the reference. eps = 0 means exact match.
IdentityResult identity_rate(const std::vector<RunOutput>& outputs,
                             double eps = 0.0);

// Wilson score interval for a binomial proportion, clamped to [0,1].
std::pair<double, double> wilson_ci(std::size_t successes, std::size_t n,
                                    double confidence = 0.95);

// Two-sided Fisher exact test for a 2x2 table (rows are groups, columns are
// success/failure): p = sum of probabilities of all tables with the same
// margins whose probability is <= that of the observed table. Exact integer
// arithmetic internally; the only rounding is the final conversion to double.
double fisher_exact_2x2(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d);

// Forward declaration; defined in invariants.hpp.
struct InvariantVerdict;

// Computes every ConditionStats field from one condition's runs and their
// 1:1-aligned invariant verdicts. Drift rates are measured against the
// identity reference; decision_flip_rate against the modal decision among
// runs that produced one.
ConditionStats aggregate_condition(const std::vector<RunOutput>& runs,
                                   const std::vector<InvariantVerdict>& verdicts,
                                   const Decimal& eps = Decimal(5, -2));

}  // namespace findrift
