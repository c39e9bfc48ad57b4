#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "findrift/attestation.hpp"
#include "findrift/corpus.hpp"
#include "findrift/decimal.hpp"
#include "findrift/invariants.hpp"
#include "findrift/metrics.hpp"
#include "findrift/provider.hpp"
#include "findrift/tasks.hpp"

namespace findrift {

// One cell of the experiment matrix: (endpoint, task, case, temperature,
// concurrency), evaluated with trials_per_condition runs.
struct ConditionKey {
    std::string endpoint_name;
    std::string task;
    std::string case_id;
    double temperature = 0.0;
    int concurrency = 1;

    bool operator==(const ConditionKey&) const = default;

    // True when two cells are statistically comparable across endpoints:
    // same task, case, temperature and concurrency.
    bool comparable_with(const ConditionKey& other) const;

    std::string label() const;
};

struct ConditionResult {
    ConditionKey key;
    ConditionStats stats;          // over the successful runs only
    std::size_t failed_runs = 0;   // recorded in the trace, excluded from stats
    std::vector<std::string> run_ids;  // trial order, failed runs included
};

struct TierEntry {
    std::string endpoint_name;
    // Worst identity rate among the endpoint's temperature-0 conditions:
    // deployment gating keys on the weakest task, not the average.
    double consistency = 0.0;
    int tier = 3;
};

struct FisherComparison {
    ConditionKey a;
    ConditionKey b;
    double p_value = 1.0;
    bool significant = false;  // p < 0.05
};

struct ReportBundle {
    std::vector<ConditionResult> conditions;  // plan order, each exactly once
    std::vector<TierEntry> tiers;
    std::vector<FisherComparison> comparisons;  // cross-endpoint, same cell
    std::string trace_path;
};

struct ExperimentPlan {
    std::vector<ProviderEndpoint> endpoints;
    TaskLibrary library;
    std::vector<Snippet> snippets;  // retrieval pool for the rag task
    std::string corpus_version_id;
    SqlInvariantConfig sql_invariant;  // fixture binding for the sql task

    std::vector<TaskId> tasks{TaskId::rag, TaskId::summary, TaskId::sql};
    bool all_cases = false;  // default: the first (protocol) case per task
    std::vector<double> temperatures{0.0, 0.2};
    std::vector<int> concurrencies{1, 4, 16};
    int trials_per_condition = 16;
    // The first seed drives run_experiment; the full list is the sweep set.
    std::vector<std::uint64_t> seeds{42};
    double jitter_min_ms = 0.0;
    double jitter_max_ms = 100.0;
    std::size_t retrieval_k = 3;
    int max_new_tokens = 512;
    Decimal drift_epsilon = Decimal(5, -2);  // materiality tolerance
    bool strict = false;  // abort a condition on the first failed run
    std::string trace_path;    // empty: derived under trace_dir
    std::string trace_dir = "traces";
    std::string report_dir = "reports";
    std::string manifest_dir = "manifests";
    std::string config_text;  // serialized config, hashed into run ids

    // InvalidPlan on violated bounds: trials >= 1, temperatures within
    // [0,1], concurrencies >= 1, jitter 0 <= min <= max, at least one
    // endpoint, task and seed.
    void validate() const;
};

struct RunExperimentResult {
    std::string trace_path;
    ReportBundle bundle;
};

// Executes the full matrix for the plan's first seed: per condition,
// trials_per_condition generations dispatched in waves of at most
// `concurrency` in-flight calls, each preceded by a run-seeded uniform
// jitter sleep; every run is appended to the trace before aggregation.
RunExperimentResult run_experiment(const ExperimentPlan& plan);

// Consistency-rate tiers: 1.0 -> 1; (0.5, 1.0) -> 2; [0, 0.5] -> 3.
// Out-of-range input -> InvalidRate.
int classify_tier(double consistency);

// Fisher exact comparison of two endpoints' identical/drifted counts on the
// same cell; significant at alpha = 0.05. Different cells -> ConditionMismatch.
std::pair<double, bool> compare_models(const ConditionResult& a,
                                       const ConditionResult& b);

struct SeedSweepEntry {
    std::uint64_t seed = 0;
    std::vector<ConditionResult> conditions;
};

struct SeedSweepReport {
    std::vector<SeedSweepEntry> per_seed;
    // Pass iff every condition's identity rate is identical across seeds.
    bool consistent = false;
    std::vector<std::string> trace_paths;
};

// Runs the plan once per seed at temperature 0 (the plan's temperature list
// is replaced by {0.0}). Empty seed list -> InvalidPlan.
SeedSweepReport seed_sweep(ExperimentPlan plan,
                           const std::vector<std::uint64_t>& seeds = {
                               42, 123, 456, 789, 999});

struct OrderingProbeResult {
    std::string query;
    std::size_t permutations = 0;
    std::size_t violations = 0;  // shuffled-input retrievals that reordered
    bool passed = false;
};

// Shuffles the snippet presentation order `permutations` times per query and
// asserts retrieval returns the identical ordered result every time.
std::vector<OrderingProbeResult> ordering_probe(
    const std::vector<Snippet>& snippets, const std::vector<std::string>& queries,
    std::size_t permutations = 1000, std::size_t k = 3,
    std::uint64_t shuffle_seed = 42);

// Writes one CSV per endpoint (columns: task, temp, concurrency,
// identical_pct, mean_drift, mean_latency_s, wilson_low, wilson_high) plus a
// human-readable table, tier table and pairwise comparisons. Byte output is
// a pure function of the bundle. Returns the paths written.
std::vector<std::string> emit_report(const ReportBundle& bundle,
                                     const std::string& dir);

// Rebuilds a ReportBundle from previously written traces: records are
// grouped by (model, task, case, temperature, concurrency) and re-aggregated
// with the recorded verdicts.
ReportBundle bundle_from_traces(const std::vector<std::string>& trace_paths,
                                const Decimal& drift_epsilon = Decimal(5, -2));

}  // namespace findrift
