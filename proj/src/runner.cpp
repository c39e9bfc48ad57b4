#include "findrift/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/prng.hpp"
#include "findrift/time.hpp"

namespace findrift {

namespace {

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fmt_temp(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string slugify(const std::string& name) {
    std::string slug;
    for (char c : name) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            slug += c;
        } else if (c >= 'A' && c <= 'Z') {
            slug += static_cast<char>(c - 'A' + 'a');
        } else {
            slug += '-';
        }
    }
    if (slug.empty()) slug = "endpoint";
    return slug;
}

std::string timestamp_slug() {
    std::string iso = utc_now_iso8601();  // 2026-08-25T14:03:59.123Z
    std::string slug;
    for (char c : iso) {
        if (c == ':' || c == '.') continue;
        slug += (c == 'T') ? '-' : c;
    }
    if (!slug.empty() && slug.back() == 'Z') slug.pop_back();
    return slug;
}

// Identifies one cell reproducibly: the plan config plus everything that
// distinguishes this cell from its siblings (endpoint, decoding incl.
// temperature and seed, concurrency).
std::string condition_config_hash(const ExperimentPlan& plan,
                                  const ProviderEndpoint& endpoint,
                                  const DecodingConfig& decoding,
                                  int concurrency) {
    return sha256_hex(plan.config_text + "|" + endpoint.name + "|" +
                      provider_kind_name(endpoint.kind) + "|" +
                      endpoint.model_id + "|" + decoding_to_json(decoding).dump() +
                      "|" + std::to_string(concurrency));
}

std::string make_run_id(const std::string& condition_hash,
                        const std::string& task_name, const std::string& case_id,
                        std::uint64_t seed, int trial_index) {
    return sha256_hex(condition_hash + "|" + task_name + "|" + case_id + "|" +
                      std::to_string(seed) + "|" + std::to_string(trial_index));
}

// Provider and per-response failures are run-level in lenient mode; anything
// else (config, fixture integrity, marker setup) poisons the whole condition
// and always propagates.
bool is_run_level_failure(ErrorCode code) {
    switch (code) {
        case ErrorCode::ProviderUnreachable:
        case ErrorCode::ProviderRejected:
        case ErrorCode::ProviderTimeout:
        case ErrorCode::QueryTimeout:
            return true;
        default:
            return false;
    }
}

struct PreparedCase {
    TaskId task = TaskId::rag;
    const TaskSpec* spec = nullptr;
    TaskCase task_case;
    std::string prompt;
    std::vector<std::string> provenance;      // ordered snippet ids (rag)
    std::vector<std::string> compliance_tags;  // monitored dimensions
};

PreparedCase prepare_case(const ExperimentPlan& plan, const TaskBundle& bundle,
                          const TaskCase& task_case) {
    PreparedCase prepared;
    prepared.task = bundle.spec.task_id;
    prepared.spec = &bundle.spec;
    prepared.task_case = task_case;

    std::map<std::string, std::string> bindings = task_case.bindings;
    if (bundle.spec.task_id == TaskId::rag) {
        auto question = bindings.find("question");
        if (question == bindings.end()) {
            throw HarnessError(ErrorCode::ConfigError,
                               "rag case " + task_case.case_id +
                                   " has no 'question' binding");
        }
        std::vector<ScoredSnippet> retrieved =
            retrieve(question->second, plan.snippets, plan.retrieval_k);
        bindings["context"] = format_context(retrieved);
        for (const ScoredSnippet& s : retrieved) {
            prepared.provenance.push_back(s.snippet.snippet_id);
        }
        prepared.compliance_tags.push_back("citation_accuracy");
    } else if (bundle.spec.task_id == TaskId::summary) {
        prepared.compliance_tags.push_back("schema_violation");
    }
    if (!bundle.spec.positive_markers.empty() ||
        !bundle.spec.negative_markers.empty()) {
        prepared.compliance_tags.push_back("decision_flip");
    }
    prepared.prompt = render_prompt(bundle.spec, bindings);
    return prepared;
}

InvariantVerdict check_output(const ExperimentPlan& plan,
                              const PreparedCase& prepared,
                              const std::string& text) {
    switch (prepared.task) {
        case TaskId::rag:
            return check_citations(text,
                                   prepared.task_case.expected_citation_universe,
                                   /*require_nonempty=*/true);
        case TaskId::summary:
            return check_json_policy(text, prepared.spec->json_policy);
        case TaskId::sql: {
            if (plan.sql_invariant.fixture_path.empty()) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "sql task requires a fixture database");
            }
            SqlInvariantConfig config = plan.sql_invariant;
            config.oracle_query = prepared.task_case.oracle_query;
            return check_sql_invariant(text, config);
        }
    }
    throw HarnessError(ErrorCode::ConfigError, "unknown task");
}

struct TrialOutcome {
    bool ok = false;
    std::string run_id;
    std::string text;
    double latency_ms = 0.0;
    std::optional<std::uint64_t> generated_tokens;
    InvariantVerdict verdict;
    std::string error;
    ErrorCode error_code = ErrorCode::ProviderUnreachable;
};

struct ConditionContext {
    const ExperimentPlan& plan;
    const ProviderEndpoint& endpoint;
    const PreparedCase& prepared;
    DecodingConfig decoding;
    int concurrency = 1;
    std::uint64_t seed = 0;
    std::string condition_hash;
    std::string manifest_ref;
    TraceWriter& writer;
};

void run_one_trial(const ConditionContext& ctx, int trial_index,
                   TrialOutcome& out) {
    const ExperimentPlan& plan = ctx.plan;
    out.run_id = make_run_id(ctx.condition_hash, task_id_name(ctx.prepared.task),
                             ctx.prepared.task_case.case_id, ctx.seed,
                             trial_index);

    Xorshift64Star jitter_rng(ctx.seed ^
                              sha256_prefix_u64("jitter|" + out.run_id));
    double jitter_ms =
        plan.jitter_min_ms +
        jitter_rng.u01() * (plan.jitter_max_ms - plan.jitter_min_ms);
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::milli>(jitter_ms));

    TraceRecord record;
    record.run_id = out.run_id;
    record.task_id = task_id_name(ctx.prepared.task);
    record.case_id = ctx.prepared.task_case.case_id;
    record.provider_kind = provider_kind_name(ctx.endpoint.kind);
    record.model_id = ctx.endpoint.model_id;
    record.decoding = ctx.decoding;
    record.concurrency = ctx.concurrency;
    record.wave_idx = trial_index / ctx.concurrency;
    record.trial_index = trial_index;
    record.prompt = ctx.prepared.prompt;
    record.prompt_sha256 = sha256_hex(record.prompt);
    record.jitter_ms = jitter_ms;
    record.retrieval_provenance = ctx.prepared.provenance;
    record.manifest_ref = ctx.manifest_ref;
    record.corpus_version_id = plan.corpus_version_id;
    record.compliance_tags = ctx.prepared.compliance_tags;
    record.valid_time = utc_now_iso8601();

    try {
        GenerationResult gen =
            generate(ctx.endpoint, ctx.prepared.prompt, ctx.decoding);
        out.ok = true;
        out.text = gen.text;
        out.latency_ms = gen.latency_ms;
        out.generated_tokens = gen.generated_tokens;
        record.response = gen.text;
        record.latency_ms = gen.latency_ms;
        record.input_tokens = gen.input_tokens;
        record.generated_tokens = gen.generated_tokens;
    } catch (const HarnessError& e) {
        if (!is_run_level_failure(e.code())) throw;
        out.ok = false;
        out.error = std::string(error_code_name(e.code())) + ": " + e.what();
        out.error_code = e.code();
        record.error = out.error;
        record.verdict.passed = false;
    }

    if (out.ok) {
        try {
            out.verdict = check_output(plan, ctx.prepared, out.text);
        } catch (const HarnessError& e) {
            if (!is_run_level_failure(e.code())) throw;
            out.ok = false;
            out.error = std::string(error_code_name(e.code())) + ": " + e.what();
            out.error_code = e.code();
            record.error = out.error;
            out.verdict = InvariantVerdict{};
            out.verdict.passed = false;
        }
        record.verdict = out.verdict;
    }

    CitationSet cited = extract_citations(record.response);
    record.citations.assign(cited.tags.begin(), cited.tags.end());
    record.response_sha256 = sha256_hex(record.response);
    record.record_time = utc_now_iso8601();
    // Guard against a clock stepping backwards between the two stamps.
    if (record.record_time < record.valid_time) {
        record.record_time = record.valid_time;
    }
    ctx.writer.append(record);
}

ConditionResult run_condition(const ConditionContext& ctx,
                              const ConditionKey& key) {
    const int n = ctx.plan.trials_per_condition;
    const int c = ctx.concurrency;
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(n));

    // Waves of at most `concurrency` in-flight calls; a strict-mode or
    // condition-level failure inside a worker is surfaced after its wave.
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int wave_start = 0; wave_start < n; wave_start += c) {
        int wave_end = std::min(n, wave_start + c);
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(wave_end - wave_start));
        for (int trial = wave_start; trial < wave_end; ++trial) {
            workers.emplace_back([&ctx, &outcomes, trial, &failure,
                                  &failure_mutex]() {
                try {
                    run_one_trial(ctx, trial,
                                  outcomes[static_cast<std::size_t>(trial)]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (std::thread& w : workers) w.join();
        if (failure) std::rethrow_exception(failure);
        if (ctx.plan.strict) {
            for (int trial = wave_start; trial < wave_end; ++trial) {
                const TrialOutcome& out =
                    outcomes[static_cast<std::size_t>(trial)];
                if (!out.ok) {
                    throw HarnessError(out.error_code,
                                       "strict mode: run " + out.run_id +
                                           " failed (" + out.error + ")");
                }
            }
        }
    }

    ConditionResult result;
    result.key = key;
    std::vector<RunOutput> runs;
    std::vector<InvariantVerdict> verdicts;
    for (const TrialOutcome& out : outcomes) {
        result.run_ids.push_back(out.run_id);
        if (!out.ok) {
            ++result.failed_runs;
            continue;
        }
        std::optional<std::string> decision =
            extract_decision(out.text, ctx.prepared.spec->positive_markers,
                             ctx.prepared.spec->negative_markers);
        runs.push_back(make_run_output(out.text, out.latency_ms,
                                       out.generated_tokens, decision));
        verdicts.push_back(out.verdict);
    }
    if (!runs.empty()) {
        result.stats =
            aggregate_condition(runs, verdicts, ctx.plan.drift_epsilon);
    }
    return result;
}

std::vector<TierEntry> build_tier_table(
    const std::vector<ConditionResult>& conditions) {
    // Worst temperature-0 identity rate per endpoint; endpoints with no
    // T=0 cells (or none that produced stats) are omitted.
    std::map<std::string, double> worst;
    for (const ConditionResult& cond : conditions) {
        if (cond.key.temperature != 0.0 || cond.stats.n == 0) continue;
        auto [it, inserted] =
            worst.emplace(cond.key.endpoint_name, cond.stats.identity_rate);
        if (!inserted) it->second = std::min(it->second, cond.stats.identity_rate);
    }
    std::vector<TierEntry> tiers;
    for (const auto& [endpoint_name, consistency] : worst) {
        tiers.push_back({endpoint_name, consistency, classify_tier(consistency)});
    }
    return tiers;
}

std::vector<FisherComparison> build_comparisons(
    const std::vector<ConditionResult>& conditions) {
    std::vector<FisherComparison> comparisons;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        for (std::size_t j = i + 1; j < conditions.size(); ++j) {
            const ConditionResult& a = conditions[i];
            const ConditionResult& b = conditions[j];
            if (a.key.endpoint_name == b.key.endpoint_name) continue;
            if (!a.key.comparable_with(b.key)) continue;
            if (a.stats.n == 0 || b.stats.n == 0) continue;
            auto [p, significant] = compare_models(a, b);
            comparisons.push_back({a.key, b.key, p, significant});
        }
    }
    return comparisons;
}

ReportBundle finish_bundle(std::vector<ConditionResult> conditions,
                           std::string trace_path) {
    ReportBundle bundle;
    bundle.conditions = std::move(conditions);
    bundle.tiers = build_tier_table(bundle.conditions);
    bundle.comparisons = build_comparisons(bundle.conditions);
    bundle.trace_path = std::move(trace_path);
    return bundle;
}

std::vector<ConditionResult> run_matrix(const ExperimentPlan& plan,
                                        std::uint64_t seed,
                                        TraceWriter& writer) {
    std::vector<ConditionResult> conditions;
    for (const ProviderEndpoint& endpoint : plan.endpoints) {
        EnvironmentManifest manifest = capture_manifest(
            endpoint, plan.corpus_version_id, plan.config_text);
        std::string manifest_ref;
        if (!plan.manifest_dir.empty()) {
            std::filesystem::create_directories(plan.manifest_dir);
            manifest_ref = plan.manifest_dir + "/manifest-" +
                           slugify(endpoint.name) + "-" +
                           manifest.config_hash.substr(0, 12) + ".json";
            std::ofstream out(manifest_ref, std::ios::binary);
            if (!out) {
                throw HarnessError(ErrorCode::IoFailure,
                                   "cannot write manifest " + manifest_ref);
            }
            out << manifest.to_json().dump(2) << '\n';
        }

        for (TaskId task : plan.tasks) {
            const TaskBundle& bundle = plan.library.find(task);
            if (bundle.cases.empty()) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "task " + task_id_name(task) + " has no cases");
            }
            std::size_t case_count = plan.all_cases ? bundle.cases.size() : 1;
            for (std::size_t ci = 0; ci < case_count; ++ci) {
                PreparedCase prepared =
                    prepare_case(plan, bundle, bundle.cases[ci]);
                for (double temperature : plan.temperatures) {
                    DecodingConfig decoding;
                    decoding.temperature = temperature;
                    decoding.top_p = 1.0;
                    decoding.seed = static_cast<std::int64_t>(seed);
                    decoding.max_new_tokens = plan.max_new_tokens;
                    decoding.decoding_method = temperature == 0.0
                                                   ? DecodingMethod::greedy
                                                   : DecodingMethod::sample;
                    for (int concurrency : plan.concurrencies) {
                        ConditionKey key{endpoint.name, task_id_name(task),
                                         prepared.task_case.case_id, temperature,
                                         concurrency};
                        ConditionContext ctx{
                            plan,
                            endpoint,
                            prepared,
                            decoding,
                            concurrency,
                            seed,
                            condition_config_hash(plan, endpoint, decoding,
                                                  concurrency),
                            manifest_ref,
                            writer};
                        conditions.push_back(run_condition(ctx, key));
                    }
                }
            }
        }
    }
    return conditions;
}

std::string resolve_trace_path(const ExperimentPlan& plan,
                               std::uint64_t seed) {
    if (!plan.trace_path.empty()) {
        std::filesystem::path parent =
            std::filesystem::path(plan.trace_path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        return plan.trace_path;
    }
    std::filesystem::create_directories(plan.trace_dir);
    return plan.trace_dir + "/trace-" + timestamp_slug() + "-seed" +
           std::to_string(seed) + ".jsonl";
}

}  // namespace

bool ConditionKey::comparable_with(const ConditionKey& other) const {
    return task == other.task && case_id == other.case_id &&
           temperature == other.temperature && concurrency == other.concurrency;
}

std::string ConditionKey::label() const {
    return endpoint_name + "/" + task + "/" + case_id + "/T=" +
           fmt_temp(temperature) + "/C=" + std::to_string(concurrency);
}

void ExperimentPlan::validate() const {
    if (endpoints.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "no endpoints in plan");
    }
    if (tasks.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "no tasks in plan");
    }
    if (trials_per_condition < 1) {
        throw HarnessError(ErrorCode::InvalidPlan,
                           "trials_per_condition must be >= 1");
    }
    if (temperatures.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "no temperatures in plan");
    }
    for (double t : temperatures) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw HarnessError(ErrorCode::InvalidPlan,
                               "temperature outside [0,1]: " + std::to_string(t));
        }
    }
    if (concurrencies.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "no concurrencies in plan");
    }
    for (int c : concurrencies) {
        if (c < 1) {
            throw HarnessError(ErrorCode::InvalidPlan,
                               "concurrency must be >= 1");
        }
    }
    if (seeds.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "no seeds in plan");
    }
    if (jitter_min_ms < 0.0 || jitter_max_ms < jitter_min_ms) {
        throw HarnessError(ErrorCode::InvalidPlan,
                           "jitter bounds must satisfy 0 <= min <= max");
    }
    if (retrieval_k == 0) {
        throw HarnessError(ErrorCode::InvalidPlan, "retrieval_k must be >= 1");
    }
}

RunExperimentResult run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    const std::uint64_t seed = plan.seeds.front();
    std::string trace_path = resolve_trace_path(plan, seed);
    TraceWriter writer(trace_path);
    std::vector<ConditionResult> conditions = run_matrix(plan, seed, writer);
    RunExperimentResult result;
    result.trace_path = trace_path;
    result.bundle = finish_bundle(std::move(conditions), trace_path);
    return result;
}

int classify_tier(double consistency) {
    if (!(consistency >= 0.0 && consistency <= 1.0)) {
        throw HarnessError(ErrorCode::InvalidRate,
                           "consistency outside [0,1]");
    }
    if (consistency == 1.0) return 1;
    if (consistency > 0.5) return 2;
    return 3;
}

std::pair<double, bool> compare_models(const ConditionResult& a,
                                       const ConditionResult& b) {
    if (!a.key.comparable_with(b.key)) {
        throw HarnessError(ErrorCode::ConditionMismatch,
                           a.key.label() + " vs " + b.key.label());
    }
    double p = fisher_exact_2x2(a.stats.identical_count,
                                a.stats.n - a.stats.identical_count,
                                b.stats.identical_count,
                                b.stats.n - b.stats.identical_count);
    return {p, p < 0.05};
}

SeedSweepReport seed_sweep(ExperimentPlan plan,
                           const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) {
        throw HarnessError(ErrorCode::InvalidPlan, "seed sweep with no seeds");
    }
    plan.temperatures = {0.0};

    SeedSweepReport report;
    std::string base_trace = plan.trace_path;
    for (std::uint64_t seed : seeds) {
        ExperimentPlan pass = plan;
        pass.seeds = {seed};
        if (!base_trace.empty()) {
            std::filesystem::path p(base_trace);
            std::filesystem::path stem = p;
            stem.replace_extension("");
            pass.trace_path =
                stem.string() + "-seed" + std::to_string(seed) +
                p.extension().string();
        }
        RunExperimentResult result = run_experiment(pass);
        report.trace_paths.push_back(result.trace_path);
        report.per_seed.push_back({seed, std::move(result.bundle.conditions)});
    }

    report.consistent = true;
    const SeedSweepEntry& first = report.per_seed.front();
    for (const SeedSweepEntry& entry : report.per_seed) {
        if (entry.conditions.size() != first.conditions.size()) {
            report.consistent = false;
            break;
        }
        for (std::size_t i = 0; i < entry.conditions.size(); ++i) {
            if (entry.conditions[i].stats.identity_rate !=
                first.conditions[i].stats.identity_rate) {
                report.consistent = false;
                break;
            }
        }
        if (!report.consistent) break;
    }
    return report;
}

std::vector<OrderingProbeResult> ordering_probe(
    const std::vector<Snippet>& snippets,
    const std::vector<std::string>& queries, std::size_t permutations,
    std::size_t k, std::uint64_t shuffle_seed) {
    validate_snippet_ids(snippets);
    Xorshift64Star rng(shuffle_seed);
    std::vector<OrderingProbeResult> results;
    for (const std::string& query : queries) {
        OrderingProbeResult probe;
        probe.query = query;
        probe.permutations = permutations;
        std::vector<ScoredSnippet> reference = retrieve(query, snippets, k);
        std::vector<Snippet> shuffled = snippets;
        for (std::size_t p = 0; p < permutations; ++p) {
            rng.shuffle(shuffled);
            std::vector<ScoredSnippet> observed = retrieve(query, shuffled, k);
            bool same = observed.size() == reference.size();
            for (std::size_t i = 0; same && i < observed.size(); ++i) {
                same = observed[i].snippet.snippet_id ==
                           reference[i].snippet.snippet_id &&
                       compare_scores(observed[i].score, reference[i].score) == 0;
            }
            if (!same) ++probe.violations;
        }
        probe.passed = probe.violations == 0;
        results.push_back(std::move(probe));
    }
    return results;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw HarnessError(ErrorCode::IoFailure, "cannot write " + path);
    }
    out << content;
    if (!out) {
        throw HarnessError(ErrorCode::IoFailure, "short write to " + path);
    }
}

std::string csv_for_endpoint(const ReportBundle& bundle,
                             const std::string& endpoint_name) {
    std::ostringstream csv;
    csv << "task,temp,concurrency,identical_pct,mean_drift,mean_latency_s,"
           "wilson_low,wilson_high\n";
    for (const ConditionResult& cond : bundle.conditions) {
        if (cond.key.endpoint_name != endpoint_name) continue;
        const ConditionStats& s = cond.stats;
        csv << cond.key.task << ',' << fmt_temp(cond.key.temperature) << ','
            << cond.key.concurrency << ',' << fmt3(s.identity_rate * 100.0)
            << ',' << fmt3(s.mean_drift) << ','
            << fmt3(s.mean_latency_ms / 1000.0) << ','
            << fmt3(s.wilson_low * 100.0) << ',' << fmt3(s.wilson_high * 100.0)
            << '\n';
    }
    return csv.str();
}

std::string text_report(const ReportBundle& bundle) {
    std::ostringstream text;
    text << "Drift evaluation report\n";
    text << "=======================\n";

    std::vector<std::string> endpoint_order;
    for (const ConditionResult& cond : bundle.conditions) {
        if (std::find(endpoint_order.begin(), endpoint_order.end(),
                      cond.key.endpoint_name) == endpoint_order.end()) {
            endpoint_order.push_back(cond.key.endpoint_name);
        }
    }

    for (const std::string& endpoint_name : endpoint_order) {
        text << "\nEndpoint: " << endpoint_name << '\n';
        text << "task      case            temp  conc  identical%        "
                "95% CI  mean_drift  factual%  latency_s\n";
        for (const ConditionResult& cond : bundle.conditions) {
            if (cond.key.endpoint_name != endpoint_name) continue;
            const ConditionStats& s = cond.stats;
            char line[256];
            // Factual drift is a citation/number check; it is reported for
            // the retrieval task only (not meaningful for summary/sql rows).
            std::string factual = cond.key.task == "rag"
                                      ? fmt3(s.factual_drift_rate * 100.0)
                                      : std::string("n/a");
            std::snprintf(line, sizeof(line),
                          "%-9s %-15s %4s %5d %10s [%6s,%6s] %11s %9s %10s\n",
                          cond.key.task.c_str(), cond.key.case_id.c_str(),
                          fmt_temp(cond.key.temperature).c_str(),
                          cond.key.concurrency,
                          fmt3(s.identity_rate * 100.0).c_str(),
                          fmt3(s.wilson_low * 100.0).c_str(),
                          fmt3(s.wilson_high * 100.0).c_str(),
                          fmt3(s.mean_drift).c_str(), factual.c_str(),
                          fmt3(s.mean_latency_ms / 1000.0).c_str());
            text << line;
        }
    }

    if (!bundle.tiers.empty()) {
        text << "\nDeployment tiers (worst identity rate at T=0)\n";
        for (const TierEntry& tier : bundle.tiers) {
            char line[160];
            std::snprintf(line, sizeof(line), "%-24s consistency %7s  Tier %d\n",
                          tier.endpoint_name.c_str(),
                          fmt3(tier.consistency * 100.0).c_str(), tier.tier);
            text << line;
        }
    }

    if (!bundle.comparisons.empty()) {
        text << "\nPairwise comparisons (Fisher exact, alpha=0.05)\n";
        for (const FisherComparison& cmp : bundle.comparisons) {
            char line[320];
            std::snprintf(line, sizeof(line), "%s vs %s  p=%.6f %s\n",
                          cmp.a.label().c_str(), cmp.b.label().c_str(),
                          cmp.p_value,
                          cmp.significant ? "significant" : "not significant");
            text << line;
        }
    }
    return text.str();
}

}  // namespace

std::vector<std::string> emit_report(const ReportBundle& bundle,
                                     const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;

    std::vector<std::string> endpoint_order;
    for (const ConditionResult& cond : bundle.conditions) {
        if (std::find(endpoint_order.begin(), endpoint_order.end(),
                      cond.key.endpoint_name) == endpoint_order.end()) {
            endpoint_order.push_back(cond.key.endpoint_name);
        }
    }
    for (const std::string& endpoint_name : endpoint_order) {
        std::string path = dir + "/report-" + slugify(endpoint_name) + ".csv";
        write_file(path, csv_for_endpoint(bundle, endpoint_name));
        written.push_back(path);
    }
    std::string table_path = dir + "/report.txt";
    write_file(table_path, text_report(bundle));
    written.push_back(table_path);
    return written;
}

ReportBundle bundle_from_traces(const std::vector<std::string>& trace_paths,
                                const Decimal& drift_epsilon) {
    struct Group {
        ConditionKey key;
        std::vector<RunOutput> runs;
        std::vector<InvariantVerdict> verdicts;
        std::vector<std::string> run_ids;
        std::size_t failed = 0;
    };
    std::vector<Group> groups;  // first-seen order keeps reports deterministic

    for (const std::string& path : trace_paths) {
        for (const TraceRecord& record : read_trace(path)) {
            ConditionKey key{record.model_id.empty() ? record.provider_kind
                                                     : record.model_id,
                             record.task_id, record.case_id,
                             record.decoding.temperature, record.concurrency};
            Group* group = nullptr;
            for (Group& g : groups) {
                if (g.key == key) {
                    group = &g;
                    break;
                }
            }
            if (!group) {
                groups.push_back(Group{key, {}, {}, {}, 0});
                group = &groups.back();
            }
            group->run_ids.push_back(record.run_id);
            if (record.error) {
                ++group->failed;
                continue;
            }
            group->runs.push_back(make_run_output(
                record.response, record.latency_ms, record.generated_tokens));
            group->verdicts.push_back(record.verdict);
        }
    }

    std::vector<ConditionResult> conditions;
    for (Group& group : groups) {
        ConditionResult cond;
        cond.key = group.key;
        cond.failed_runs = group.failed;
        cond.run_ids = std::move(group.run_ids);
        if (!group.runs.empty()) {
            cond.stats =
                aggregate_condition(group.runs, group.verdicts, drift_epsilon);
        }
        conditions.push_back(std::move(cond));
    }
    std::string trace_ref = trace_paths.empty() ? "" : trace_paths.front();
    return finish_bundle(std::move(conditions), trace_ref);
}

}  // namespace findrift
