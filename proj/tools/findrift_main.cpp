// findrift — deterministic drift-evaluation harness CLI.
//
// Subcommands: run, replay, report, sweep, probe-ordering, gen-fixture.
// Exit codes: 0 success, 2 invariant/attestation failure, 3 provider
// failure, 4 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <glob.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "findrift/attestation.hpp"
#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/runner.hpp"
#include "findrift/time.hpp"

namespace {

using findrift::ErrorCode;
using findrift::HarnessError;

struct LoadedConfig {
    nlohmann::json doc;
    std::string raw_text;
    std::filesystem::path dir;  // config-relative paths resolve against this
};

std::string resolve_path(const LoadedConfig& config, const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (config.dir / p).string();
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw HarnessError(ErrorCode::ConfigError,
                           "cannot open config file " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    LoadedConfig config;
    config.raw_text = buffer.str();
    config.doc = nlohmann::json::parse(config.raw_text, nullptr, false);
    if (config.doc.is_discarded() || !config.doc.is_object()) {
        throw HarnessError(ErrorCode::ConfigError,
                           path + " is not a JSON object");
    }
    config.dir = std::filesystem::path(path).parent_path();
    return config;
}

findrift::ProviderEndpoint build_endpoint(const LoadedConfig& config,
                                          const nlohmann::json& j) {
    if (!j.contains("kind")) {
        throw HarnessError(ErrorCode::ConfigError, "endpoint without kind");
    }
    auto kind = findrift::parse_provider_kind(j["kind"].get<std::string>());
    if (!kind) {
        throw HarnessError(ErrorCode::ConfigError,
                           "unknown provider kind " +
                               j["kind"].get<std::string>());
    }

    findrift::ProviderEndpoint endpoint;
    if (*kind == findrift::ProviderKind::mock_replay ||
        *kind == findrift::ProviderKind::mock_stochastic) {
        nlohmann::json mock = j.value("mock", nlohmann::json::object());
        std::uint64_t mock_seed = mock.value("mock_seed", 42u);
        if (mock.contains("responses")) {
            std::map<std::string, std::string> table;
            for (const auto& [key, value] : mock["responses"].items()) {
                table[key] = value.get<std::string>();
            }
            endpoint = findrift::make_replay_mock(table);
        } else if (mock.contains("from_trace")) {
            endpoint = findrift::make_replay_mock_from_trace(
                resolve_path(config, mock["from_trace"].get<std::string>()));
        } else if (mock.contains("script")) {
            std::vector<std::pair<std::string, std::size_t>> counts;
            for (const auto& entry : mock["script"]) {
                counts.emplace_back(entry.at("text").get<std::string>(),
                                    entry.value("count", std::size_t{1}));
            }
            endpoint = findrift::make_scripted_mock(counts, mock_seed);
        } else if (mock.contains("variants")) {
            std::vector<std::pair<std::string, double>> variants;
            for (const auto& entry : mock["variants"]) {
                variants.emplace_back(entry.at("text").get<std::string>(),
                                      entry.value("weight", 1.0));
            }
            endpoint = findrift::make_stochastic_mock(variants, mock_seed);
        } else {
            throw HarnessError(
                ErrorCode::ConfigError,
                "mock endpoint needs one of responses/from_trace/script/"
                "variants");
        }
        if (*kind != endpoint.kind) {
            throw HarnessError(ErrorCode::ConfigError,
                               "mock definition does not match declared kind");
        }
    } else {
        endpoint.kind = *kind;
        endpoint.base_url = j.value("base_url", std::string{});
        if (endpoint.base_url.empty()) {
            throw HarnessError(ErrorCode::ConfigError,
                               "network endpoint without base_url");
        }
        endpoint.model_id = j.value("model_id", std::string{});
        // Name of the environment variable holding the API key. The key is
        // read from the environment at request time and exists nowhere else.
        endpoint.credential_ref = j.value("credential_ref", std::string{});
        endpoint.api_version = j.value("api_version", std::string{});
        endpoint.project_id = j.value("project_id", std::string{});
        endpoint.timeout_ms = j.value("timeout_ms", 120000);
    }
    if (j.contains("name")) endpoint.name = j["name"].get<std::string>();
    if (j.contains("model_id")) endpoint.model_id = j["model_id"].get<std::string>();
    if (endpoint.name.empty()) {
        throw HarnessError(ErrorCode::ConfigError, "endpoint without name");
    }
    return endpoint;
}

std::vector<findrift::ProviderEndpoint> build_endpoints(
    const LoadedConfig& config) {
    if (!config.doc.contains("endpoints") ||
        !config.doc["endpoints"].is_array() ||
        config.doc["endpoints"].empty()) {
        throw HarnessError(ErrorCode::ConfigError,
                           "config needs a nonempty endpoints array");
    }
    std::vector<findrift::ProviderEndpoint> endpoints;
    for (const auto& entry : config.doc["endpoints"]) {
        endpoints.push_back(build_endpoint(config, entry));
    }
    return endpoints;
}

// CLI override state: empty/unset values mean "keep the config file value".
struct RunFlags {
    std::vector<std::string> tasks;
    std::vector<double> temps;
    std::vector<int> conc;
    int trials = -1;
    std::int64_t seed = -1;
    bool strict = false;
};

findrift::ExperimentPlan build_plan(const LoadedConfig& config,
                                    const RunFlags& flags) {
    findrift::ExperimentPlan plan;
    plan.config_text = config.raw_text;
    plan.endpoints = build_endpoints(config);

    std::string corpus_manifest =
        resolve_path(config, config.doc.value("corpus_manifest", std::string{}));
    if (corpus_manifest.empty()) {
        throw HarnessError(ErrorCode::ConfigError,
                           "config needs corpus_manifest");
    }
    findrift::Corpus corpus = findrift::load_corpus(corpus_manifest);
    plan.corpus_version_id = corpus.version_id;
    std::size_t chunk_chars = config.doc.value("chunk_chars", 1200u);
    std::size_t overlap_chars = config.doc.value("overlap_chars", 200u);
    plan.snippets = findrift::corpus_snippets(corpus, chunk_chars, overlap_chars);

    std::string tasks_file =
        resolve_path(config, config.doc.value("tasks_file", std::string{}));
    if (tasks_file.empty()) {
        throw HarnessError(ErrorCode::ConfigError, "config needs tasks_file");
    }
    plan.library = findrift::load_task_library(tasks_file);

    if (config.doc.contains("fixture")) {
        const auto& fx = config.doc["fixture"];
        plan.sql_invariant.fixture_path =
            resolve_path(config, fx.value("path", std::string{}));
        plan.sql_invariant.fixture_content_hash =
            fx.value("content_hash", std::string{});
        plan.sql_invariant.timeout_ms = fx.value("timeout_ms", 5000);
        if (fx.contains("tolerance")) {
            auto tol =
                findrift::Decimal::parse(fx["tolerance"].get<std::string>());
            if (!tol) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "fixture.tolerance is not a decimal");
            }
            plan.sql_invariant.tolerance = *tol;
        }
    }

    const nlohmann::json plan_doc =
        config.doc.value("plan", nlohmann::json::object());
    if (plan_doc.contains("tasks")) {
        plan.tasks.clear();
        for (const auto& t : plan_doc["tasks"]) {
            auto id = findrift::parse_task_id(t.get<std::string>());
            if (!id) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "unknown task " + t.get<std::string>());
            }
            plan.tasks.push_back(*id);
        }
    }
    plan.all_cases = plan_doc.value("all_cases", false);
    if (plan_doc.contains("temperatures")) {
        plan.temperatures =
            plan_doc["temperatures"].get<std::vector<double>>();
    }
    if (plan_doc.contains("concurrencies")) {
        plan.concurrencies = plan_doc["concurrencies"].get<std::vector<int>>();
    }
    plan.trials_per_condition =
        plan_doc.value("trials_per_condition", plan.trials_per_condition);
    if (plan_doc.contains("seeds")) {
        plan.seeds = plan_doc["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (plan_doc.contains("jitter_ms")) {
        const auto& jitter = plan_doc["jitter_ms"];
        if (!jitter.is_array() || jitter.size() != 2) {
            throw HarnessError(ErrorCode::ConfigError,
                               "plan.jitter_ms must be [min, max]");
        }
        plan.jitter_min_ms = jitter[0].get<double>();
        plan.jitter_max_ms = jitter[1].get<double>();
    }
    plan.retrieval_k = config.doc.value("retrieval_k", plan.retrieval_k);
    plan.max_new_tokens = plan_doc.value("max_new_tokens", plan.max_new_tokens);
    if (plan_doc.contains("drift_epsilon")) {
        auto eps = findrift::Decimal::parse(
            plan_doc["drift_epsilon"].get<std::string>());
        if (!eps) {
            throw HarnessError(ErrorCode::ConfigError,
                               "plan.drift_epsilon is not a decimal");
        }
        plan.drift_epsilon = *eps;
    }
    plan.strict = plan_doc.value("strict", false);

    const nlohmann::json paths =
        config.doc.value("paths", nlohmann::json::object());
    plan.trace_dir =
        resolve_path(config, paths.value("traces", std::string{"traces"}));
    plan.report_dir =
        resolve_path(config, paths.value("reports", std::string{"reports"}));
    plan.manifest_dir =
        resolve_path(config, paths.value("manifests", std::string{"manifests"}));

    // Command-line overrides.
    if (!flags.tasks.empty()) {
        plan.tasks.clear();
        for (const std::string& t : flags.tasks) {
            auto id = findrift::parse_task_id(t);
            if (!id) {
                throw HarnessError(ErrorCode::ConfigError, "unknown task " + t);
            }
            plan.tasks.push_back(*id);
        }
    }
    if (!flags.temps.empty()) plan.temperatures = flags.temps;
    if (!flags.conc.empty()) plan.concurrencies = flags.conc;
    if (flags.trials > 0) plan.trials_per_condition = flags.trials;
    if (flags.seed >= 0) {
        plan.seeds = {static_cast<std::uint64_t>(flags.seed)};
    }
    if (flags.strict) plan.strict = true;
    return plan;
}

void print_bundle_summary(const findrift::ReportBundle& bundle) {
    for (const auto& cond : bundle.conditions) {
        std::printf("%-60s identity %7.3f%%  CI [%6.3f%%, %7.3f%%]  drift %.3f",
                    cond.key.label().c_str(), cond.stats.identity_rate * 100.0,
                    cond.stats.wilson_low * 100.0,
                    cond.stats.wilson_high * 100.0, cond.stats.mean_drift);
        if (cond.failed_runs > 0) {
            std::printf("  (%zu failed runs excluded)", cond.failed_runs);
        }
        std::printf("\n");
    }
    for (const auto& tier : bundle.tiers) {
        std::printf("%-24s consistency %.3f%%  Tier %d\n",
                    tier.endpoint_name.c_str(), tier.consistency * 100.0,
                    tier.tier);
    }
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t matches{};
    int rc = ::glob(pattern.c_str(), 0, nullptr, &matches);
    std::vector<std::string> paths;
    if (rc == 0) {
        for (std::size_t i = 0; i < matches.gl_pathc; ++i) {
            paths.emplace_back(matches.gl_pathv[i]);
        }
    }
    ::globfree(&matches);
    if (rc != 0 && rc != GLOB_NOMATCH) {
        throw HarnessError(ErrorCode::IoFailure,
                           "glob failed for pattern " + pattern);
    }
    return paths;
}

int cmd_run(const std::string& config_path, const RunFlags& flags) {
    LoadedConfig config = load_config(config_path);
    findrift::ExperimentPlan plan = build_plan(config, flags);
    findrift::RunExperimentResult result = findrift::run_experiment(plan);
    std::vector<std::string> files =
        findrift::emit_report(result.bundle, plan.report_dir);
    print_bundle_summary(result.bundle);
    std::printf("trace:  %s\n", result.trace_path.c_str());
    for (const std::string& file : files) {
        std::printf("report: %s\n", file.c_str());
    }
    return 0;
}

int cmd_replay(const std::string& trace_path, const std::string& endpoint_name,
               const std::string& config_path) {
    findrift::ProviderEndpoint endpoint;
    std::string active_corpus_version;
    std::string report_dir = "reports";

    if (endpoint_name == "self") {
        endpoint = findrift::make_replay_mock_from_trace(trace_path);
    }
    if (!config_path.empty()) {
        LoadedConfig config = load_config(config_path);
        if (endpoint_name != "self") {
            bool found = false;
            for (const auto& candidate : build_endpoints(config)) {
                if (candidate.name == endpoint_name) {
                    endpoint = candidate;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw HarnessError(ErrorCode::ConfigError,
                                   "no endpoint named " + endpoint_name +
                                       " in " + config_path);
            }
        }
        std::string manifest = resolve_path(
            config, config.doc.value("corpus_manifest", std::string{}));
        if (!manifest.empty()) {
            active_corpus_version = findrift::load_corpus(manifest).version_id;
        }
        report_dir = resolve_path(
            config, config.doc.value("paths", nlohmann::json::object())
                        .value("reports", std::string{"reports"}));
    } else if (endpoint_name != "self") {
        throw HarnessError(ErrorCode::ConfigError,
                           "--endpoint " + endpoint_name +
                               " needs --config to resolve it (or use "
                               "--endpoint self)");
    }
    if (active_corpus_version.empty()) {
        std::vector<findrift::TraceRecord> records =
            findrift::read_trace(trace_path);
        if (!records.empty()) {
            active_corpus_version = records.front().corpus_version_id;
        }
    }

    findrift::AttestationReport report =
        findrift::replay(trace_path, endpoint, active_corpus_version);

    std::filesystem::create_directories(report_dir);
    std::string stamp = findrift::utc_now_iso8601();
    std::string slug;
    for (char c : stamp) {
        if (c == ':' || c == '.') continue;
        slug += c == 'T' ? '-' : c;
    }
    if (!slug.empty() && slug.back() == 'Z') slug.pop_back();
    std::string report_path = report_dir + "/attestation-" + slug + ".json";
    std::ofstream out(report_path, std::ios::binary);
    out << report.to_json().dump(2) << '\n';

    std::printf("replayed %zu runs: %zu matched, %zu mismatched, manifest %s\n",
                report.total_runs, report.matched, report.mismatched.size(),
                report.manifest_consistent ? "consistent" : "INCONSISTENT");
    for (const auto& mismatch : report.mismatched) {
        std::printf("mismatch run_id=%s old=%s new=%s\n",
                    mismatch.run_id.c_str(), mismatch.old_hash.c_str(),
                    mismatch.new_hash.c_str());
    }
    std::printf("report: %s\nverdict: %s\n", report_path.c_str(),
                report.verdict ? "pass" : "fail");
    return report.verdict ? 0 : 2;
}

int cmd_report(const std::string& traces_glob, const std::string& out_dir) {
    std::vector<std::string> paths = expand_glob(traces_glob);
    if (paths.empty()) {
        throw HarnessError(ErrorCode::IoFailure,
                           "no trace files match " + traces_glob);
    }
    findrift::ReportBundle bundle = findrift::bundle_from_traces(paths);
    std::vector<std::string> files = findrift::emit_report(bundle, out_dir);
    print_bundle_summary(bundle);
    for (const std::string& file : files) {
        std::printf("report: %s\n", file.c_str());
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const RunFlags& flags,
              const std::vector<std::uint64_t>& seeds) {
    LoadedConfig config = load_config(config_path);
    findrift::ExperimentPlan plan = build_plan(config, flags);
    findrift::SeedSweepReport report = seeds.empty()
                                           ? findrift::seed_sweep(plan)
                                           : findrift::seed_sweep(plan, seeds);
    for (const auto& entry : report.per_seed) {
        std::printf("seed %llu:\n",
                    static_cast<unsigned long long>(entry.seed));
        for (const auto& cond : entry.conditions) {
            std::printf("  %-58s identity %7.3f%%\n", cond.key.label().c_str(),
                        cond.stats.identity_rate * 100.0);
        }
    }
    std::printf("cross-seed consistency: %s\n",
                report.consistent ? "pass" : "fail");
    return report.consistent ? 0 : 2;
}

int cmd_probe_ordering(const std::string& config_path, std::size_t permutations,
                       std::vector<std::string> queries) {
    LoadedConfig config = load_config(config_path);
    std::string manifest = resolve_path(
        config, config.doc.value("corpus_manifest", std::string{}));
    if (manifest.empty()) {
        throw HarnessError(ErrorCode::ConfigError,
                           "config needs corpus_manifest");
    }
    findrift::Corpus corpus = findrift::load_corpus(manifest);
    std::vector<findrift::Snippet> snippets = findrift::corpus_snippets(
        corpus, config.doc.value("chunk_chars", 1200u),
        config.doc.value("overlap_chars", 200u));

    if (queries.empty()) {
        // Default: every rag question in the bundled task set.
        std::string tasks_file =
            resolve_path(config, config.doc.value("tasks_file", std::string{}));
        if (!tasks_file.empty()) {
            findrift::TaskLibrary library =
                findrift::load_task_library(tasks_file);
            for (const auto& bundle : library.tasks) {
                if (bundle.spec.task_id != findrift::TaskId::rag) continue;
                for (const auto& task_case : bundle.cases) {
                    auto q = task_case.bindings.find("question");
                    if (q != task_case.bindings.end()) {
                        queries.push_back(q->second);
                    }
                }
            }
        }
    }
    if (queries.empty()) {
        throw HarnessError(ErrorCode::ConfigError,
                           "no queries: pass --query or add rag cases");
    }

    std::size_t k = config.doc.value("retrieval_k", 3u);
    std::vector<findrift::OrderingProbeResult> results =
        findrift::ordering_probe(snippets, queries, permutations, k);
    bool all_passed = true;
    for (const auto& probe : results) {
        std::printf("%s  %zu permutations, %zu violations -> %s\n",
                    probe.query.c_str(), probe.permutations, probe.violations,
                    probe.passed ? "pass" : "FAIL");
        all_passed = all_passed && probe.passed;
    }
    return all_passed ? 0 : 2;
}

int cmd_gen_fixture(std::uint64_t seed, std::size_t rows,
                    const std::string& out_path) {
    findrift::FixtureDB fixture =
        findrift::generate_fixture_db(seed, rows, out_path);
    findrift::Decimal total = findrift::exact_transaction_total(out_path);
    std::printf("fixture:      %s\n", fixture.path.c_str());
    std::printf("content_hash: %s\n", fixture.content_hash.c_str());
    std::printf("oracle_total: %s\n", total.to_string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"findrift: deterministic LLM output-drift evaluation harness"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute the experiment matrix");
    std::string run_config;
    RunFlags run_flags;
    run->add_option("--config", run_config, "Config file (JSON)")->required();
    run->add_option("--tasks", run_flags.tasks, "Tasks to run (rag,summary,sql)")
        ->delimiter(',');
    run->add_option("--temps", run_flags.temps, "Temperatures")->delimiter(',');
    run->add_option("--conc", run_flags.conc, "Concurrency levels")
        ->delimiter(',');
    run->add_option("--trials", run_flags.trials, "Trials per condition");
    run->add_option("--seed", run_flags.seed, "Generation seed");
    run->add_flag("--strict", run_flags.strict,
                  "Abort a condition on the first failed run");

    // replay
    auto* replay = app.add_subcommand("replay",
                                      "Re-execute a trace and attest hashes");
    std::string replay_trace, replay_endpoint, replay_config;
    replay->add_option("--trace", replay_trace, "Trace file (JSONL)")
        ->required();
    replay->add_option("--endpoint", replay_endpoint,
                       "Endpoint name from the config, or 'self' to replay "
                       "against the trace's own stored responses")
        ->required();
    replay->add_option("--config", replay_config, "Config file (JSON)");

    // report
    auto* report = app.add_subcommand("report",
                                      "Rebuild reports from stored traces");
    std::string report_glob, report_dir = "reports";
    report->add_option("--traces", report_glob, "Glob of trace files")
        ->required();
    report->add_option("--out", report_dir, "Report directory");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Seed sweep at temperature 0");
    std::string sweep_config;
    RunFlags sweep_flags;
    std::vector<std::uint64_t> sweep_seeds;
    sweep->add_option("--config", sweep_config, "Config file (JSON)")
        ->required();
    sweep->add_option("--seeds", sweep_seeds,
                      "Seeds to sweep (default 42,123,456,789,999)")
        ->delimiter(',');
    sweep->add_option("--tasks", sweep_flags.tasks, "Tasks to run")
        ->delimiter(',');
    sweep->add_option("--conc", sweep_flags.conc, "Concurrency levels")
        ->delimiter(',');
    sweep->add_option("--trials", sweep_flags.trials, "Trials per condition");
    sweep->add_flag("--strict", sweep_flags.strict,
                    "Abort a condition on the first failed run");

    // probe-ordering
    auto* probe = app.add_subcommand(
        "probe-ordering", "Verify retrieval ordering under permutation");
    std::string probe_config;
    std::size_t probe_permutations = 1000;
    std::vector<std::string> probe_queries;
    probe->add_option("--config", probe_config, "Config file (JSON)")
        ->required();
    probe->add_option("--permutations", probe_permutations,
                      "Shuffles per query");
    probe->add_option("--query", probe_queries,
                      "Explicit query (repeatable; default: rag cases)");

    // gen-fixture
    auto* gen = app.add_subcommand("gen-fixture",
                                   "Generate the synthetic SQL fixture");
    std::uint64_t gen_seed = 42;
    std::size_t gen_rows = 1000;
    std::string gen_out = "fixture.sqlite3";
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--rows", gen_rows, "Transaction row count");
    gen->add_option("--out", gen_out, "Output database path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_config, run_flags);
        if (replay->parsed()) {
            return cmd_replay(replay_trace, replay_endpoint, replay_config);
        }
        if (report->parsed()) return cmd_report(report_glob, report_dir);
        if (sweep->parsed()) {
            return cmd_sweep(sweep_config, sweep_flags, sweep_seeds);
        }
        if (probe->parsed()) {
            return cmd_probe_ordering(probe_config, probe_permutations,
                                      probe_queries);
        }
        if (gen->parsed()) return cmd_gen_fixture(gen_seed, gen_rows, gen_out);
    } catch (const HarnessError& e) {
        std::fprintf(stderr, "error [%s]: %s\n",
                     std::string(findrift::error_code_name(e.code())).c_str(),
                     e.what());
        return findrift::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
