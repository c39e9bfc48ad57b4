#include "findrift/attestation.hpp"

#include <filesystem>
#include <fstream>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/time.hpp"

namespace findrift {

namespace {

nlohmann::json verdict_to_json(const InvariantVerdict& verdict) {
    nlohmann::json violations = nlohmann::json::array();
    for (const Violation& v : verdict.violations) {
        violations.push_back({{"code", v.code}, {"message", v.message}});
    }
    nlohmann::json j{{"passed", verdict.passed}, {"violations", violations}};
    if (verdict.observed_value) j["observed_value"] = verdict.observed_value->to_string();
    if (verdict.expected_value) j["expected_value"] = verdict.expected_value->to_string();
    return j;
}

InvariantVerdict verdict_from_json(const nlohmann::json& j) {
    InvariantVerdict verdict;
    verdict.passed = j.at("passed").get<bool>();
    for (const auto& v : j.at("violations")) {
        verdict.violations.push_back({v.at("code").get<std::string>(),
                                      v.at("message").get<std::string>()});
    }
    if (j.contains("observed_value")) {
        verdict.observed_value =
            Decimal::parse(j["observed_value"].get<std::string>());
    }
    if (j.contains("expected_value")) {
        verdict.expected_value =
            Decimal::parse(j["expected_value"].get<std::string>());
    }
    return verdict;
}

// Token counts serialize as the literal string "unknown" when the provider
// did not report them — never as an invented number.
nlohmann::json tokens_to_json(const std::optional<std::uint64_t>& tokens) {
    if (tokens) return *tokens;
    return "unknown";
}

std::optional<std::uint64_t> tokens_from_json(const nlohmann::json& j) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    return std::nullopt;
}

void validate_record(const TraceRecord& record) {
    if (record.run_id.empty()) {
        throw HarnessError(ErrorCode::CorruptTrace, "record without run_id");
    }
    if (sha256_hex(record.prompt) != record.prompt_sha256) {
        throw HarnessError(ErrorCode::CorruptTrace,
                           "prompt_sha256 does not match prompt for run " +
                               record.run_id);
    }
    if (sha256_hex(record.response) != record.response_sha256) {
        throw HarnessError(ErrorCode::CorruptTrace,
                           "response_sha256 does not match response for run " +
                               record.run_id);
    }
    if (record.record_time < record.valid_time) {
        throw HarnessError(ErrorCode::CorruptTrace,
                           "record_time precedes valid_time for run " +
                               record.run_id);
    }
}

}  // namespace

std::string hash_output(const std::string& text) { return sha256_hex(text); }

nlohmann::json TraceRecord::to_json() const {
    nlohmann::json j{
        {"schema_version", schema_version},
        {"run_id", run_id},
        {"task_id", task_id},
        {"case_id", case_id},
        {"provider", {{"kind", provider_kind}, {"model_id", model_id}}},
        {"decoding", decoding_to_json(decoding)},
        {"concurrency", concurrency},
        {"wave_idx", wave_idx},
        {"trial_index", trial_index},
        {"prompt", prompt},
        {"prompt_sha256", prompt_sha256},
        {"response", response},
        {"response_sha256", response_sha256},
        {"latency_ms", latency_ms},
        {"jitter_ms", jitter_ms},
        {"input_tokens", tokens_to_json(input_tokens)},
        {"generated_tokens", tokens_to_json(generated_tokens)},
        {"citations", citations},
        {"verdict", verdict_to_json(verdict)},
        {"retrieval_provenance", retrieval_provenance},
        {"manifest_ref", manifest_ref},
        {"corpus_version_id", corpus_version_id},
        {"valid_time", valid_time},
        {"record_time", record_time},
        {"compliance_tags", compliance_tags},
    };
    if (error) j["error"] = *error;
    return j;
}

TraceRecord TraceRecord::from_json(const nlohmann::json& j) {
    TraceRecord r;
    r.schema_version = j.at("schema_version").get<std::string>();
    r.run_id = j.at("run_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    r.case_id = j.at("case_id").get<std::string>();
    r.provider_kind = j.at("provider").at("kind").get<std::string>();
    r.model_id = j.at("provider").at("model_id").get<std::string>();
    r.decoding = decoding_from_json(j.at("decoding"));
    r.concurrency = j.at("concurrency").get<int>();
    r.wave_idx = j.at("wave_idx").get<int>();
    r.trial_index = j.at("trial_index").get<int>();
    r.prompt = j.at("prompt").get<std::string>();
    r.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
    r.response = j.at("response").get<std::string>();
    r.response_sha256 = j.at("response_sha256").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.jitter_ms = j.at("jitter_ms").get<double>();
    r.input_tokens = tokens_from_json(j.at("input_tokens"));
    r.generated_tokens = tokens_from_json(j.at("generated_tokens"));
    r.citations = j.at("citations").get<std::vector<std::string>>();
    r.verdict = verdict_from_json(j.at("verdict"));
    r.retrieval_provenance =
        j.at("retrieval_provenance").get<std::vector<std::string>>();
    r.manifest_ref = j.at("manifest_ref").get<std::string>();
    r.corpus_version_id = j.at("corpus_version_id").get<std::string>();
    r.valid_time = j.at("valid_time").get<std::string>();
    r.record_time = j.at("record_time").get<std::string>();
    r.compliance_tags = j.at("compliance_tags").get<std::vector<std::string>>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
}

TraceWriter::TraceWriter(std::string path) : path_(std::move(path)) {
    // Resuming an existing trace: learn its run_ids so duplicates are still
    // refused across process restarts.
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("run_id")) {
            throw HarnessError(ErrorCode::CorruptTrace,
                               path_ + ": unparseable line " +
                                   std::to_string(line_no));
        }
        seen_run_ids_.insert(j["run_id"].get<std::string>());
    }
}

void TraceWriter::append(const TraceRecord& record) {
    validate_record(record);
    std::lock_guard<std::mutex> lock(mutex_);
    if (!seen_run_ids_.insert(record.run_id).second) {
        throw HarnessError(ErrorCode::DuplicateRun,
                           "run_id already present in trace: " + record.run_id);
    }
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) {
        seen_run_ids_.erase(record.run_id);
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot append to trace " + path_);
    }
    // dump() escapes all control characters, so one record is always exactly
    // one line.
    out << record.to_json().dump() << '\n';
    out.flush();
    if (!out) {
        seen_run_ids_.erase(record.run_id);
        throw HarnessError(ErrorCode::IoFailure,
                           "short write appending to trace " + path_);
    }
}

void append_trace(const TraceRecord& record, const std::string& path) {
    TraceWriter writer(path);
    writer.append(record);
}

std::vector<TraceRecord> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw HarnessError(ErrorCode::IoFailure, "cannot open trace " + path);
    }
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw HarnessError(ErrorCode::CorruptTrace,
                               path + ": unparseable line " +
                                   std::to_string(line_no));
        }
        try {
            records.push_back(TraceRecord::from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw HarnessError(ErrorCode::CorruptTrace,
                               path + ": line " + std::to_string(line_no) +
                                   ": " + e.what());
        }
    }
    return records;
}

std::vector<TraceRecord> query_asof(const std::string& trace_path,
                                    const std::string& as_of, TimeAxis axis) {
    std::vector<TraceRecord> all = read_trace(trace_path);
    std::vector<TraceRecord> selected;
    for (auto& record : all) {
        const std::string& stamp =
            axis == TimeAxis::valid_time ? record.valid_time : record.record_time;
        if (stamp <= as_of) selected.push_back(std::move(record));
    }
    return selected;
}

nlohmann::json AttestationReport::to_json() const {
    nlohmann::json mismatches = nlohmann::json::array();
    for (const HashMismatch& m : mismatched) {
        mismatches.push_back({{"run_id", m.run_id},
                              {"old_hash", m.old_hash},
                              {"new_hash", m.new_hash}});
    }
    return nlohmann::json{
        {"trace_path", trace_path},
        {"total_runs", total_runs},
        {"matched", matched},
        {"mismatched", mismatches},
        {"manifest_consistent", manifest_consistent},
        {"verdict", verdict ? "pass" : "fail"},
    };
}

AttestationReport replay(const std::string& trace_path,
                         const ProviderEndpoint& endpoint,
                         const std::string& active_corpus_version,
                         std::string replay_out_path) {
    std::ifstream probe(trace_path);
    if (!probe) {
        throw HarnessError(ErrorCode::IoFailure,
                           "cannot open trace " + trace_path);
    }
    probe.close();

    // Tolerant line-by-line read: validation hashes are recomputed here, so
    // a tampered record must surface as a mismatch, not as a refusal.
    std::vector<nlohmann::json> lines;
    {
        std::ifstream in(trace_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw HarnessError(ErrorCode::CorruptTrace,
                                   trace_path + ": unparseable line " +
                                       std::to_string(line_no));
            }
            lines.push_back(std::move(j));
        }
    }

    if (replay_out_path.empty()) {
        std::filesystem::path base(trace_path);
        std::filesystem::path out = base;
        out.replace_extension(".replay.jsonl");
        replay_out_path = out.string();
    }
    std::filesystem::remove(replay_out_path);
    TraceWriter replay_writer(replay_out_path);

    AttestationReport report;
    report.trace_path = trace_path;
    report.total_runs = lines.size();

    for (std::size_t idx = 0; idx < lines.size(); ++idx) {
        const nlohmann::json& j = lines[idx];
        TraceRecord record;
        try {
            record = TraceRecord::from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw HarnessError(ErrorCode::CorruptTrace,
                               trace_path + ": " + e.what());
        }
        if (record.corpus_version_id != active_corpus_version) {
            report.manifest_consistent = false;
        }

        // Tamper check: the stored response must still hash to the stored
        // digest. A flipped byte in a copied trace is caught here even when
        // the provider faithfully reproduces the original output.
        std::string stored_digest = sha256_hex(record.response);
        bool tampered = stored_digest != record.response_sha256;
        if (tampered) {
            report.mismatched.push_back(
                {record.run_id, record.response_sha256, stored_digest});
        }

        // Drift check: re-execute the identical request and compare digests.
        bool drifted = false;
        TraceRecord fresh = record;
        try {
            GenerationResult result =
                generate(endpoint, record.prompt, record.decoding);
            fresh.response = result.text;
            fresh.response_sha256 = sha256_hex(result.text);
            fresh.latency_ms = result.latency_ms;
            fresh.input_tokens = result.input_tokens;
            fresh.generated_tokens = result.generated_tokens;
            fresh.error.reset();
            drifted = fresh.response_sha256 != record.response_sha256;
            if (drifted && !tampered) {
                report.mismatched.push_back({record.run_id,
                                             record.response_sha256,
                                             fresh.response_sha256});
            }
        } catch (const HarnessError& e) {
            fresh.response.clear();
            fresh.response_sha256 = sha256_hex(fresh.response);
            fresh.error = std::string(error_code_name(e.code())) + ": " + e.what();
            drifted = true;
            if (!tampered) {
                report.mismatched.push_back({record.run_id,
                                             record.response_sha256,
                                             "unavailable"});
            }
        }
        if (!tampered && !drifted) ++report.matched;

        // The fresh record describes what was actually replayed, so its own
        // hashes are recomputed rather than copied from a possibly tampered
        // original.
        fresh.run_id =
            sha256_hex("replay|" + std::to_string(idx) + "|" + record.run_id);
        fresh.prompt_sha256 = sha256_hex(fresh.prompt);
        fresh.valid_time = utc_now_iso8601();
        fresh.record_time = fresh.valid_time;
        replay_writer.append(fresh);
    }
    report.verdict = report.mismatched.empty() && report.manifest_consistent;
    return report;
}

ProviderEndpoint make_replay_mock_from_trace(const std::string& trace_path) {
    std::map<std::string, std::string> table;
    for (const TraceRecord& record : read_trace(trace_path)) {
        table[replay_key(record.prompt_sha256, record.decoding.seed)] =
            record.response;
    }
    return make_replay_mock(table);
}

}  // namespace findrift
