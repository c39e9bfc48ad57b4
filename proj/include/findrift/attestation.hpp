#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "findrift/invariants.hpp"
#include "findrift/provider.hpp"

namespace findrift {

// One audit-trail entry per run, bi-temporal: valid_time is when the
// generation happened, record_time is when the entry was appended. Records
// are append-only and independently verifiable through their hashes.
struct TraceRecord {
    std::string schema_version = "1";
    std::string run_id;
    std::string task_id;
    std::string case_id;
    std::string provider_kind;
    std::string model_id;
    DecodingConfig decoding;
    int concurrency = 1;
    int wave_idx = 0;
    int trial_index = 0;
    std::string prompt;
    std::string prompt_sha256;
    std::string response;
    std::string response_sha256;
    double latency_ms = 0.0;
    double jitter_ms = 0.0;
    std::optional<std::uint64_t> input_tokens;   // absent = unknown
    std::optional<std::uint64_t> generated_tokens;
    std::vector<std::string> citations;
    InvariantVerdict verdict;
    std::vector<std::string> retrieval_provenance;  // ordered snippet ids
    std::string manifest_ref;
    std::string corpus_version_id;
    std::string valid_time;   // ISO-8601 UTC
    std::string record_time;  // ISO-8601 UTC, >= valid_time
    std::vector<std::string> compliance_tags;
    std::optional<std::string> error;  // failed runs record why

    nlohmann::json to_json() const;
    static TraceRecord from_json(const nlohmann::json& j);
};

// Content hash used for prompts and responses throughout the audit trail.
std::string hash_output(const std::string& text);

// Serialized appender: one JSON object per line, duplicate run_ids refused,
// appends totally ordered even with many producing threads.
class TraceWriter {
public:
    explicit TraceWriter(std::string path);

    // Validates the record's hash invariants and appends exactly one line.
    void append(const TraceRecord& record);

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::mutex mutex_;
    std::set<std::string> seen_run_ids_;
};

// One-shot convenience over TraceWriter.
void append_trace(const TraceRecord& record, const std::string& path);

// Parses a whole trace file; any unparseable line aborts with
// CorruptTrace naming the line number.
std::vector<TraceRecord> read_trace(const std::string& path);

enum class TimeAxis { valid_time, record_time };

// Records whose chosen timestamp is <= as_of, in file order. ISO-8601 UTC
// strings compare correctly as bytes.
std::vector<TraceRecord> query_asof(const std::string& trace_path,
                                    const std::string& as_of, TimeAxis axis);

struct HashMismatch {
    std::string run_id;
    std::string old_hash;
    std::string new_hash;
};

struct AttestationReport {
    std::string trace_path;
    std::size_t total_runs = 0;
    std::size_t matched = 0;
    std::vector<HashMismatch> mismatched;
    bool manifest_consistent = true;
    bool verdict = false;  // pass iff mismatched empty and manifest consistent

    nlohmann::json to_json() const;
};

// Re-executes every record of a trace against the endpoint and attests hash
// equality. Two checks per record: the stored response must still match its
// recorded hash (tamper evidence), and the fresh response must hash to the
// same value (drift evidence). The original trace is never touched; fresh
// runs are appended to `replay_out_path` (derived from the input path when
// empty). `active_corpus_version` is compared against each record's
// recorded corpus version.
AttestationReport replay(const std::string& trace_path,
                         const ProviderEndpoint& endpoint,
                         const std::string& active_corpus_version,
                         std::string replay_out_path = "");

// Builds a replay mock whose table is seeded from an existing trace:
// (prompt hash, seed) -> stored response.
ProviderEndpoint make_replay_mock_from_trace(const std::string& trace_path);

}  // namespace findrift
