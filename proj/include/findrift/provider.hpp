#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace findrift {

enum class DecodingMethod { greedy, sample };

// Pinned sampler parameters. Protocol runs use temperature 0.0 or 0.2 with
// top_p fixed at 1.0 and an explicit seed on every request.
struct DecodingConfig {
    double temperature = 0.0;
    double top_p = 1.0;
    std::int64_t seed = 42;
    int max_new_tokens = 512;
    std::vector<std::string> stop;
    DecodingMethod decoding_method = DecodingMethod::greedy;

    // Throws InvalidDecodingConfig: temperature outside [0,1], or
    // temperature 0 combined with sampling.
    void validate() const;
};

enum class ProviderKind {
    ollama_compatible,
    watsonx_style,
    mock_replay,
    mock_stochastic,
};

std::string provider_kind_name(ProviderKind kind);
std::optional<ProviderKind> parse_provider_kind(const std::string& name);

struct MockState;  // internal to the provider implementation

struct ProviderEndpoint {
    ProviderKind kind = ProviderKind::mock_replay;
    std::string name;      // handle used by configs and the CLI
    std::string base_url;  // network kinds only
    std::string model_id;
    // Name of the environment variable holding the credential. The secret
    // itself is resolved at call time and never stored or serialized.
    std::string credential_ref;
    std::string api_version;
    std::string project_id;  // cloud-style accounts that scope by project
    int timeout_ms = 120000;
    std::shared_ptr<MockState> mock;  // mocks only
};

struct GenerationResult {
    std::string text;
    std::optional<std::uint64_t> input_tokens;
    std::optional<std::uint64_t> generated_tokens;
    double latency_ms = 0.0;
    std::map<std::string, std::string> provider_meta;
};

struct EnvironmentManifest {
    std::string harness_version;
    std::string os_name_version;
    std::string provider_api_version;
    std::string model_digest;
    std::string corpus_version_id;
    std::string config_hash;
    std::string created_at;

    nlohmann::json to_json() const;
    static EnvironmentManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kHarnessVersion = "1.0.0";

// Sends one generation request and returns the provider output verbatim.
// Never retries on its own; callers that retry must log each attempt.
// Errors: ProviderUnreachable (transport), ProviderRejected (non-2xx),
// ProviderTimeout.
GenerationResult generate(const ProviderEndpoint& endpoint,
                          const std::string& prompt,
                          const DecodingConfig& config);

EnvironmentManifest capture_manifest(const ProviderEndpoint& endpoint,
                                     const std::string& corpus_version,
                                     const std::string& full_config);

// Weighted random mock: each call draws a variant with probability
// weight/sum(weights) from a deterministic generator, so the full output
// sequence is a function of (seed, call order). Draws are serialized.
ProviderEndpoint make_stochastic_mock(
    const std::vector<std::pair<std::string, double>>& variants,
    std::uint64_t seed);

// Scripted mock: expands the explicit multiset (e.g. {A x9, B x7}), shuffles
// it once with the seeded generator, and serves it in that fixed order,
// cycling when calls exceed the schedule length.
ProviderEndpoint make_scripted_mock(
    const std::vector<std::pair<std::string, std::size_t>>& counts,
    std::uint64_t seed);

// Replay mock: returns the stored response for (sha256(prompt), seed);
// unknown keys are rejected like a 404 from a real provider.
ProviderEndpoint make_replay_mock(
    const std::map<std::string, std::string>& responses);

// Key used by the replay table: "<prompt_sha256>|<seed>".
std::string replay_key(const std::string& prompt_sha256, std::int64_t seed);

// Wire payloads, exposed so tests can pin their exact field sets.
// Local-style: POST /api/generate with
//   {model, prompt, options:{temperature, top_p, seed, num_predict, stop}}
// Cloud-style: POST /ml/v1/text/generation?version=... with
//   {model_id, input, parameters:{decoding_method, temperature, top_p,
//    random_seed, max_new_tokens, return_options}} (+project_id when set)
nlohmann::json build_ollama_payload(const ProviderEndpoint& endpoint,
                                    const std::string& prompt,
                                    const DecodingConfig& config);
nlohmann::json build_watsonx_payload(const ProviderEndpoint& endpoint,
                                     const std::string& prompt,
                                     const DecodingConfig& config);

nlohmann::json decoding_to_json(const DecodingConfig& config);
DecodingConfig decoding_from_json(const nlohmann::json& j);

}  // namespace findrift
