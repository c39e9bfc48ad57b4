#include "findrift/provider.hpp"

#include <sys/utsname.h>

#include <chrono>
#include <cstdlib>
#include <httplib.h>
#include <mutex>
#include <sstream>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/prng.hpp"
#include "findrift/time.hpp"

namespace findrift {

namespace {

enum class MockMode { replay, weighted, scripted };

}  // namespace

// Internal mock machinery. All draw state is guarded so the sequence of
// outputs is a deterministic function of (seed, call order) even when
// several workers call generate concurrently.
struct MockState {
    MockMode mode = MockMode::replay;
    std::mutex mutex;

    // replay
    std::map<std::string, std::string> responses;

    // weighted
    std::vector<std::pair<std::string, double>> variants;
    double total_weight = 0.0;

    // scripted
    std::vector<std::string> schedule;
    std::size_t cursor = 0;

    Xorshift64Star rng{0};
};

void DecodingConfig::validate() const {
    if (temperature < 0.0 || temperature > 1.0) {
        throw HarnessError(ErrorCode::InvalidDecodingConfig,
                           "temperature must lie in [0,1]");
    }
    if (temperature == 0.0 && decoding_method != DecodingMethod::greedy) {
        throw HarnessError(ErrorCode::InvalidDecodingConfig,
                           "temperature 0 requires greedy decoding");
    }
    if (temperature > 0.0 && decoding_method == DecodingMethod::greedy) {
        throw HarnessError(ErrorCode::InvalidDecodingConfig,
                           "sampling temperature requires decoding_method "
                           "sample");
    }
    if (max_new_tokens <= 0) {
        throw HarnessError(ErrorCode::InvalidDecodingConfig,
                           "max_new_tokens must be positive");
    }
}

std::string provider_kind_name(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::ollama_compatible: return "ollama_compatible";
        case ProviderKind::watsonx_style: return "watsonx_style";
        case ProviderKind::mock_replay: return "mock_replay";
        case ProviderKind::mock_stochastic: return "mock_stochastic";
    }
    return "unknown";
}

std::optional<ProviderKind> parse_provider_kind(const std::string& name) {
    if (name == "ollama_compatible") return ProviderKind::ollama_compatible;
    if (name == "watsonx_style") return ProviderKind::watsonx_style;
    if (name == "mock_replay") return ProviderKind::mock_replay;
    if (name == "mock_stochastic") return ProviderKind::mock_stochastic;
    return std::nullopt;
}

std::string replay_key(const std::string& prompt_sha256, std::int64_t seed) {
    return prompt_sha256 + "|" + std::to_string(seed);
}

nlohmann::json build_ollama_payload(const ProviderEndpoint& endpoint,
                                    const std::string& prompt,
                                    const DecodingConfig& config) {
    nlohmann::json options{
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"seed", config.seed},
        {"num_predict", config.max_new_tokens},
        {"stop", config.stop},
    };
    return nlohmann::json{
        {"model", endpoint.model_id},
        {"prompt", prompt},
        {"options", options},
    };
}

nlohmann::json build_watsonx_payload(const ProviderEndpoint& endpoint,
                                     const std::string& prompt,
                                     const DecodingConfig& config) {
    nlohmann::json parameters{
        {"decoding_method",
         config.decoding_method == DecodingMethod::greedy ? "greedy" : "sample"},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"random_seed", config.seed},
        {"max_new_tokens", config.max_new_tokens},
        {"return_options", nlohmann::json{{"input_text", false}}},
    };
    nlohmann::json payload{
        {"model_id", endpoint.model_id},
        {"input", prompt},
        {"parameters", parameters},
    };
    if (!endpoint.project_id.empty()) payload["project_id"] = endpoint.project_id;
    return payload;
}

namespace {

GenerationResult mock_generate(const ProviderEndpoint& endpoint,
                               const std::string& prompt,
                               const DecodingConfig& config) {
    MockState& state = *endpoint.mock;
    std::string text;
    {
        std::lock_guard<std::mutex> lock(state.mutex);
        switch (state.mode) {
            case MockMode::replay: {
                auto key = replay_key(sha256_hex(prompt), config.seed);
                auto found = state.responses.find(key);
                if (found == state.responses.end()) {
                    throw HarnessError(
                        ErrorCode::ProviderRejected,
                        "replay mock has no response for key " + key);
                }
                text = found->second;
                break;
            }
            case MockMode::weighted: {
                double u = state.rng.u01();
                double cumulative = 0.0;
                text = state.variants.back().first;
                for (const auto& [variant, weight] : state.variants) {
                    cumulative += weight / state.total_weight;
                    if (u < cumulative) {
                        text = variant;
                        break;
                    }
                }
                break;
            }
            case MockMode::scripted: {
                text = state.schedule[state.cursor % state.schedule.size()];
                ++state.cursor;
                break;
            }
        }
    }
    GenerationResult result;
    result.text = std::move(text);
    result.latency_ms = 0.0;
    result.provider_meta["mock"] =
        state.mode == MockMode::replay ? "replay" : "stochastic";
    return result;
}

struct HttpResponse {
    int status = 0;
    std::string body;
};

HttpResponse http_post_json(const ProviderEndpoint& endpoint,
                            const std::string& path,
                            const httplib::Headers& headers,
                            const std::string& body) {
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(endpoint.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(endpoint.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(endpoint.timeout_ms));
    client.set_follow_location(true);

    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
        switch (result.error()) {
            case httplib::Error::ConnectionTimeout:
            case httplib::Error::Read:
            case httplib::Error::Write:
            case httplib::Error::Canceled:
                throw HarnessError(ErrorCode::ProviderTimeout,
                                   "provider call timed out: " +
                                       httplib::to_string(result.error()));
            default:
                throw HarnessError(ErrorCode::ProviderUnreachable,
                                   "transport failure: " +
                                       httplib::to_string(result.error()));
        }
    }
    if (result->status < 200 || result->status >= 300) {
        throw HarnessError(ErrorCode::ProviderRejected,
                           "provider rejected request (status " +
                               std::to_string(result->status) +
                               "): " + result->body);
    }
    return {result->status, result->body};
}

std::optional<std::string> resolve_credential(const ProviderEndpoint& endpoint) {
    if (endpoint.credential_ref.empty()) return std::nullopt;
    const char* value = std::getenv(endpoint.credential_ref.c_str());
    if (value == nullptr || *value == '\0') {
        throw HarnessError(ErrorCode::ConfigError,
                           "credential environment variable " +
                               endpoint.credential_ref + " is not set");
    }
    return std::string(value);
}

GenerationResult ollama_generate(const ProviderEndpoint& endpoint,
                                 const std::string& prompt,
                                 const DecodingConfig& config) {
    nlohmann::json payload = build_ollama_payload(endpoint, prompt, config);
    httplib::Headers headers;
    if (auto credential = resolve_credential(endpoint)) {
        headers.emplace("Authorization", "Bearer " + *credential);
    }
    HttpResponse response =
        http_post_json(endpoint, "/api/generate", headers, payload.dump());

    GenerationResult result;
    result.provider_meta["http_status"] = std::to_string(response.status);
    // Servers may answer with one JSON object or with line-delimited chunks;
    // handle both without post-processing the text itself.
    auto absorb = [&](const nlohmann::json& obj) {
        if (obj.contains("response") && obj["response"].is_string()) {
            result.text += obj["response"].get<std::string>();
        }
        if (obj.contains("prompt_eval_count") &&
            obj["prompt_eval_count"].is_number_unsigned()) {
            result.input_tokens = obj["prompt_eval_count"].get<std::uint64_t>();
        }
        if (obj.contains("eval_count") && obj["eval_count"].is_number_unsigned()) {
            result.generated_tokens = obj["eval_count"].get<std::uint64_t>();
        }
    };
    nlohmann::json whole = nlohmann::json::parse(response.body, nullptr, false);
    if (!whole.is_discarded() && whole.is_object()) {
        absorb(whole);
    } else {
        std::istringstream lines(response.body);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            nlohmann::json chunk = nlohmann::json::parse(line, nullptr, false);
            if (!chunk.is_discarded() && chunk.is_object()) absorb(chunk);
        }
    }
    return result;
}

GenerationResult watsonx_generate(const ProviderEndpoint& endpoint,
                                  const std::string& prompt,
                                  const DecodingConfig& config) {
    nlohmann::json payload = build_watsonx_payload(endpoint, prompt, config);
    httplib::Headers headers;
    if (auto credential = resolve_credential(endpoint)) {
        headers.emplace("Authorization", "Bearer " + *credential);
    }
    std::string path = "/ml/v1/text/generation";
    if (!endpoint.api_version.empty()) {
        path += "?version=" + endpoint.api_version;
    }
    HttpResponse response =
        http_post_json(endpoint, path, headers, payload.dump());

    GenerationResult result;
    result.provider_meta["http_status"] = std::to_string(response.status);
    nlohmann::json body = nlohmann::json::parse(response.body, nullptr, false);
    if (body.is_discarded() || !body.contains("results") ||
        !body["results"].is_array() || body["results"].empty()) {
        throw HarnessError(ErrorCode::ProviderRejected,
                           "malformed generation response: " + response.body);
    }
    const nlohmann::json& first = body["results"][0];
    if (first.contains("generated_text") && first["generated_text"].is_string()) {
        result.text = first["generated_text"].get<std::string>();
    }
    if (first.contains("generated_token_count") &&
        first["generated_token_count"].is_number_unsigned()) {
        result.generated_tokens =
            first["generated_token_count"].get<std::uint64_t>();
    }
    if (first.contains("input_token_count") &&
        first["input_token_count"].is_number_unsigned()) {
        result.input_tokens = first["input_token_count"].get<std::uint64_t>();
    }
    return result;
}

}  // namespace

GenerationResult generate(const ProviderEndpoint& endpoint,
                          const std::string& prompt,
                          const DecodingConfig& config) {
    config.validate();
    if (prompt.empty()) {
        throw HarnessError(ErrorCode::ConfigError, "prompt must be nonempty");
    }
    auto started = std::chrono::steady_clock::now();
    GenerationResult result;
    switch (endpoint.kind) {
        case ProviderKind::mock_replay:
        case ProviderKind::mock_stochastic:
            if (!endpoint.mock) {
                throw HarnessError(ErrorCode::InvalidMock,
                                   "mock endpoint carries no mock state");
            }
            result = mock_generate(endpoint, prompt, config);
            break;
        case ProviderKind::ollama_compatible:
            result = ollama_generate(endpoint, prompt, config);
            break;
        case ProviderKind::watsonx_style:
            result = watsonx_generate(endpoint, prompt, config);
            break;
    }
    auto finished = std::chrono::steady_clock::now();
    result.latency_ms =
        std::chrono::duration<double, std::milli>(finished - started).count();
    return result;
}

EnvironmentManifest capture_manifest(const ProviderEndpoint& endpoint,
                                     const std::string& corpus_version,
                                     const std::string& full_config) {
    EnvironmentManifest manifest;
    manifest.harness_version = kHarnessVersion;
    struct utsname uts {};
    if (uname(&uts) == 0) {
        manifest.os_name_version =
            std::string(uts.sysname) + " " + uts.release;
    } else {
        manifest.os_name_version = "unknown";
    }
    manifest.provider_api_version = endpoint.api_version;
    switch (endpoint.kind) {
        case ProviderKind::mock_replay:
        case ProviderKind::mock_stochastic:
            manifest.model_digest =
                "mock:" + provider_kind_name(endpoint.kind);
            break;
        default:
            // No portable digest endpoint across providers; record the gap
            // explicitly rather than inventing a value.
            manifest.model_digest = "unknown";
            break;
    }
    manifest.corpus_version_id = corpus_version;
    manifest.config_hash = sha256_hex(full_config);
    manifest.created_at = utc_now_iso8601();
    return manifest;
}

nlohmann::json EnvironmentManifest::to_json() const {
    return nlohmann::json{
        {"harness_version", harness_version},
        {"os_name_version", os_name_version},
        {"provider_api_version", provider_api_version},
        {"model_digest", model_digest},
        {"corpus_version_id", corpus_version_id},
        {"config_hash", config_hash},
        {"created_at", created_at},
    };
}

EnvironmentManifest EnvironmentManifest::from_json(const nlohmann::json& j) {
    EnvironmentManifest manifest;
    manifest.harness_version = j.at("harness_version").get<std::string>();
    manifest.os_name_version = j.at("os_name_version").get<std::string>();
    manifest.provider_api_version =
        j.at("provider_api_version").get<std::string>();
    manifest.model_digest = j.at("model_digest").get<std::string>();
    manifest.corpus_version_id = j.at("corpus_version_id").get<std::string>();
    manifest.config_hash = j.at("config_hash").get<std::string>();
    manifest.created_at = j.at("created_at").get<std::string>();
    return manifest;
}

nlohmann::json decoding_to_json(const DecodingConfig& config) {
    return nlohmann::json{
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"seed", config.seed},
        {"max_new_tokens", config.max_new_tokens},
        {"stop", config.stop},
        {"decoding_method",
         config.decoding_method == DecodingMethod::greedy ? "greedy" : "sample"},
    };
}

DecodingConfig decoding_from_json(const nlohmann::json& j) {
    DecodingConfig config;
    config.temperature = j.at("temperature").get<double>();
    config.top_p = j.at("top_p").get<double>();
    config.seed = j.at("seed").get<std::int64_t>();
    config.max_new_tokens = j.at("max_new_tokens").get<int>();
    config.stop = j.at("stop").get<std::vector<std::string>>();
    config.decoding_method = j.at("decoding_method").get<std::string>() == "greedy"
                                 ? DecodingMethod::greedy
                                 : DecodingMethod::sample;
    return config;
}

ProviderEndpoint make_stochastic_mock(
    const std::vector<std::pair<std::string, double>>& variants,
    std::uint64_t seed) {
    if (variants.empty()) {
        throw HarnessError(ErrorCode::InvalidMock, "mock needs >= 1 variant");
    }
    double total = 0.0;
    for (const auto& [text, weight] : variants) {
        if (weight <= 0.0) {
            throw HarnessError(ErrorCode::InvalidMock,
                               "mock variant weights must be positive");
        }
        total += weight;
    }
    ProviderEndpoint endpoint;
    endpoint.kind = ProviderKind::mock_stochastic;
    endpoint.name = "mock-stochastic";
    endpoint.model_id = "mock-stochastic";
    endpoint.mock = std::make_shared<MockState>();
    endpoint.mock->mode = MockMode::weighted;
    endpoint.mock->variants = variants;
    endpoint.mock->total_weight = total;
    endpoint.mock->rng = Xorshift64Star(seed);
    return endpoint;
}

ProviderEndpoint make_scripted_mock(
    const std::vector<std::pair<std::string, std::size_t>>& counts,
    std::uint64_t seed) {
    std::vector<std::string> schedule;
    for (const auto& [text, count] : counts) {
        for (std::size_t i = 0; i < count; ++i) schedule.push_back(text);
    }
    if (schedule.empty()) {
        throw HarnessError(ErrorCode::InvalidMock,
                           "scripted mock needs a nonempty multiset");
    }
    ProviderEndpoint endpoint;
    endpoint.kind = ProviderKind::mock_stochastic;
    endpoint.name = "mock-scripted";
    endpoint.model_id = "mock-scripted";
    endpoint.mock = std::make_shared<MockState>();
    endpoint.mock->mode = MockMode::scripted;
    Xorshift64Star rng(seed);
    rng.shuffle(schedule);
    endpoint.mock->schedule = std::move(schedule);
    return endpoint;
}

ProviderEndpoint make_replay_mock(
    const std::map<std::string, std::string>& responses) {
    ProviderEndpoint endpoint;
    endpoint.kind = ProviderKind::mock_replay;
    endpoint.name = "mock-replay";
    endpoint.model_id = "mock-replay";
    endpoint.mock = std::make_shared<MockState>();
    endpoint.mock->mode = MockMode::replay;
    endpoint.mock->responses = responses;
    return endpoint;
}

}  // namespace findrift
