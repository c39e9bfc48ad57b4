#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "findrift/error.hpp"
#include "findrift/hash.hpp"
#include "findrift/prng.hpp"
#include "findrift/provider.hpp"

using namespace findrift;

namespace {

ErrorCode thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const HarnessError& err) {
        return err.code();
    }
    FAIL("expected a HarnessError");
    return ErrorCode::ConfigError;
}

std::string thrown_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const HarnessError& err) {
        return err.what();
    }
    FAIL("expected a HarnessError");
    return "";
}

DecodingConfig greedy_config(std::int64_t seed = 42) {
    DecodingConfig config;
    config.temperature = 0.0;
    config.top_p = 1.0;
    config.seed = seed;
    config.max_new_tokens = 512;
    config.decoding_method = DecodingMethod::greedy;
    return config;
}

DecodingConfig sampling_config() {
    DecodingConfig config;
    config.temperature = 0.2;
    config.top_p = 1.0;
    config.seed = 42;
    config.max_new_tokens = 256;
    config.decoding_method = DecodingMethod::sample;
    return config;
}

// In-process HTTP server bound to an ephemeral localhost port. Handlers run
// on the server thread, so they only copy request data into plain members;
// all assertions happen on the test thread after the client call returns.
struct WireServer {
    httplib::Server server;
    std::thread thread;
    std::string base_url;

    std::string seen_body;
    std::string seen_authorization;
    bool seen_authorization_header = false;
    std::string seen_version_param;
    bool seen_version_param_present = false;

    void start() {
        int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        base_url = "http://127.0.0.1:" + std::to_string(port);
    }

    void capture(const httplib::Request& req) {
        seen_body = req.body;
        seen_authorization_header = req.has_header("Authorization");
        seen_authorization = req.get_header_value("Authorization");
        seen_version_param_present = req.has_param("version");
        seen_version_param = req.get_param_value("version");
    }

    ~WireServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
};

ProviderEndpoint network_endpoint(ProviderKind kind, const std::string& url) {
    ProviderEndpoint endpoint;
    endpoint.kind = kind;
    endpoint.name = "wire-test";
    endpoint.base_url = url;
    endpoint.model_id = "test-model";
    endpoint.timeout_ms = 5000;
    return endpoint;
}

}  // namespace

TEST_CASE("decoding config accepts the pinned protocol settings") {
    CHECK_NOTHROW(greedy_config().validate());
    CHECK_NOTHROW(sampling_config().validate());

    DecodingConfig hot = sampling_config();
    hot.temperature = 1.0;  // inclusive upper bound
    CHECK_NOTHROW(hot.validate());

    DecodingConfig tiny = greedy_config();
    tiny.max_new_tokens = 1;
    CHECK_NOTHROW(tiny.validate());
}

TEST_CASE("decoding config rejects out-of-range and inconsistent settings") {
    DecodingConfig below = greedy_config();
    below.temperature = -0.001;
    CHECK(thrown_code([&] { below.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);

    DecodingConfig above = sampling_config();
    above.temperature = 1.001;
    CHECK(thrown_code([&] { above.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);

    // temperature 0 with sampling is contradictory, as is a positive
    // temperature with greedy decoding.
    DecodingConfig cold_sample = greedy_config();
    cold_sample.decoding_method = DecodingMethod::sample;
    CHECK(thrown_code([&] { cold_sample.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);

    DecodingConfig warm_greedy = sampling_config();
    warm_greedy.decoding_method = DecodingMethod::greedy;
    CHECK(thrown_code([&] { warm_greedy.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);

    DecodingConfig no_tokens = greedy_config();
    no_tokens.max_new_tokens = 0;
    CHECK(thrown_code([&] { no_tokens.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);
    no_tokens.max_new_tokens = -8;
    CHECK(thrown_code([&] { no_tokens.validate(); }) ==
          ErrorCode::InvalidDecodingConfig);
}

TEST_CASE("provider kind names round-trip and unknown names are rejected") {
    for (ProviderKind kind :
         {ProviderKind::ollama_compatible, ProviderKind::watsonx_style,
          ProviderKind::mock_replay, ProviderKind::mock_stochastic}) {
        auto parsed = parse_provider_kind(provider_kind_name(kind));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == kind);
    }
    CHECK(provider_kind_name(ProviderKind::ollama_compatible) ==
          "ollama_compatible");
    CHECK(provider_kind_name(ProviderKind::watsonx_style) == "watsonx_style");
    CHECK_FALSE(parse_provider_kind("openai").has_value());
    CHECK_FALSE(parse_provider_kind("").has_value());
    CHECK_FALSE(parse_provider_kind("Mock_Replay").has_value());
}

TEST_CASE("replay keys join the prompt hash and decimal seed with a pipe") {
    CHECK(replay_key("abc123", 42) == "abc123|42");
    CHECK(replay_key("abc123", 0) == "abc123|0");
    CHECK(replay_key("ff", -7) == "ff|-7");
    CHECK(replay_key(sha256_hex("hello"), 7) == sha256_hex("hello") + "|7");
}

TEST_CASE("local-style payload carries exactly the documented fields") {
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, "http://unused");
    endpoint.model_id = "llama3.1:8b";
    DecodingConfig config = sampling_config();
    config.top_p = 0.9;
    config.seed = 7;
    config.max_new_tokens = 64;
    config.stop = {"###"};

    nlohmann::json payload = build_ollama_payload(endpoint, "say hi", config);
    nlohmann::json expected = {
        {"model", "llama3.1:8b"},
        {"prompt", "say hi"},
        {"options",
         {{"temperature", 0.2},
          {"top_p", 0.9},
          {"seed", 7},
          {"num_predict", 64},
          {"stop", nlohmann::json::array({"###"})}}},
    };
    CHECK(payload == expected);
    CHECK(payload.size() == 3);
    CHECK(payload["options"].size() == 5);
}

TEST_CASE("cloud-style payload carries the documented fields and optional "
          "project scope") {
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::watsonx_style, "http://unused");
    endpoint.model_id = "granite-13b";
    DecodingConfig config = greedy_config(11);
    config.max_new_tokens = 128;

    nlohmann::json payload = build_watsonx_payload(endpoint, "the input", config);
    nlohmann::json expected_parameters = {
        {"decoding_method", "greedy"},
        {"temperature", 0.0},
        {"top_p", 1.0},
        {"random_seed", 11},
        {"max_new_tokens", 128},
        {"return_options", {{"input_text", false}}},
    };
    CHECK(payload["model_id"] == "granite-13b");
    CHECK(payload["input"] == "the input");
    CHECK(payload["parameters"] == expected_parameters);
    CHECK_FALSE(payload.contains("project_id"));
    CHECK(payload.size() == 3);

    endpoint.project_id = "proj-1";
    nlohmann::json scoped = build_watsonx_payload(endpoint, "the input", config);
    CHECK(scoped["project_id"] == "proj-1");
    CHECK(scoped.size() == 4);

    nlohmann::json sampled =
        build_watsonx_payload(endpoint, "x", sampling_config());
    CHECK(sampled["parameters"]["decoding_method"] == "sample");
}

TEST_CASE("decoding settings survive a JSON round trip") {
    DecodingConfig config = sampling_config();
    config.top_p = 0.95;
    config.seed = -3;
    config.stop = {"\n\n", "END"};

    DecodingConfig back = decoding_from_json(decoding_to_json(config));
    CHECK(back.temperature == config.temperature);
    CHECK(back.top_p == config.top_p);
    CHECK(back.seed == config.seed);
    CHECK(back.max_new_tokens == config.max_new_tokens);
    CHECK(back.stop == config.stop);
    CHECK(back.decoding_method == DecodingMethod::sample);

    DecodingConfig back_greedy = decoding_from_json(decoding_to_json(greedy_config()));
    CHECK(back_greedy.decoding_method == DecodingMethod::greedy);
    CHECK(back_greedy.stop.empty());

    nlohmann::json j = decoding_to_json(config);
    CHECK(j.size() == 6);
    CHECK(j["decoding_method"] == "sample");
}

TEST_CASE("scripted mock serves the exact multiset in a seed-fixed order and "
          "cycles") {
    const std::uint64_t seed = 2024;
    ProviderEndpoint endpoint =
        make_scripted_mock({{"alpha", 9}, {"beta", 7}}, seed);
    DecodingConfig config = greedy_config();

    // Independent expectation: expand the multiset in declaration order and
    // apply the published shuffle with the same seed.
    std::vector<std::string> expected;
    for (int i = 0; i < 9; ++i) expected.push_back("alpha");
    for (int i = 0; i < 7; ++i) expected.push_back("beta");
    Xorshift64Star rng(seed);
    rng.shuffle(expected);

    std::vector<std::string> served;
    for (int i = 0; i < 16; ++i) {
        GenerationResult result = generate(endpoint, "prompt", config);
        served.push_back(result.text);
        CHECK(result.provider_meta.at("mock") == "stochastic");
        CHECK_FALSE(result.input_tokens.has_value());
        CHECK_FALSE(result.generated_tokens.has_value());
        CHECK(result.latency_ms >= 0.0);
    }
    CHECK(served == expected);

    std::size_t alphas = 0;
    for (const auto& text : served) alphas += text == "alpha" ? 1 : 0;
    CHECK(alphas == 9);

    // Past the schedule length the mock cycles from the start.
    CHECK(generate(endpoint, "prompt", config).text == expected[0]);
    CHECK(generate(endpoint, "prompt", config).text == expected[1]);

    // A second endpoint with the same seed replays the identical order.
    ProviderEndpoint again = make_scripted_mock({{"alpha", 9}, {"beta", 7}}, seed);
    for (int i = 0; i < 16; ++i) {
        CHECK(generate(again, "prompt", config).text == served[i]);
    }
}

TEST_CASE("weighted mock draws follow the seeded generator") {
    const std::uint64_t seed = 77;
    const std::vector<std::pair<std::string, double>> variants = {
        {"A", 3.0}, {"B", 1.0}};
    ProviderEndpoint endpoint = make_stochastic_mock(variants, seed);
    DecodingConfig config = greedy_config();

    // Independent expectation: one uniform draw per call mapped through the
    // cumulative weights.
    Xorshift64Star rng(seed);
    std::vector<std::string> expected;
    for (int i = 0; i < 200; ++i) {
        double u = rng.u01();
        expected.push_back(u < 0.75 ? "A" : "B");
    }

    std::vector<std::string> served;
    for (int i = 0; i < 200; ++i) {
        served.push_back(generate(endpoint, "p", config).text);
    }
    CHECK(served == expected);

    // Sanity: the weighted draw is not degenerate.
    std::size_t a_count = 0;
    for (const auto& text : served) a_count += text == "A" ? 1 : 0;
    CHECK(a_count > 120);
    CHECK(a_count < 180);

    ProviderEndpoint twin = make_stochastic_mock(variants, seed);
    for (int i = 0; i < 50; ++i) {
        CHECK(generate(twin, "p", config).text == served[i]);
    }

    ProviderEndpoint lone = make_stochastic_mock({{"only", 2.5}}, 9);
    for (int i = 0; i < 5; ++i) {
        CHECK(generate(lone, "p", config).text == "only");
    }
}

TEST_CASE("mock construction rejects empty or non-positive inputs") {
    CHECK(thrown_code([] { make_stochastic_mock({}, 1); }) ==
          ErrorCode::InvalidMock);
    CHECK(thrown_code([] { make_stochastic_mock({{"a", 0.0}}, 1); }) ==
          ErrorCode::InvalidMock);
    CHECK(thrown_code([] { make_stochastic_mock({{"a", 1.0}, {"b", -2.0}}, 1); }) ==
          ErrorCode::InvalidMock);
    CHECK(thrown_code([] { make_scripted_mock({}, 1); }) ==
          ErrorCode::InvalidMock);
    CHECK(thrown_code([] { make_scripted_mock({{"a", 0}}, 1); }) ==
          ErrorCode::InvalidMock);
}

TEST_CASE("replay mock returns stored responses and rejects unknown keys") {
    std::map<std::string, std::string> responses = {
        {replay_key(sha256_hex("hello"), 42), "world"},
        {replay_key(sha256_hex("hello"), 7), "other"},
    };
    ProviderEndpoint endpoint = make_replay_mock(responses);

    GenerationResult result = generate(endpoint, "hello", greedy_config(42));
    CHECK(result.text == "world");
    CHECK(result.provider_meta.at("mock") == "replay");
    CHECK_FALSE(result.input_tokens.has_value());
    CHECK_FALSE(result.generated_tokens.has_value());

    CHECK(generate(endpoint, "hello", greedy_config(7)).text == "other");

    // A seed or prompt outside the table is a rejection, like a 404.
    CHECK(thrown_code([&] { generate(endpoint, "hello", greedy_config(43)); }) ==
          ErrorCode::ProviderRejected);
    CHECK(thrown_code([&] { generate(endpoint, "goodbye", greedy_config(42)); }) ==
          ErrorCode::ProviderRejected);
    std::string message = thrown_message(
        [&] { generate(endpoint, "goodbye", greedy_config(42)); });
    CHECK(message.find("no response for key") != std::string::npos);
}

TEST_CASE("generation rejects empty prompts, invalid decoding, and missing "
          "mock state") {
    ProviderEndpoint endpoint = make_replay_mock(
        {{replay_key(sha256_hex("p"), 42), "r"}});
    CHECK(thrown_code([&] { generate(endpoint, "", greedy_config()); }) ==
          ErrorCode::ConfigError);

    DecodingConfig bad = greedy_config();
    bad.temperature = 2.0;
    CHECK(thrown_code([&] { generate(endpoint, "p", bad); }) ==
          ErrorCode::InvalidDecodingConfig);

    ProviderEndpoint hollow;
    hollow.kind = ProviderKind::mock_replay;
    hollow.mock = nullptr;
    CHECK(thrown_code([&] { generate(hollow, "p", greedy_config()); }) ==
          ErrorCode::InvalidMock);
}

TEST_CASE("scripted mock conserves the multiset under concurrent calls") {
    ProviderEndpoint endpoint =
        make_scripted_mock({{"alpha", 9}, {"beta", 7}}, 5);
    DecodingConfig config = greedy_config();

    // 4 threads x 8 calls = two full passes over the 16-slot schedule, so the
    // combined multiset must hold exactly twice each count regardless of
    // interleaving.
    constexpr int kThreads = 4;
    constexpr int kCallsPerThread = 8;
    std::vector<std::vector<std::string>> results(kThreads);
    std::vector<std::thread> workers;
    for (int t = 0; t < kThreads; ++t) {
        workers.emplace_back([&, t] {
            for (int i = 0; i < kCallsPerThread; ++i) {
                results[t].push_back(generate(endpoint, "p", config).text);
            }
        });
    }
    for (auto& worker : workers) worker.join();

    std::size_t alphas = 0;
    std::size_t betas = 0;
    for (const auto& chunk : results) {
        for (const auto& text : chunk) {
            if (text == "alpha") ++alphas;
            if (text == "beta") ++betas;
        }
    }
    CHECK(alphas == 18);
    CHECK(betas == 14);
}

TEST_CASE("local-style wire call parses a single-object response and sends "
          "the bearer credential") {
    WireServer wire;
    wire.server.Post("/api/generate",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         wire.capture(req);
                         res.set_content(
                             "{\"response\":\"out\",\"prompt_eval_count\":12,"
                             "\"eval_count\":34}",
                             "application/json");
                     });
    wire.start();

    ::setenv("FINDRIFT_TEST_CREDENTIAL", "s3cret-token", 1);
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, wire.base_url);
    endpoint.credential_ref = "FINDRIFT_TEST_CREDENTIAL";
    DecodingConfig config = greedy_config(9);

    GenerationResult result = generate(endpoint, "say hi", config);
    CHECK(result.text == "out");
    REQUIRE(result.input_tokens.has_value());
    CHECK(*result.input_tokens == 12);
    REQUIRE(result.generated_tokens.has_value());
    CHECK(*result.generated_tokens == 34);
    CHECK(result.provider_meta.at("http_status") == "200");
    CHECK(result.latency_ms > 0.0);

    CHECK(wire.seen_authorization == "Bearer s3cret-token");
    nlohmann::json seen = nlohmann::json::parse(wire.seen_body);
    CHECK(seen == build_ollama_payload(endpoint, "say hi", config));
    ::unsetenv("FINDRIFT_TEST_CREDENTIAL");
}

TEST_CASE("local-style wire call absorbs line-delimited chunked responses") {
    WireServer wire;
    wire.server.Post("/api/generate",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         wire.capture(req);
                         res.set_content(
                             "{\"response\":\"Hel\"}\n"
                             "{\"response\":\"lo\",\"prompt_eval_count\":3,"
                             "\"eval_count\":5,\"done\":true}\n",
                             "application/x-ndjson");
                     });
    wire.start();

    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, wire.base_url);
    GenerationResult result = generate(endpoint, "say hi", greedy_config());
    CHECK(result.text == "Hello");
    REQUIRE(result.input_tokens.has_value());
    CHECK(*result.input_tokens == 3);
    REQUIRE(result.generated_tokens.has_value());
    CHECK(*result.generated_tokens == 5);

    // Without a credential reference no Authorization header is sent.
    CHECK_FALSE(wire.seen_authorization_header);
}

TEST_CASE("cloud-style wire call sends the version query, scoped payload, "
          "and bearer credential") {
    WireServer wire;
    wire.server.Post("/ml/v1/text/generation",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         wire.capture(req);
                         res.set_content(
                             "{\"results\":[{\"generated_text\":\"answer\","
                             "\"generated_token_count\":7,"
                             "\"input_token_count\":21}]}",
                             "application/json");
                     });
    wire.start();

    ::setenv("FINDRIFT_TEST_CLOUD_KEY", "cloud-secret", 1);
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::watsonx_style, wire.base_url);
    endpoint.api_version = "2024-05-01";
    endpoint.project_id = "proj-9";
    endpoint.credential_ref = "FINDRIFT_TEST_CLOUD_KEY";
    DecodingConfig config = sampling_config();

    GenerationResult result = generate(endpoint, "the input", config);
    CHECK(result.text == "answer");
    REQUIRE(result.generated_tokens.has_value());
    CHECK(*result.generated_tokens == 7);
    REQUIRE(result.input_tokens.has_value());
    CHECK(*result.input_tokens == 21);
    CHECK(result.provider_meta.at("http_status") == "200");

    CHECK(wire.seen_version_param_present);
    CHECK(wire.seen_version_param == "2024-05-01");
    CHECK(wire.seen_authorization == "Bearer cloud-secret");
    nlohmann::json seen = nlohmann::json::parse(wire.seen_body);
    CHECK(seen == build_watsonx_payload(endpoint, "the input", config));
    CHECK(seen["project_id"] == "proj-9");
    ::unsetenv("FINDRIFT_TEST_CLOUD_KEY");
}

TEST_CASE("cloud-style wire call omits the version query when unset") {
    WireServer wire;
    wire.server.Post("/ml/v1/text/generation",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         wire.capture(req);
                         res.set_content(
                             "{\"results\":[{\"generated_text\":\"ok\"}]}",
                             "application/json");
                     });
    wire.start();

    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::watsonx_style, wire.base_url);
    GenerationResult result = generate(endpoint, "q", greedy_config());
    CHECK(result.text == "ok");
    CHECK_FALSE(wire.seen_version_param_present);
    // Token counts missing from the response stay unset rather than zero.
    CHECK_FALSE(result.input_tokens.has_value());
    CHECK_FALSE(result.generated_tokens.has_value());
}

TEST_CASE("non-2xx responses surface as provider rejections with the status") {
    WireServer wire;
    wire.server.Post("/api/generate",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.status = 404;
                         res.set_content("no such model", "text/plain");
                     });
    wire.start();

    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, wire.base_url);
    CHECK(thrown_code([&] { generate(endpoint, "p", greedy_config()); }) ==
          ErrorCode::ProviderRejected);
    std::string message =
        thrown_message([&] { generate(endpoint, "p", greedy_config()); });
    CHECK(message.find("404") != std::string::npos);
    CHECK(message.find("no such model") != std::string::npos);
}

TEST_CASE("malformed cloud-style bodies surface as provider rejections") {
    WireServer wire;
    int variant = 0;
    wire.server.Post("/ml/v1/text/generation",
                     [&](const httplib::Request&, httplib::Response& res) {
                         static const char* bodies[] = {
                             "{\"results\":[]}",
                             "{\"nope\":1}",
                             "not json at all",
                         };
                         res.set_content(bodies[variant], "application/json");
                     });
    wire.start();

    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::watsonx_style, wire.base_url);
    for (variant = 0; variant < 3; ++variant) {
        CHECK(thrown_code([&] { generate(endpoint, "p", greedy_config()); }) ==
              ErrorCode::ProviderRejected);
    }
    variant = 0;
    std::string message =
        thrown_message([&] { generate(endpoint, "p", greedy_config()); });
    CHECK(message.find("malformed generation response") != std::string::npos);
}

TEST_CASE("missing credential environment variable fails before any request") {
    ::unsetenv("FINDRIFT_TEST_ABSENT_CREDENTIAL");
    // Deliberately unreachable base_url: resolution must fail first.
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, "http://127.0.0.1:1");
    endpoint.credential_ref = "FINDRIFT_TEST_ABSENT_CREDENTIAL";
    CHECK(thrown_code([&] { generate(endpoint, "p", greedy_config()); }) ==
          ErrorCode::ConfigError);
    std::string message =
        thrown_message([&] { generate(endpoint, "p", greedy_config()); });
    CHECK(message.find("FINDRIFT_TEST_ABSENT_CREDENTIAL") != std::string::npos);

    // An empty value is treated the same as an unset variable.
    ::setenv("FINDRIFT_TEST_ABSENT_CREDENTIAL", "", 1);
    CHECK(thrown_code([&] { generate(endpoint, "p", greedy_config()); }) ==
          ErrorCode::ConfigError);
    ::unsetenv("FINDRIFT_TEST_ABSENT_CREDENTIAL");
}

TEST_CASE("unreachable endpoints surface as transport failures") {
    // Port 1 on loopback refuses connections immediately.
    ProviderEndpoint endpoint =
        network_endpoint(ProviderKind::ollama_compatible, "http://127.0.0.1:1");
    endpoint.timeout_ms = 2000;
    CHECK(thrown_code([&] { generate(endpoint, "p", greedy_config()); }) ==
          ErrorCode::ProviderUnreachable);
}

TEST_CASE("environment manifest pins the harness version and hashes the "
          "config") {
    CHECK(std::string(kHarnessVersion) == "1.0.0");

    ProviderEndpoint endpoint = make_replay_mock({});
    endpoint.api_version = "v-test";
    EnvironmentManifest manifest =
        capture_manifest(endpoint, "corpus-v1", "{\"full\":\"config\"}");

    CHECK(manifest.harness_version == "1.0.0");
    CHECK(manifest.provider_api_version == "v-test");
    CHECK(manifest.model_digest == "mock:mock_replay");
    CHECK(manifest.corpus_version_id == "corpus-v1");
    CHECK(manifest.config_hash == sha256_hex("{\"full\":\"config\"}"));
    CHECK_FALSE(manifest.os_name_version.empty());
    CHECK(manifest.os_name_version != "unknown");

    // created_at is ISO-8601 UTC with millisecond precision.
    REQUIRE(manifest.created_at.size() == 24);
    CHECK(manifest.created_at[10] == 'T');
    CHECK(manifest.created_at.back() == 'Z');

    ProviderEndpoint stochastic = make_stochastic_mock({{"x", 1.0}}, 1);
    CHECK(capture_manifest(stochastic, "c", "f").model_digest ==
          "mock:mock_stochastic");

    // Network endpoints have no portable digest; the gap stays explicit.
    ProviderEndpoint network =
        network_endpoint(ProviderKind::ollama_compatible, "http://unused");
    CHECK(capture_manifest(network, "c", "f").model_digest == "unknown");
}

TEST_CASE("environment manifest survives a JSON round trip") {
    EnvironmentManifest manifest;
    manifest.harness_version = "1.0.0";
    manifest.os_name_version = "Linux 6.0";
    manifest.provider_api_version = "2024-05-01";
    manifest.model_digest = "sha256:abc";
    manifest.corpus_version_id = "fin10k-2024-v1";
    manifest.config_hash = sha256_hex("cfg");
    manifest.created_at = "2026-08-25T00:00:00.000Z";

    nlohmann::json j = manifest.to_json();
    CHECK(j.size() == 7);
    EnvironmentManifest back = EnvironmentManifest::from_json(j);
    CHECK(back.harness_version == manifest.harness_version);
    CHECK(back.os_name_version == manifest.os_name_version);
    CHECK(back.provider_api_version == manifest.provider_api_version);
    CHECK(back.model_digest == manifest.model_digest);
    CHECK(back.corpus_version_id == manifest.corpus_version_id);
    CHECK(back.config_hash == manifest.config_hash);
    CHECK(back.created_at == manifest.created_at);
}
