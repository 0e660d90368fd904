#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include "litmeta/llm.hpp"
#include "litmeta/llm_http.hpp"
#include "litmeta/prompts.hpp"

using namespace litmeta;
using namespace litmeta::llm;

namespace {

LlmConfig test_config(int retries = 3, int parallel = 4) {
    LlmConfig cfg;
    cfg.model_name = "test-model";
    cfg.max_retries = retries;
    cfg.max_parallel_requests = parallel;
    return cfg;
}

GatewayOptions quiet_options() {
    GatewayOptions options;
    options.sleeper = [](std::chrono::milliseconds) {};
    options.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    return options;
}

LlmRequest request_for(const std::string& text, const std::string& prompt_key = "relevance") {
    LlmRequest req;
    req.record_id = "rec-1";
    req.prompt_id = PromptId::Relevance;
    req.prompt_key = prompt_key;
    req.content_hash = fnv1a64(text);
    req.input_text = text;
    return req;
}

}  // namespace

TEST_CASE("relevance prompt matches the published text") {
    const std::string& p = relevance_prompt();
    CHECK(p.ends_with("Please just answer Yes or No."));
    CHECK(to_lower(p).find("precipitation includes rainfall and snowfall") != std::string::npos);
    CHECK(relevance_prompt() == relevance_prompt());
}

TEST_CASE("extraction prompt carries eight numbered questions") {
    const std::string& p = extraction_prompt();
    for (int q = 1; q <= 8; ++q) {
        std::string marker = "\n" + std::to_string(q) + ". ";
        INFO("question " << q);
        CHECK(p.find(marker) != std::string::npos);
    }
    CHECK(p.find("9. ") == std::string::npos);
    CHECK(extraction_question(7).find("list the values and units one by one") != std::string::npos);
    CHECK(extraction_prompt() == extraction_prompt());
}

TEST_CASE("geocode prompt interpolates the domain and labels four directions") {
    std::string p = geocode_prompt("Sichuan Basin");
    CHECK(p.find("Sichuan Basin") != std::string::npos);
    for (const char* label : {"north", "south", "west", "east"}) {
        CHECK(to_lower(p).find(label) != std::string::npos);
    }
    CHECK_THROWS_MATCHES(geocode_prompt(""), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("EmptyDomainName")));
    CHECK(geocode_prompt("central United States") == geocode_prompt("central United States"));
}

TEST_CASE("gateway returns mock responses") {
    auto mock = std::make_shared<MockBackend>();
    mock->add_text("abstract one", "relevance", "Yes");
    Gateway gateway(test_config(), mock, quiet_options());
    CHECK(gateway.complete(request_for("abstract one")) == "Yes");
}

TEST_CASE("second identical call hits the cache without a backend attempt") {
    auto mock = std::make_shared<MockBackend>();
    mock->add_text("abstract one", "relevance", "Yes");
    Gateway gateway(test_config(), mock, quiet_options());

    CHECK(gateway.complete(request_for("abstract one")) == "Yes");
    CHECK(mock->calls() == 1);
    CHECK(gateway.complete(request_for("abstract one")) == "Yes");
    CHECK(mock->calls() == 1);

    auto log = gateway.audit().snapshot();
    REQUIRE(log.size() == 2);
    CHECK(log[0].attempt == 1);
    CHECK_FALSE(log[0].cache_hit);
    CHECK(log[1].attempt == 0);
    CHECK(log[1].cache_hit);
    CHECK(log[1].response_text == log[0].response_text);
}

TEST_CASE("transient failures retry with every attempt audited") {
    auto mock = std::make_shared<MockBackend>();
    mock->add(fnv1a64("abstract one"), "relevance", "Yes", /*transient_failures=*/2);
    Gateway gateway(test_config(3), mock, quiet_options());

    CHECK(gateway.complete(request_for("abstract one")) == "Yes");
    auto log = gateway.audit().snapshot();
    REQUIRE(log.size() == 3);
    CHECK(log[0].attempt == 1);
    CHECK(log[1].attempt == 2);
    CHECK(log[2].attempt == 3);
    CHECK(log[2].response_text == "Yes");
}

TEST_CASE("retries exhausted raises BackendUnavailable") {
    auto mock = std::make_shared<MockBackend>();
    mock->add(fnv1a64("abstract one"), "relevance", "Yes", /*transient_failures=*/10);
    Gateway gateway(test_config(2), mock, quiet_options());
    CHECK_THROWS_MATCHES(gateway.complete(request_for("abstract one")), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("BackendUnavailable")));
    CHECK(gateway.audit().snapshot().size() == 3);  // 1 + 2 retries
}

TEST_CASE("missing mock entries fail without retry") {
    auto mock = std::make_shared<MockBackend>();
    Gateway gateway(test_config(3), mock, quiet_options());
    CHECK_THROWS_AS(gateway.complete(request_for("unknown")), Error);
    CHECK(mock->calls() == 1);
}

TEST_CASE("cache persists across gateway instances") {
    auto dir = std::filesystem::temp_directory_path() /
               ("litmeta-llm-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    auto options = quiet_options();
    options.cache_path = dir / "cache.jsonl";

    {
        auto mock = std::make_shared<MockBackend>();
        mock->add_text("abstract one", "relevance", "Yes");
        Gateway gateway(test_config(), mock, options);
        CHECK(gateway.complete(request_for("abstract one")) == "Yes");
    }
    {
        auto empty_mock = std::make_shared<MockBackend>();  // would miss
        Gateway gateway(test_config(), empty_mock, options);
        CHECK(gateway.complete(request_for("abstract one")) == "Yes");
        CHECK(empty_mock->calls() == 0);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("cache keys include prompt, model and temperature") {
    auto mock = std::make_shared<MockBackend>();
    mock->add_text("ctx", "relevance", "Yes");
    mock->add_text("ctx", "extraction", "1. ...");
    Gateway gateway(test_config(), mock, quiet_options());

    CHECK(gateway.complete(request_for("ctx", "relevance")) == "Yes");
    auto req = request_for("ctx", "extraction");
    req.prompt_id = PromptId::Extraction;
    CHECK(gateway.complete(req) == "1. ...");
    CHECK(mock->calls() == 2);
}

TEST_CASE("parallel in-flight requests never exceed the configured bound") {
    auto mock = std::make_shared<MockBackend>();
    for (int i = 0; i < 24; ++i) {
        mock->add_text("abstract " + std::to_string(i), "relevance", "Yes");
    }
    mock->set_latency(std::chrono::milliseconds(5));
    Gateway gateway(test_config(0, /*parallel=*/3), mock, quiet_options());

    std::vector<std::thread> threads;
    for (int i = 0; i < 24; ++i) {
        threads.emplace_back([&gateway, i] {
            gateway.complete(request_for("abstract " + std::to_string(i)));
        });
    }
    for (auto& t : threads) t.join();
    CHECK(mock->peak_in_flight() <= 3);
    CHECK(gateway.audit().snapshot().size() == 24);
}

TEST_CASE("mock backend loads table files with text or hash keys") {
    auto dir = std::filesystem::temp_directory_path() /
               ("litmeta-mock-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    nlohmann::json table = nlohmann::json::array();
    table.push_back({{"content_text", "an abstract"}, {"prompt_id", "relevance"},
                     {"response", "Yes"}});
    table.push_back({{"content_hash", std::to_string(fnv1a64("other"))},
                     {"prompt_id", "relevance"},
                     {"response", "No"}});
    atomic_write_file(dir / "mock.json", table.dump());

    auto mock = MockBackend::from_file(dir / "mock.json");
    Gateway gateway(test_config(), mock, quiet_options());
    CHECK(gateway.complete(request_for("an abstract")) == "Yes");
    CHECK(gateway.complete(request_for("other")) == "No");
    std::filesystem::remove_all(dir);
}

TEST_CASE("http backend speaks the chat-completion schema") {
    httplib::Server server;
    std::string seen_body, seen_auth;
    std::atomic<int> failures{1};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    seen_auth = req.get_header_value("Authorization");
                    seen_body = req.body;
                    if (failures.fetch_sub(1) > 0) {
                        res.status = 500;
                        return;
                    }
                    nlohmann::json reply = {
                        {"choices",
                         nlohmann::json::array(
                             {{{"message", {{"role", "assistant"}, {"content", "Yes"}}}}})}};
                    res.set_content(reply.dump(), "application/json");
                });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("LITMETA_TEST_KEY", "sekret", 1);
    LlmConfig cfg = test_config(3);
    cfg.api_key_env_var = "LITMETA_TEST_KEY";
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.temperature = 0.12;

    auto backend = std::make_shared<HttpBackend>(cfg.endpoint_url);
    Gateway gateway(cfg, backend, quiet_options());
    CHECK(gateway.complete(request_for("abstract text")) == "Yes");

    CHECK(seen_auth == "Bearer sekret");
    auto body = nlohmann::json::parse(seen_body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature").get<double>() == Catch::Approx(0.12));
    REQUIRE(body.at("messages").size() == 1);
    CHECK(body.at("messages")[0].at("role") == "user");
    CHECK(body.at("messages")[0].at("content") == "abstract text");

    // retried once through the scripted 500
    CHECK(gateway.audit().snapshot().size() == 2);

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend maps auth errors to AuthError") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    LlmConfig cfg = test_config(3);
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    Gateway gateway(cfg, std::make_shared<HttpBackend>(cfg.endpoint_url), quiet_options());
    CHECK_THROWS_MATCHES(gateway.complete(request_for("abstract")), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("AuthError")));
    CHECK(gateway.audit().snapshot().size() == 1);  // non-retryable

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend maps context-limit replies to BudgetExceeded") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content(R"({"error":{"code":"context_length_exceeded"}})", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    LlmConfig cfg = test_config(3);
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    Gateway gateway(cfg, std::make_shared<HttpBackend>(cfg.endpoint_url), quiet_options());
    CHECK_THROWS_MATCHES(gateway.complete(request_for("huge context")), Error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("BudgetExceeded")));

    server.stop();
    server_thread.join();
}

TEST_CASE("default temperature is the published 0.12 and bounds are enforced") {
    LlmConfig cfg;
    CHECK(cfg.temperature == Catch::Approx(0.12));
    cfg.temperature = 2.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.temperature = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
