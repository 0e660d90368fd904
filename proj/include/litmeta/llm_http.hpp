#pragma once

// Live chat-completion backend speaking the OpenAI-compatible HTTP schema.
// Split from llm.hpp so binaries that only need the mock backend do not
// pull in the HTTP client.

#include <cstdlib>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <string>

#include "litmeta/llm.hpp"

namespace litmeta::llm {

class HttpBackend : public ChatBackend {
public:
    // endpoint_url example: http://127.0.0.1:8080/v1/chat/completions
    explicit HttpBackend(std::string endpoint_url) { parse_endpoint(std::move(endpoint_url)); }

    BackendReply complete(const LlmConfig& config, const LlmRequest& request) override {
        httplib::Client client(base_);
        client.set_read_timeout(120, 0);
        client.set_connection_timeout(10, 0);

        httplib::Headers headers;
        if (!config.api_key_env_var.empty()) {
            if (const char* key = std::getenv(config.api_key_env_var.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }

        nlohmann::json body;
        body["model"] = config.model_name;
        body["temperature"] = config.temperature;
        body["max_tokens"] = config.max_output_tokens;
        body["messages"] = nlohmann::json::array({
            nlohmann::json{{"role", "user"}, {"content", request.input_text}},
        });

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            return {BackendStatus::Transient,
                    "transport error: " + httplib::to_string(res.error())};
        }
        if (res->status == 401 || res->status == 403) {
            return {BackendStatus::Auth, "HTTP " + std::to_string(res->status)};
        }
        if (res->status == 413 || body_mentions_context_limit(res->body)) {
            return {BackendStatus::Budget, "HTTP " + std::to_string(res->status) + ": " + res->body};
        }
        if (res->status == 429 || res->status >= 500) {
            return {BackendStatus::Transient, "HTTP " + std::to_string(res->status)};
        }
        if (res->status != 200) {
            return {BackendStatus::Transient, "HTTP " + std::to_string(res->status) + ": " + res->body};
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            return {BackendStatus::Ok,
                    j.at("choices").at(0).at("message").at("content").get<std::string>()};
        } catch (const std::exception& e) {
            return {BackendStatus::Transient, std::string("bad response body: ") + e.what()};
        }
    }

private:
    static bool body_mentions_context_limit(const std::string& body) {
        return body.find("context_length_exceeded") != std::string::npos ||
               body.find("maximum context length") != std::string::npos;
    }

    void parse_endpoint(std::string url) {
        size_t scheme = url.find("://");
        size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
        if (path_start == std::string::npos) {
            base_ = url;
            path_ = "/";
        } else {
            base_ = url.substr(0, path_start);
            path_ = url.substr(path_start);
        }
    }

    std::string base_;
    std::string path_;
};

}  // namespace litmeta::llm
