#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/prompts.hpp"

namespace litmeta::llm {

struct LlmConfig {
    std::string model_name = "gpt-4-turbo";
    double temperature = 0.12;
    int max_output_tokens = 1024;
    std::string endpoint_url;
    std::string api_key_env_var = "LLM_API_KEY";
    int max_parallel_requests = 4;
    int max_retries = 3;

    void validate() const {
        if (temperature < 0.0 || temperature > 2.0) {
            throw Error("ConfigInvalid", "temperature must be within [0, 2]");
        }
        if (max_output_tokens <= 0) throw Error("ConfigInvalid", "max_output_tokens must be positive");
        if (max_parallel_requests <= 0)
            throw Error("ConfigInvalid", "max_parallel_requests must be positive");
        if (max_retries < 0) throw Error("ConfigInvalid", "max_retries must be non-negative");
    }
};

enum class PromptId { Relevance, Extraction, Geocode };

inline std::string to_string(PromptId id) {
    switch (id) {
        case PromptId::Relevance: return "relevance";
        case PromptId::Extraction: return "extraction";
        case PromptId::Geocode: return "geocode";
    }
    return "relevance";
}

// One prompt/response round trip, including retries and cache hits
// (cache hits are logged with attempt = 0).
struct LlmExchange {
    std::string record_id;
    PromptId prompt_id = PromptId::Relevance;
    std::string request_text;
    std::string response_text;
    std::string timestamp;  // UTC ISO-8601
    int attempt = 1;
    bool cache_hit = false;

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"record_id", record_id},       {"prompt_id", to_string(prompt_id)},
            {"request_text", request_text}, {"response_text", response_text},
            {"timestamp", timestamp},       {"attempt", attempt},
            {"cache_hit", cache_hit},
        };
    }
};

struct LlmRequest {
    std::string record_id;
    PromptId prompt_id = PromptId::Relevance;
    // Cache/mock key. Usually to_string(prompt_id); eight-call extraction
    // mode appends the question ("extraction_q3") so answers don't collide.
    std::string prompt_key;
    uint64_t content_hash = 0;
    std::string input_text;  // context + prompt, as sent to the backend
    bool bypass_cache = false;
};

enum class BackendStatus { Ok, Transient, Auth, Budget, Miss };

struct BackendReply {
    BackendStatus status = BackendStatus::Ok;
    std::string text;  // response, or error detail
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual BackendReply complete(const LlmConfig& config, const LlmRequest& request) = 0;
};

// Deterministic backend keyed by (content_hash, prompt_key). Entries may be
// scripted to fail transiently a fixed number of times before succeeding.
class MockBackend : public ChatBackend {
public:
    MockBackend() = default;

    static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path) {
        auto mock = std::make_shared<MockBackend>();
        auto j = nlohmann::json::parse(read_file(path));
        const auto& entries = j.is_array() ? j : j.at("entries");
        for (const auto& e : entries) {
            uint64_t hash = 0;
            if (e.contains("content_hash")) {
                const auto& h = e.at("content_hash");
                hash = h.is_string() ? std::stoull(h.get<std::string>()) : h.get<uint64_t>();
            } else if (e.contains("content_text")) {
                hash = fnv1a64(e.at("content_text").get<std::string>());
            } else {
                throw Error("ConfigInvalid", "mock entry needs content_hash or content_text");
            }
            Entry entry;
            entry.response = e.at("response").get<std::string>();
            entry.transient_failures = e.value("transient_failures", 0);
            mock->add(hash, e.at("prompt_id").get<std::string>(), std::move(entry));
        }
        return mock;
    }

    void add(uint64_t content_hash, const std::string& prompt_key, std::string response,
             int transient_failures = 0) {
        add(content_hash, prompt_key, Entry{std::move(response), transient_failures});
    }

    void add_text(const std::string& content_text, const std::string& prompt_key,
                  std::string response) {
        add(fnv1a64(content_text), prompt_key, std::move(response));
    }

    BackendReply complete(const LlmConfig&, const LlmRequest& request) override {
        std::unique_lock<std::mutex> lock(mutex_);
        ++calls_;
        int now_in_flight = ++in_flight_;
        peak_in_flight_ = std::max(peak_in_flight_, now_in_flight);
        auto it = table_.find({request.content_hash, request.prompt_key});
        BackendReply reply;
        if (it == table_.end()) {
            reply = {BackendStatus::Miss,
                     "no mock entry for (" + std::to_string(request.content_hash) + ", " +
                         request.prompt_key + ")"};
        } else if (it->second.transient_failures > 0) {
            --it->second.transient_failures;
            reply = {BackendStatus::Transient, "scripted transient failure"};
        } else {
            reply = {BackendStatus::Ok, it->second.response};
        }
        if (latency_.count() > 0) {
            lock.unlock();
            std::this_thread::sleep_for(latency_);
            lock.lock();
        }
        --in_flight_;
        return reply;
    }

    // Test hooks.
    int calls() const { std::lock_guard<std::mutex> l(mutex_); return calls_; }
    int peak_in_flight() const { std::lock_guard<std::mutex> l(mutex_); return peak_in_flight_; }
    void set_latency(std::chrono::milliseconds ms) { latency_ = ms; }

private:
    struct Entry {
        std::string response;
        int transient_failures = 0;
    };

    void add(uint64_t hash, const std::string& key, Entry entry) {
        table_[{hash, key}] = std::move(entry);
    }

    std::map<std::pair<uint64_t, std::string>, Entry> table_;
    mutable std::mutex mutex_;
    int calls_ = 0;
    int in_flight_ = 0;
    int peak_in_flight_ = 0;
    std::chrono::milliseconds latency_{0};
};

inline std::string utc_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Append-only JSON-lines audit log, one LlmExchange per line.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(const std::filesystem::path& path) {
        if (!path.empty()) {
            std::filesystem::create_directories(path.parent_path().empty()
                                                    ? std::filesystem::path(".")
                                                    : path.parent_path());
            stream_.open(path, std::ios::app);
            if (!stream_) throw Error("IoError", "cannot open audit log " + path.string());
        }
    }

    void append(const LlmExchange& exchange) {
        std::lock_guard<std::mutex> lock(mutex_);
        exchanges_.push_back(exchange);
        if (stream_.is_open()) {
            stream_ << exchange.to_json().dump() << "\n";
            stream_.flush();
        }
    }

    std::vector<LlmExchange> snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return exchanges_;
    }

private:
    mutable std::mutex mutex_;
    std::ofstream stream_;
    std::vector<LlmExchange> exchanges_;
};

// Response cache keyed by (content_hash, prompt_key, model, temperature),
// persisted as JSON-lines so reruns are free. Later lines win on load.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
        if (path_.empty()) return;
        if (auto text = read_file_if_exists(path_)) {
            for (const auto& line : split(*text, '\n')) {
                std::string t = trim(line);
                if (t.empty()) continue;
                auto j = nlohmann::json::parse(t, nullptr, false);
                if (j.is_discarded()) continue;
                entries_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
            }
        }
    }

    static std::string make_key(uint64_t content_hash, const std::string& prompt_key,
                                const std::string& model, double temperature) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%llu|%.6g|", static_cast<unsigned long long>(content_hash),
                      temperature);
        return std::string(buf) + prompt_key + "|" + model;
    }

    std::optional<std::string> get(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& key, const std::string& response) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = entries_.emplace(key, response);
        if (!inserted) return;
        if (!path_.empty()) {
            if (!stream_.is_open()) {
                if (auto parent = path_.parent_path(); !parent.empty()) {
                    std::filesystem::create_directories(parent);
                }
                stream_.open(path_, std::ios::app);
            }
            nlohmann::json j{{"key", key}, {"response", response}};
            stream_ << j.dump() << "\n";
            stream_.flush();
        }
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    mutable std::ofstream stream_;
    std::map<std::string, std::string> entries_;
};

struct GatewayOptions {
    std::filesystem::path audit_path;  // empty: in-memory audit only
    std::filesystem::path cache_path;  // empty: in-memory cache only
    std::function<void(std::chrono::milliseconds)> sleeper;  // injectable for tests
    std::function<std::string()> clock;                      // injectable for tests
};

// Front door for all model calls: caching, bounded parallelism, retries
// with exponential backoff and full jitter, and a complete audit trail.
class Gateway {
public:
    Gateway(LlmConfig config, std::shared_ptr<ChatBackend> backend, GatewayOptions options = {})
        : config_(std::move(config)),
          backend_(std::move(backend)),
          audit_(options.audit_path),
          cache_(options.cache_path),
          sleeper_(options.sleeper ? std::move(options.sleeper)
                                   : [](std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); }),
          clock_(options.clock ? std::move(options.clock) : utc_timestamp_now),
          semaphore_(config_.max_parallel_requests),
          rng_(0x5bd1e995u) {
        config_.validate();
        if (!backend_) throw Error("ConfigInvalid", "gateway needs a backend");
    }

    const LlmConfig& config() const { return config_; }
    const AuditLog& audit() const { return audit_; }
    ResponseCache& cache() { return cache_; }

    // Blocking completion call. Throws AuthError / BudgetExceeded /
    // BackendUnavailable; transient failures are retried up to
    // max_retries with base 1 s, factor 2, full jitter.
    std::string complete(const LlmRequest& request) {
        std::string key = ResponseCache::make_key(request.content_hash, request.prompt_key,
                                                  config_.model_name, config_.temperature);
        if (!request.bypass_cache) {
            if (auto hit = cache_.get(key)) {
                audit_.append({request.record_id, request.prompt_id, request.input_text, *hit,
                               clock_(), 0, true});
                return *hit;
            }
        }

        for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
            BackendReply reply;
            {
                semaphore_.acquire();
                struct Release {
                    std::counting_semaphore<>& s;
                    ~Release() { s.release(); }
                } release{semaphore_};
                reply = backend_->complete(config_, request);
            }
            audit_.append({request.record_id, request.prompt_id, request.input_text, reply.text,
                           clock_(), attempt, false});

            switch (reply.status) {
                case BackendStatus::Ok:
                    cache_.put(key, reply.text);
                    return reply.text;
                case BackendStatus::Auth:
                    throw Error("AuthError", reply.text);
                case BackendStatus::Budget:
                    throw Error("BudgetExceeded", reply.text);
                case BackendStatus::Miss:
                    throw Error("BackendUnavailable", reply.text);
                case BackendStatus::Transient:
                    if (attempt <= config_.max_retries) {
                        sleeper_(backoff_delay(attempt));
                        break;
                    }
                    throw Error("BackendUnavailable",
                                "retries exhausted after " + std::to_string(attempt) +
                                    " attempts: " + reply.text);
            }
        }
        throw Error("BackendUnavailable", "unreachable");
    }

    // Convenience for prompt+context calls where the caller owns the hash.
    std::string complete(const std::string& record_id, PromptId prompt_id,
                         const std::string& prompt_key, uint64_t content_hash,
                         const std::string& context_text, const std::string& prompt_text,
                         bool bypass_cache = false) {
        LlmRequest req;
        req.record_id = record_id;
        req.prompt_id = prompt_id;
        req.prompt_key = prompt_key;
        req.content_hash = content_hash;
        req.input_text = context_text.empty() ? prompt_text : context_text + "\n\n" + prompt_text;
        req.bypass_cache = bypass_cache;
        return complete(req);
    }

private:
    std::chrono::milliseconds backoff_delay(int attempt) {
        // full jitter over [0, 1000ms * 2^(attempt-1)]
        double cap = 1000.0 * std::pow(2.0, attempt - 1);
        std::uniform_real_distribution<double> dist(0.0, cap);
        std::lock_guard<std::mutex> lock(rng_mutex_);
        return std::chrono::milliseconds(static_cast<long>(dist(rng_)));
    }

    LlmConfig config_;
    std::shared_ptr<ChatBackend> backend_;
    AuditLog audit_;
    ResponseCache cache_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
    std::function<std::string()> clock_;
    std::counting_semaphore<> semaphore_;
    std::mt19937_64 rng_;
    std::mutex rng_mutex_;
};

}  // namespace litmeta::llm
