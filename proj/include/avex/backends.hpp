#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "avex/corpus.hpp"
#include "avex/prompts.hpp"

namespace avex {

struct ChatRequest {
    std::string model;
    ChatPrompt messages;
    double temperature = 0.0;   // 0 for reproducible runs
    std::optional<long long> max_output_tokens;
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::optional<TokenUsage> usage;
    std::string model;
    std::chrono::milliseconds latency{0};
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string id() const = 0;
};

// Rough budgeting estimate for dry runs only; real counts come from the
// endpoint's usage report.
long long approx_token_count(const std::string& text);

// ---------------------------------------------------------------- pricing

// All money is integer nanodollars so totals are exact.
struct ModelPrice {
    long long input_nanodollars_per_token = 0;
    long long output_nanodollars_per_token = 0;
};

struct PriceTable {
    std::map<std::string, ModelPrice> models;
    std::string version = "unversioned";

    static ModelPrice from_per_1k(double input_dollars_per_1k, double output_dollars_per_1k);
    static PriceTable load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

struct UsageRecord {
    std::string model;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    int retries = 0;
};

struct CostReport {
    long long total_nanodollars = 0;
    long long extracted_pair_count = 0;
    double total_dollars() const { return static_cast<double>(total_nanodollars) / 1e9; }
    // 1000 * total / pairs, still in nanodollars (exact when divisible).
    double dollars_per_1k_pairs() const {
        if (extracted_pair_count <= 0) return 0.0;
        return 1000.0 * total_dollars() / static_cast<double>(extracted_pair_count);
    }
};

// Thread-safe accumulation of usage; aggregation is an order-independent sum.
class CostLedger {
public:
    CostLedger() = default;
    CostLedger(const CostLedger& other) : records_(other.records()),
                                          extracted_pairs_(other.extracted_pair_count()) {}
    CostLedger& operator=(const CostLedger& other) {
        if (this != &other) {
            auto records = other.records();
            auto pairs = other.extracted_pair_count();
            std::lock_guard lock(mutex_);
            records_ = std::move(records);
            extracted_pairs_ = pairs;
        }
        return *this;
    }

    void record(const UsageRecord& r);
    void add_extracted_pairs(long long n);
    std::vector<UsageRecord> records() const;
    long long extracted_pair_count() const;
    int total_retries() const;

    void save(const std::filesystem::path& file) const;
    static CostLedger load(const std::filesystem::path& file);

private:
    mutable std::mutex mutex_;
    std::vector<UsageRecord> records_;
    long long extracted_pairs_ = 0;
};

// Unknown model in the ledger raises ConfigError.
CostReport estimate_cost(const CostLedger& ledger, const PriceTable& prices);

// ------------------------------------------------------------------ retry

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{250};   // doubles per attempt
    std::function<void(std::chrono::milliseconds)> sleeper;   // injectable for tests
};

// Sends the request, retrying retryable failures with exponential backoff,
// and records usage (and the retry count) in the ledger.
ChatResponse chat_complete(const ChatRequest& req, ChatBackend& backend, CostLedger& ledger,
                           const RetryPolicy& policy = {});

// ----------------------------------------------------------------- mocks

// Answers every prompt with the ground truth of the title it finds in the
// final user message. With corruption p > 0, the values of floor(p*n) truth
// pairs (seeded selection over all pairs) are replaced by a wrong sentinel.
// Unknown titles get an empty JSON object.
class OracleBackend : public ChatBackend {
public:
    explicit OracleBackend(const Dataset& truth_source, double corruption_p = 0.0,
                           uint64_t corruption_seed = 0);
    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "oracle"; }

private:
    std::vector<std::pair<std::string, std::map<std::string, std::string>>> truth_;  // by title
};

// Fixed reply for every request; used for description generation tests.
class FixedBackend : public ChatBackend {
public:
    explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "fixed"; }

private:
    std::string reply_;
};

// Plays back a scripted sequence of outcomes; entries with `fail` set throw.
class ScriptedBackend : public ChatBackend {
public:
    struct Step {
        bool fail = false;
        bool retryable = true;
        std::string text;
    };
    explicit ScriptedBackend(std::vector<Step> steps) : steps_(std::move(steps)) {}
    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "scripted"; }
    size_t calls() const { return next_; }

private:
    std::vector<Step> steps_;
    size_t next_ = 0;
};

// Content-addressed request/response store. In record mode it forwards
// misses to the inner backend and persists the result; without an inner
// backend a miss is an error. Hits never touch the network, which makes
// recorded runs exactly repeatable offline.
class ReplayBackend : public ChatBackend {
public:
    ReplayBackend(std::filesystem::path dir, std::shared_ptr<ChatBackend> inner = nullptr);
    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override;

    static std::string request_key(const ChatRequest& req);

private:
    std::filesystem::path dir_;
    std::shared_ptr<ChatBackend> inner_;
    std::mutex mutex_;
};

// ------------------------------------------------------------------ HTTP

// Token bucket; acquire() blocks until a token is available.
class RateLimiter {
public:
    RateLimiter(double tokens_per_second, double capacity);
    void acquire();

private:
    std::mutex mutex_;
    double rate_;
    double capacity_;
    double available_;
    std::chrono::steady_clock::time_point last_;
};

struct HttpBackendConfig {
    std::string base_url;          // e.g. https://api.openai.com/v1
    std::string api_key;           // empty -> EXTRACT_API_KEY, then OPENAI_API_KEY
    double requests_per_second = 2.0;
    int timeout_seconds = 120;
};

// POST {base_url}/chat/completions with a bearer token.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override;

    static std::string request_body(const ChatRequest& req);

private:
    HttpBackendConfig config_;
    RateLimiter limiter_;
};

std::string api_key_from_env();

std::shared_ptr<ChatBackend> make_backend(const std::string& spec, const Dataset& oracle_truth,
                                          double corruption_p = 0.0, uint64_t corruption_seed = 0);

}  // namespace avex
