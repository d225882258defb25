// All HTTP wire code lives in this translation unit.

#include <nlohmann/json.hpp>

#include <httplib.h>

#include "avex/backends.hpp"
#include "avex/demos.hpp"
#include "avex/errors.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

RateLimiter::RateLimiter(double tokens_per_second, double capacity)
    : rate_(tokens_per_second), capacity_(capacity), available_(capacity),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        available_ = std::min(capacity_, available_ + elapsed * rate_);
        if (available_ >= 1.0) {
            available_ -= 1.0;
            return;
        }
        double wait = (1.0 - available_) / rate_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        lock.lock();
    }
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)),
      limiter_(config_.requests_per_second, std::max(config_.requests_per_second, 1.0)) {
    if (config_.api_key.empty()) config_.api_key = api_key_from_env();
}

std::string HttpChatBackend::id() const { return "http:" + config_.base_url; }

std::string HttpChatBackend::request_body(const ChatRequest& req) {
    ordered_json body;
    body["model"] = req.model;
    body["messages"] = ordered_json::parse(prompt_to_json(req.messages));
    body["temperature"] = req.temperature;
    if (req.max_output_tokens) body["max_tokens"] = *req.max_output_tokens;
    return body.dump();
}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
    limiter_.acquire();
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(30, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post("/chat/completions", headers, request_body(req), "application/json");
    auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

    if (!res)
        throw BackendError("chat endpoint unreachable: " + config_.base_url + " (" +
                               httplib::to_string(res.error()) + ")",
                           true);
    if (res->status == 401 || res->status == 403)
        throw BackendError("authentication failure (HTTP " + std::to_string(res->status) +
                               "); check EXTRACT_API_KEY / OPENAI_API_KEY",
                           false);
    if (res->status != 200)
        throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                               res->body,
                           retryable_status(res->status));

    auto j = ordered_json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
        !j["choices"][0].contains("message"))
        throw BackendError("malformed chat response body: " + res->body, false);

    ChatResponse resp;
    resp.text = j["choices"][0]["message"].value("content", "");
    resp.model = j.value("model", req.model);
    resp.latency = latency;
    if (j.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0LL);
        resp.usage = usage;
    }
    return resp;
}

EmbeddingVector HttpEmbedder::embed(const std::string& text) {
    if (text.empty()) throw InvalidArgument("cannot embed an empty string");
    httplib::Client client(base_url_);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    ordered_json body;
    body["input"] = text;
    body["model"] = model_;
    auto res = client.Post("/embeddings", headers, body.dump(), "application/json");
    if (!res) throw BackendError("embeddings endpoint unreachable: " + base_url_, true);
    if (res->status == 401 || res->status == 403)
        throw BackendError("embeddings auth failure (HTTP " + std::to_string(res->status) + ")",
                           false);
    if (res->status != 200)
        throw BackendError("embeddings endpoint returned HTTP " + std::to_string(res->status),
                           retryable_status(res->status));
    auto j = ordered_json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].empty())
        throw BackendError("malformed embeddings response: " + res->body, false);
    EmbeddingVector v;
    for (const auto& x : j["data"][0]["embedding"]) v.push_back(x.get<double>());
    if (v.empty()) throw BackendError("empty embedding vector in response", false);
    return v;
}

}  // namespace avex
