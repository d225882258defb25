#include "avex/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"
#include "avex/random.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

long long approx_token_count(const std::string& text) {
    return static_cast<long long>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------- pricing

ModelPrice PriceTable::from_per_1k(double input_dollars_per_1k, double output_dollars_per_1k) {
    if (input_dollars_per_1k < 0 || output_dollars_per_1k < 0)
        throw InvalidArgument("price rates must be non-negative");
    // dollars per 1k tokens -> nanodollars per token.
    ModelPrice p;
    p.input_nanodollars_per_token = std::llround(input_dollars_per_1k * 1e6);
    p.output_nanodollars_per_token = std::llround(output_dollars_per_1k * 1e6);
    return p;
}

PriceTable PriceTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open price table " + file.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(file.string() + ": invalid price table: " + std::string(e.what()));
    }
    PriceTable table;
    table.version = j.value("version", "unversioned");
    try {
        for (auto& [model, rates] : j.at("models").items())
            table.models[model] = from_per_1k(rates.at("input_per_1k").get<double>(),
                                              rates.at("output_per_1k").get<double>());
    } catch (const ordered_json::exception& e) {
        throw ConfigError(file.string() + ": invalid price table: " + std::string(e.what()));
    }
    return table;
}

void PriceTable::save(const std::filesystem::path& file) const {
    ordered_json j;
    j["version"] = version;
    j["models"] = ordered_json::object();
    for (const auto& [model, price] : models) {
        ordered_json rates;
        rates["input_per_1k"] = static_cast<double>(price.input_nanodollars_per_token) / 1e6;
        rates["output_per_1k"] = static_cast<double>(price.output_nanodollars_per_token) / 1e6;
        j["models"][model] = std::move(rates);
    }
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

void CostLedger::record(const UsageRecord& r) {
    std::lock_guard lock(mutex_);
    records_.push_back(r);
}

void CostLedger::add_extracted_pairs(long long n) {
    std::lock_guard lock(mutex_);
    extracted_pairs_ += n;
}

std::vector<UsageRecord> CostLedger::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

long long CostLedger::extracted_pair_count() const {
    std::lock_guard lock(mutex_);
    return extracted_pairs_;
}

int CostLedger::total_retries() const {
    std::lock_guard lock(mutex_);
    int total = 0;
    for (const auto& r : records_) total += r.retries;
    return total;
}

void CostLedger::save(const std::filesystem::path& file) const {
    std::lock_guard lock(mutex_);
    ordered_json j;
    j["extracted_pair_count"] = extracted_pairs_;
    j["records"] = ordered_json::array();
    for (const auto& r : records_) {
        ordered_json rec;
        rec["model"] = r.model;
        rec["prompt_tokens"] = r.prompt_tokens;
        rec["completion_tokens"] = r.completion_tokens;
        rec["retries"] = r.retries;
        j["records"].push_back(std::move(rec));
    }
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

CostLedger CostLedger::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open ledger " + file.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(file.string() + ": invalid ledger: " + std::string(e.what()));
    }
    CostLedger ledger;
    ledger.extracted_pairs_ = j.value("extracted_pair_count", 0LL);
    for (const auto& rec : j.at("records")) {
        UsageRecord r;
        r.model = rec.at("model").get<std::string>();
        r.prompt_tokens = rec.at("prompt_tokens").get<long long>();
        r.completion_tokens = rec.at("completion_tokens").get<long long>();
        r.retries = rec.value("retries", 0);
        ledger.records_.push_back(std::move(r));
    }
    return ledger;
}

CostReport estimate_cost(const CostLedger& ledger, const PriceTable& prices) {
    CostReport report;
    report.extracted_pair_count = ledger.extracted_pair_count();
    for (const auto& r : ledger.records()) {
        auto it = prices.models.find(r.model);
        if (it == prices.models.end())
            throw ConfigError("no price entry for model '" + r.model + "'");
        report.total_nanodollars += r.prompt_tokens * it->second.input_nanodollars_per_token +
                                    r.completion_tokens * it->second.output_nanodollars_per_token;
    }
    return report;
}

// ------------------------------------------------------------------ retry

ChatResponse chat_complete(const ChatRequest& req, ChatBackend& backend, CostLedger& ledger,
                           const RetryPolicy& policy) {
    auto sleeper = policy.sleeper ? policy.sleeper : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
    int attempts = std::max(policy.max_attempts, 1);
    std::chrono::milliseconds delay = policy.base_delay;
    int retries = 0;
    for (int attempt = 1;; ++attempt) {
        try {
            ChatResponse resp = backend.complete(req);
            UsageRecord record;
            record.model = resp.model.empty() ? req.model : resp.model;
            if (resp.usage) {
                record.prompt_tokens = resp.usage->prompt_tokens;
                record.completion_tokens = resp.usage->completion_tokens;
            }
            record.retries = retries;
            ledger.record(record);
            return resp;
        } catch (const BackendError& e) {
            if (!e.retryable || attempt >= attempts) throw;
            sleeper(delay);
            delay *= 2;   // delays strictly increase
            ++retries;
        }
    }
}

// ----------------------------------------------------------------- mocks

OracleBackend::OracleBackend(const Dataset& truth_source, double corruption_p,
                             uint64_t corruption_seed) {
    for (const auto& offer : truth_source.offers) truth_.emplace_back(offer.title, offer.truth);

    if (corruption_p > 0.0) {
        // Seeded selection of floor(p*n) slots over all pairs, canonical order.
        std::vector<std::pair<size_t, std::string>> slots;
        for (size_t i = 0; i < truth_.size(); ++i)
            for (const auto& [attr, _] : truth_[i].second) slots.emplace_back(i, attr);
        size_t corrupt_n = static_cast<size_t>(std::floor(corruption_p * slots.size()));
        Rng rng(corruption_seed);
        rng.shuffle(slots);
        for (size_t s = 0; s < corrupt_n && s < slots.size(); ++s)
            truth_[slots[s].first].second[slots[s].second] = "[corrupted]";
    }
}

ChatResponse OracleBackend::complete(const ChatRequest& req) {
    if (req.messages.messages.empty()) throw BackendError("empty prompt", false);
    const std::string* last_user = nullptr;
    for (const auto& m : req.messages.messages)
        if (m.msg_role == MsgRole::user) last_user = &m.content;
    if (!last_user) throw BackendError("prompt has no user message", false);

    // The task-input segment quotes the title verbatim; find the longest
    // known title contained in the final user message.
    const std::map<std::string, std::string>* best = nullptr;
    size_t best_len = 0;
    for (const auto& [title, truth] : truth_) {
        if (title.size() > best_len && last_user->find(title) != std::string::npos) {
            best = &truth;
            best_len = title.size();
        }
    }

    ordered_json answer = ordered_json::object();
    if (best)
        for (const auto& [attr, value] : *best) answer[attr] = value;

    ChatResponse resp;
    resp.text = answer.dump();
    resp.model = req.model.empty() ? "oracle" : req.model;
    TokenUsage usage;
    for (const auto& m : req.messages.messages) usage.prompt_tokens += approx_token_count(m.content);
    usage.completion_tokens = approx_token_count(resp.text);
    resp.usage = usage;
    return resp;
}

ChatResponse FixedBackend::complete(const ChatRequest& req) {
    ChatResponse resp;
    resp.text = reply_;
    resp.model = req.model.empty() ? "fixed" : req.model;
    TokenUsage usage;
    for (const auto& m : req.messages.messages) usage.prompt_tokens += approx_token_count(m.content);
    usage.completion_tokens = approx_token_count(resp.text);
    resp.usage = usage;
    return resp;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    if (next_ >= steps_.size()) throw BackendError("scripted backend exhausted", false);
    const Step& step = steps_[next_++];
    if (step.fail) throw BackendError("scripted failure", step.retryable);
    ChatResponse resp;
    resp.text = step.text;
    resp.model = req.model.empty() ? "scripted" : req.model;
    TokenUsage usage;
    usage.completion_tokens = approx_token_count(resp.text);
    resp.usage = usage;
    return resp;
}

// ----------------------------------------------------------------- replay

ReplayBackend::ReplayBackend(std::filesystem::path dir, std::shared_ptr<ChatBackend> inner)
    : dir_(std::move(dir)), inner_(std::move(inner)) {
    std::filesystem::create_directories(dir_);
}

std::string ReplayBackend::id() const {
    return inner_ ? "replay+" + inner_->id() : "replay";
}

std::string ReplayBackend::request_key(const ChatRequest& req) {
    ordered_json j;
    j["model"] = req.model;
    j["temperature"] = req.temperature;
    j["messages"] = ordered_json::parse(prompt_to_json(req.messages));
    std::string canonical = j.dump();
    char key[17];
    std::snprintf(key, sizeof(key), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    return key;
}

ChatResponse ReplayBackend::complete(const ChatRequest& req) {
    std::string key = request_key(req);
    auto path = dir_ / (key + ".json");

    {
        std::lock_guard lock(mutex_);
        std::ifstream in(path);
        if (in) {
            ordered_json j = ordered_json::parse(in);
            ChatResponse resp;
            resp.text = j.at("response").at("text").get<std::string>();
            resp.model = j.at("response").value("model", "");
            if (j["response"].contains("usage")) {
                TokenUsage usage;
                usage.prompt_tokens = j["response"]["usage"].at("prompt_tokens").get<long long>();
                usage.completion_tokens =
                    j["response"]["usage"].at("completion_tokens").get<long long>();
                resp.usage = usage;
            }
            return resp;
        }
    }

    if (!inner_)
        throw BackendError("replay store has no recording for request " + key +
                               " and no inner backend is configured",
                           false);
    ChatResponse resp = inner_->complete(req);

    ordered_json j;
    j["request"] = ordered_json::object();
    j["request"]["model"] = req.model;
    j["request"]["temperature"] = req.temperature;
    j["request"]["messages"] = ordered_json::parse(prompt_to_json(req.messages));
    j["response"] = ordered_json::object();
    j["response"]["text"] = resp.text;
    j["response"]["model"] = resp.model;
    if (resp.usage) {
        j["response"]["usage"] = ordered_json::object();
        j["response"]["usage"]["prompt_tokens"] = resp.usage->prompt_tokens;
        j["response"]["usage"]["completion_tokens"] = resp.usage->completion_tokens;
    }
    std::lock_guard lock(mutex_);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write replay entry " + path.string());
    out << j.dump(2) << "\n";
    return resp;
}

// ------------------------------------------------------------------ misc

std::string api_key_from_env() {
    if (const char* key = std::getenv("EXTRACT_API_KEY")) return key;
    if (const char* key = std::getenv("OPENAI_API_KEY")) return key;
    return "";
}

std::shared_ptr<ChatBackend> make_backend(const std::string& spec, const Dataset& oracle_truth,
                                          double corruption_p, uint64_t corruption_seed) {
    if (spec == "oracle")
        return std::make_shared<OracleBackend>(oracle_truth, corruption_p, corruption_seed);
    if (spec.rfind("http:", 0) == 0 || spec.rfind("https:", 0) == 0) {
        HttpBackendConfig config;
        config.base_url = spec;
        return std::make_shared<HttpChatBackend>(config);
    }
    throw ConfigError("unknown backend '" + spec + "' (expected 'oracle' or a base URL)");
}

}  // namespace avex
