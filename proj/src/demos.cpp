#include "avex/demos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "avex/backends.hpp"
#include "avex/errors.hpp"
#include "avex/random.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw InvalidArgument("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    if (a.empty()) throw InvalidArgument("cosine: empty vectors");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) throw InvalidArgument("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashEmbedder::HashEmbedder(size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::string HashEmbedder::id() const { return "hash-" + std::to_string(dimension_); }

EmbeddingVector HashEmbedder::embed(const std::string& text) {
    if (text.empty()) throw InvalidArgument("cannot embed an empty string");
    EmbeddingVector v(dimension_, 0.0);
    // Character trigrams over the padded text; the hash picks the bucket,
    // one extra bit picks the sign.
    std::string padded = "\x02" + text + "\x03";
    for (size_t i = 0; i + 3 <= padded.size(); ++i) {
        uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
        size_t bucket = h % dimension_;
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0) {
        v[fnv1a64(text) % dimension_] = 1.0;   // degenerate all-cancelled case
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string model, std::string api_key)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)) {
    if (api_key_.empty()) api_key_ = api_key_from_env();
}

std::string HttpEmbedder::id() const { return "http-" + model_; }

// HttpEmbedder::embed lives in http.cpp with the rest of the wire code.

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        EmbeddingVector v;
        for (const auto& x : j.at("vector")) v.push_back(x.get<double>());
        entries_[j.at("key").get<std::string>()] = std::move(v);
    }
}

EmbeddingCache::~EmbeddingCache() {
    if (file_.empty() || !dirty_) return;
    std::ofstream out(file_);
    if (!out) return;
    for (const auto& [key, vector] : entries_) {
        ordered_json j;
        j["key"] = key;
        j["vector"] = vector;
        out << j.dump() << "\n";
    }
}

EmbeddingVector EmbeddingCache::get_or_compute(EmbeddingBackend& embedder,
                                               const std::string& text) {
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    std::string key = embedder.id() + ":" + hash;
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    EmbeddingVector v = embedder.embed(text);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, std::move(v));
    if (inserted) dirty_ = true;
    return it->second;
}

size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

DemoPool build_demo_pool(const Dataset& train, const std::string& category,
                         EmbeddingBackend& embedder, EmbeddingCache* cache) {
    DemoPool pool;
    pool.category = category;
    for (const auto* offer : train.offers_in(category)) {
        EmbeddingVector v =
            cache ? cache->get_or_compute(embedder, offer->title) : embedder.embed(offer->title);
        pool.entries.emplace_back(*offer, std::move(v));
    }
    return pool;
}

std::string to_string(SelectorStrategy s) {
    switch (s) {
        case SelectorStrategy::fixed: return "fixed";
        case SelectorStrategy::random: return "random";
        case SelectorStrategy::semantic_similarity: return "semsim";
        case SelectorStrategy::mmr: return "mmr";
        case SelectorStrategy::semsim_avd: return "semsim-avd";
    }
    return "semsim";
}

SelectorStrategy selector_from_string(const std::string& s) {
    if (s == "fixed") return SelectorStrategy::fixed;
    if (s == "random") return SelectorStrategy::random;
    if (s == "semsim" || s == "semantic_similarity") return SelectorStrategy::semantic_similarity;
    if (s == "mmr") return SelectorStrategy::mmr;
    if (s == "semsim-avd" || s == "semsim_avd") return SelectorStrategy::semsim_avd;
    throw InvalidArgument("unknown selector strategy: " + s);
}

namespace {

// Indices of pool entries sorted by cosine to the query, descending,
// ties broken by canonical (lowest) pool index.
std::vector<size_t> similarity_order(const EmbeddingVector& query, const DemoPool& pool) {
    std::vector<size_t> idx(pool.entries.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> sim(pool.entries.size());
    for (size_t i = 0; i < pool.entries.size(); ++i)
        sim[i] = cosine_similarity(query, pool.entries[i].second);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return sim[a] > sim[b]; });
    return idx;
}

std::set<std::pair<std::string, std::string>> truth_pairs(const ProductOffer& o) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& [attr, value] : o.truth) out.emplace(attr, value);
    return out;
}

}  // namespace

std::vector<ProductOffer> select_demonstrations(const ProductOffer& query,
                                                const EmbeddingVector& query_embedding,
                                                const DemoPool& pool, const SelectorConfig& cfg) {
    if (pool.category != query.category)
        throw InvalidArgument("demo pool category '" + pool.category +
                              "' does not match query category '" + query.category + "'");
    for (const auto& [offer, _] : pool.entries)
        if (offer.offer_id == query.offer_id)
            throw InvalidArgument("query offer '" + query.offer_id + "' must not be in the pool");

    size_t n = pool.entries.size();
    size_t k = std::min(cfg.k, n);
    std::vector<size_t> chosen;

    switch (cfg.strategy) {
        case SelectorStrategy::fixed:
            // First k entries in canonical pool order; independent of query.
            for (size_t i = 0; i < k; ++i) chosen.push_back(i);
            break;

        case SelectorStrategy::random: {
            std::vector<size_t> idx(n);
            for (size_t i = 0; i < n; ++i) idx[i] = i;
            Rng rng = stratum_rng(cfg.seed, pool.category);
            rng.shuffle(idx);
            chosen.assign(idx.begin(), idx.begin() + k);
            break;
        }

        case SelectorStrategy::semantic_similarity: {
            auto order = similarity_order(query_embedding, pool);
            chosen.assign(order.begin(), order.begin() + k);
            break;
        }

        case SelectorStrategy::mmr: {
            // Greedy argmax of lambda*sim(q,c) - (1-lambda)*max_s sim(c,s);
            // the redundancy term is 0 while nothing is selected.
            std::vector<double> query_sim(n);
            for (size_t i = 0; i < n; ++i)
                query_sim[i] = cosine_similarity(query_embedding, pool.entries[i].second);
            std::vector<bool> taken(n, false);
            while (chosen.size() < k) {
                double best_score = 0;
                size_t best = n;
                for (size_t i = 0; i < n; ++i) {
                    if (taken[i]) continue;
                    double redundancy = 0;
                    for (size_t s : chosen)
                        redundancy = std::max(
                            redundancy,
                            cosine_similarity(pool.entries[i].second, pool.entries[s].second));
                    double score =
                        cfg.mmr_lambda * query_sim[i] - (1.0 - cfg.mmr_lambda) * redundancy;
                    if (best == n || score > best_score) {
                        best_score = score;
                        best = i;
                    }
                }
                taken[best] = true;
                chosen.push_back(best);
            }
            break;
        }

        case SelectorStrategy::semsim_avd: {
            auto order = similarity_order(query_embedding, pool);
            std::set<std::pair<std::string, std::string>> seen;
            std::vector<size_t> skipped;
            for (size_t i : order) {
                if (chosen.size() >= k) break;
                auto pairs = truth_pairs(pool.entries[i].first);
                bool redundant = !pairs.empty() && std::all_of(pairs.begin(), pairs.end(),
                                                               [&](const auto& p) {
                                                                   return seen.count(p) > 0;
                                                               });
                if (redundant) {
                    skipped.push_back(i);
                    continue;
                }
                chosen.push_back(i);
                seen.insert(pairs.begin(), pairs.end());
            }
            // Backfill skipped candidates in similarity order up to k.
            for (size_t i : skipped) {
                if (chosen.size() >= k) break;
                chosen.push_back(i);
            }
            break;
        }
    }

    std::vector<ProductOffer> out;
    out.reserve(chosen.size());
    for (size_t i : chosen) out.push_back(pool.entries[i].first);
    return out;
}

}  // namespace avex
