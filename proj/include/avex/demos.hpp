#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "avex/corpus.hpp"

namespace avex {

using EmbeddingVector = std::vector<double>;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::string id() const = 0;
};

// Deterministic offline fallback: character-trigram feature hashing into a
// fixed dimension, unit-normalized. No network, stable across platforms.
class HashEmbedder : public EmbeddingBackend {
public:
    explicit HashEmbedder(size_t dimension = 256);
    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override;

private:
    size_t dimension_;
};

// POST {base_url}/embeddings with {"input": ..., "model": ...}.
class HttpEmbedder : public EmbeddingBackend {
public:
    HttpEmbedder(std::string base_url, std::string model, std::string api_key = "");
    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override;

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_;
};

// Cache keyed by (embedder id, title hash); optionally persisted as JSONL.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path file);
    ~EmbeddingCache();

    EmbeddingVector get_or_compute(EmbeddingBackend& embedder, const std::string& text);
    size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, EmbeddingVector> entries_;
    std::filesystem::path file_;
    bool dirty_ = false;
};

struct DemoPool {
    std::string category;
    std::vector<std::pair<ProductOffer, EmbeddingVector>> entries;   // canonical order
};

DemoPool build_demo_pool(const Dataset& train, const std::string& category,
                         EmbeddingBackend& embedder, EmbeddingCache* cache = nullptr);

enum class SelectorStrategy { fixed, random, semantic_similarity, mmr, semsim_avd };

std::string to_string(SelectorStrategy s);
SelectorStrategy selector_from_string(const std::string& s);

struct SelectorConfig {
    SelectorStrategy strategy = SelectorStrategy::semantic_similarity;
    size_t k = 10;
    double mmr_lambda = 0.5;
    uint64_t seed = 0;
};

// Returns <= k distinct demonstrations from the pool. The query offer must
// not be in the pool. All tie-breaks resolve to the lowest canonical index.
std::vector<ProductOffer> select_demonstrations(const ProductOffer& query,
                                                const EmbeddingVector& query_embedding,
                                                const DemoPool& pool, const SelectorConfig& cfg);

}  // namespace avex
