#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace avex {

// One product listing with its ground-truth attribute/value annotations.
// Attribute names are namespaced by category at the dataset level: the same
// name under two categories counts as two distinct attributes.
struct ProductOffer {
    std::string offer_id;
    std::string category;
    std::string title;                          // non-empty, single line
    std::map<std::string, std::string> truth;   // never stores "n/a"

    bool operator==(const ProductOffer&) const = default;
};

struct Dataset {
    std::string name;
    std::vector<ProductOffer> offers;           // canonical order = import order
    std::set<std::string> categories;

    bool empty() const { return offers.empty(); }
    size_t size() const { return offers.size(); }
    std::vector<const ProductOffer*> offers_in(const std::string& category) const;

    bool operator==(const Dataset&) const = default;
};

struct SplitBundle {
    Dataset train_large;
    Dataset train_small;
    Dataset test;
    uint64_t seed = 0;
    // Attributes that occur in a single offer and so cannot be placed on
    // both sides of the split. Recorded as "category/attribute".
    std::vector<std::string> uncoverable_attributes;
};

struct DatasetStats {
    size_t unique_categories = 0;
    size_t unique_attributes = 0;   // counted as (category, attribute) pairs
    size_t av_pairs = 0;
    size_t unique_av_pairs = 0;     // distinct (category, attribute, value)
    size_t offers = 0;
};

// Raw importers. The published raw layouts are undocumented; the formats
// accepted here are spelled out in the README.
Dataset import_oamine(const std::filesystem::path& dir);
Dataset import_ae110k(const std::filesystem::path& file);

// Canonical offer file: UTF-8, one JSON object per line with keys
// "id", "category", "title", "truth".
Dataset load_canonical(const std::filesystem::path& file);
void save_canonical(const Dataset& d, const std::filesystem::path& file);
std::string canonical_line(const ProductOffer& offer);

// Per-category 75:25 partition (train gets the remainder on ties) followed
// by a greedy repair pass so every attribute appears on both sides.
// Deterministic for a fixed seed. Categories with < 4 offers are an error.
SplitBundle split_dataset(const Dataset& d, uint64_t seed);

// Per-category stratified 20% sample (rounded half-up, minimum 1 offer).
Dataset subsample_small(const Dataset& train, uint64_t seed);

DatasetStats dataset_stats(const Dataset& d);

}  // namespace avex
