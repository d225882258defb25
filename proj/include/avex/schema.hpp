#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avex/corpus.hpp"

namespace avex {

class ChatBackend;

struct AttributeSpec {
    std::string name;
    std::optional<std::string> description;
    std::vector<std::string> examples;   // unique, never "n/a"

    bool operator==(const AttributeSpec&) const = default;
};

struct CategorySchema {
    std::string category;
    std::vector<AttributeSpec> attributes;   // names unique, definition order

    const AttributeSpec* find(const std::string& name) const;
    std::vector<std::string> attribute_names() const;

    bool operator==(const CategorySchema&) const = default;
};

using SchemaRegistry = std::map<std::string, CategorySchema>;

// One AttributeSpec per attribute observed for the category in ground truth,
// plus any names in `registry`. Attributes sorted by name; descriptions and
// examples left empty.
CategorySchema build_schema(const Dataset& train, const std::string& category,
                            const std::vector<std::string>& registry = {});

SchemaRegistry build_schema_registry(const Dataset& train);

// Up to k distinct values, drawn as a seeded shuffle of the sorted distinct
// training values followed by truncation. The k1-sample is therefore a
// prefix of the k2-sample for k1 <= k2 under the same seed.
std::vector<std::string> sample_example_values(const Dataset& train, const std::string& category,
                                               const std::string& attribute, size_t k,
                                               uint64_t seed);

// Returns a copy of `schema` with example values attached to every attribute.
CategorySchema attach_example_values(const Dataset& train, const CategorySchema& schema,
                                     size_t k, uint64_t seed);

struct DescriptionOutcome {
    CategorySchema schema;
    std::vector<std::string> failed_attributes;
};

// Fills empty descriptions by asking the backend for a one-sentence
// description per attribute. Existing descriptions are kept. Backend
// failures are recorded per attribute; the rest still succeed.
DescriptionOutcome generate_descriptions(const CategorySchema& schema, ChatBackend& backend,
                                         const std::string& model = "");

// Schema file: one JSON document per category with "category" and
// "attributes" ({"name", "description", "examples"}).
CategorySchema load_schema(const std::filesystem::path& file);
void save_schema(const CategorySchema& schema, const std::filesystem::path& file);

}  // namespace avex
