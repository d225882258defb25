#include "avex/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "avex/backends.hpp"
#include "avex/errors.hpp"
#include "avex/parse.hpp"
#include "avex/prompts.hpp"
#include "avex/random.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

const AttributeSpec* CategorySchema::find(const std::string& name) const {
    for (const auto& a : attributes)
        if (a.name == name) return &a;
    return nullptr;
}

std::vector<std::string> CategorySchema::attribute_names() const {
    std::vector<std::string> names;
    names.reserve(attributes.size());
    for (const auto& a : attributes) names.push_back(a.name);
    return names;
}

CategorySchema build_schema(const Dataset& train, const std::string& category,
                            const std::vector<std::string>& registry) {
    if (!train.categories.count(category) && registry.empty())
        throw NotFoundError("category not in training data: " + category);

    std::set<std::string> names(registry.begin(), registry.end());
    for (const auto* offer : train.offers_in(category))
        for (const auto& [attr, _] : offer->truth) names.insert(attr);

    CategorySchema schema;
    schema.category = category;
    for (const auto& name : names) schema.attributes.push_back({name, std::nullopt, {}});
    return schema;
}

SchemaRegistry build_schema_registry(const Dataset& train) {
    SchemaRegistry registry;
    for (const auto& category : train.categories)
        registry[category] = build_schema(train, category);
    return registry;
}

std::vector<std::string> sample_example_values(const Dataset& train, const std::string& category,
                                               const std::string& attribute, size_t k,
                                               uint64_t seed) {
    if (!train.categories.count(category))
        throw NotFoundError("category not in training data: " + category);
    bool attribute_known = false;
    std::set<std::string> distinct;
    for (const auto* offer : train.offers_in(category)) {
        auto it = offer->truth.find(attribute);
        if (it != offer->truth.end()) {
            attribute_known = true;
            distinct.insert(it->second);
        }
    }
    if (!attribute_known)
        throw NotFoundError("attribute '" + attribute + "' absent from category '" + category +
                            "'");
    if (k == 0) return {};

    // Seeded shuffle of the sorted distinct values, then truncation, so the
    // k1-sample is a prefix of the k2-sample for k1 <= k2.
    std::vector<std::string> values(distinct.begin(), distinct.end());
    Rng rng = stratum_rng(seed, category + "/" + attribute);
    rng.shuffle(values);
    if (values.size() > k) values.resize(k);
    return values;
}

CategorySchema attach_example_values(const Dataset& train, const CategorySchema& schema,
                                     size_t k, uint64_t seed) {
    CategorySchema out = schema;
    for (auto& attr : out.attributes) {
        try {
            attr.examples = sample_example_values(train, schema.category, attr.name, k, seed);
        } catch (const NotFoundError&) {
            attr.examples.clear();   // registry-only attribute, no training values
        }
    }
    return out;
}

DescriptionOutcome generate_descriptions(const CategorySchema& schema, ChatBackend& backend,
                                         const std::string& model) {
    DescriptionOutcome outcome;
    outcome.schema = schema;
    PromptTemplates templates = PromptTemplates::defaults();
    for (auto& attr : outcome.schema.attributes) {
        if (attr.description && !attr.description->empty()) continue;
        std::string request = templates.description_request;
        auto substitute = [&](const std::string& placeholder, const std::string& value) {
            for (size_t pos = request.find(placeholder); pos != std::string::npos;
                 pos = request.find(placeholder, pos + value.size()))
                request.replace(pos, placeholder.size(), value);
        };
        substitute("{attribute}", attr.name);
        substitute("{category}", schema.category);

        ChatRequest req;
        req.model = model;
        req.messages.messages.push_back({MsgRole::user, request});
        try {
            ChatResponse resp = backend.complete(req);
            auto normalized = normalize_value(resp.text);
            if (normalized) attr.description = *normalized;
        } catch (const std::exception&) {
            outcome.failed_attributes.push_back(attr.name);
        }
    }
    return outcome;
}

CategorySchema load_schema(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw ParseError(file.string() + ": invalid schema JSON: " + std::string(e.what()));
    }
    CategorySchema schema;
    schema.category = j.at("category").get<std::string>();
    for (const auto& a : j.at("attributes")) {
        AttributeSpec spec;
        spec.name = a.at("name").get<std::string>();
        if (a.contains("description") && !a["description"].is_null())
            spec.description = a["description"].get<std::string>();
        if (a.contains("examples"))
            for (const auto& e : a["examples"]) spec.examples.push_back(e.get<std::string>());
        schema.attributes.push_back(std::move(spec));
    }
    return schema;
}

void save_schema(const CategorySchema& schema, const std::filesystem::path& file) {
    ordered_json j;
    j["category"] = schema.category;
    j["attributes"] = ordered_json::array();
    for (const auto& a : schema.attributes) {
        ordered_json entry;
        entry["name"] = a.name;
        entry["description"] = a.description ? ordered_json(*a.description) : ordered_json();
        entry["examples"] = a.examples;
        j["attributes"].push_back(std::move(entry));
    }
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

}  // namespace avex
