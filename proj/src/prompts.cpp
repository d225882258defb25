#include "avex/prompts.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"
#include "avex/parse.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

std::string to_string(MsgRole role) {
    switch (role) {
        case MsgRole::system: return "system";
        case MsgRole::user: return "user";
        case MsgRole::assistant: return "assistant";
    }
    return "user";
}

MsgRole msg_role_from_string(const std::string& s) {
    if (s == "system") return MsgRole::system;
    if (s == "user") return MsgRole::user;
    if (s == "assistant") return MsgRole::assistant;
    throw InvalidArgument("unknown message role: " + s);
}

std::string to_string(Representation r) {
    switch (r) {
        case Representation::list: return "list";
        case Representation::textual: return "textual";
        case Representation::compact: return "compact";
        case Representation::json: return "json";
    }
    return "json";
}

Representation representation_from_string(const std::string& s) {
    if (s == "list") return Representation::list;
    if (s == "textual") return Representation::textual;
    if (s == "compact") return Representation::compact;
    if (s == "json") return Representation::json;
    throw InvalidArgument("unknown representation: " + s);
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.role_plain =
        "You are a world-class data specialist for e-commerce product catalogs. "
        "You extract structured attribute values from product titles.";
    t.role_with_schema =
        "You are a world-class data specialist for e-commerce product catalogs. "
        "You extract structured attribute values from product titles.\n"
        "The target attributes are defined as follows:\n{representation}";
    t.task_description =
        "Extract the attribute values from the product title below. "
        "{attribute_section} "
        "Respond with a JSON document containing one key per target attribute. "
        "If a value is not present in the title, use 'n/a' as the value.";
    t.task_input = "Product title: {title}";
    t.attribute_section_list = "The target attributes are:\n{representation}\n";
    t.attribute_section_schema = "The target attributes are defined in your role description.";
    t.description_request =
        "Write a single-sentence description of the product attribute '{attribute}' "
        "for products of the category '{category}'. Answer with the sentence only.";
    return t;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open template file " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string replaced(std::string text, const std::string& placeholder, const std::string& value) {
    for (size_t pos = text.find(placeholder); pos != std::string::npos;
         pos = text.find(placeholder, pos + value.size()))
        text.replace(pos, placeholder.size(), value);
    return text;
}

}  // namespace

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    auto maybe = [&](const char* name, std::string& slot) {
        auto p = dir / (std::string(name) + ".txt");
        if (std::filesystem::exists(p)) slot = read_file(p);
    };
    maybe("role_plain", t.role_plain);
    maybe("role_with_schema", t.role_with_schema);
    maybe("task_description", t.task_description);
    maybe("task_input", t.task_input);
    maybe("attribute_section_list", t.attribute_section_list);
    maybe("attribute_section_schema", t.attribute_section_schema);
    maybe("description_request", t.description_request);
    return t;
}

std::string render_representation(const CategorySchema& schema, Representation representation,
                                  size_t example_value_count) {
    if (schema.attributes.empty()) throw InvalidArgument("schema has no attributes");
    if (representation == Representation::list && example_value_count > 0)
        throw InvalidArgument("the list representation carries attribute names only");

    auto examples_of = [&](const AttributeSpec& a) {
        std::vector<std::string> out;
        for (const auto& e : a.examples) {
            if (out.size() >= example_value_count) break;
            out.push_back(e);
        }
        return out;
    };

    std::ostringstream out;
    switch (representation) {
        case Representation::list: {
            bool first = true;
            for (const auto& a : schema.attributes) {
                if (!first) out << "\n";
                out << "- " << a.name;
                first = false;
            }
            break;
        }
        case Representation::textual: {
            bool first = true;
            for (const auto& a : schema.attributes) {
                if (!first) out << "\n";
                out << a.name << ":";
                if (a.description) out << " " << *a.description;
                auto ex = examples_of(a);
                if (!ex.empty()) {
                    out << " Example values:";
                    for (size_t i = 0; i < ex.size(); ++i) out << (i ? ", " : " ") << ex[i];
                    out << ".";
                }
                first = false;
            }
            break;
        }
        case Representation::compact: {
            // One dense line per attribute: name | description | examples.
            bool first = true;
            for (const auto& a : schema.attributes) {
                if (!first) out << "\n";
                out << a.name << " | " << (a.description ? *a.description : "") << " |";
                auto ex = examples_of(a);
                for (size_t i = 0; i < ex.size(); ++i) out << (i ? ", " : " ") << ex[i];
                first = false;
            }
            break;
        }
        case Representation::json: {
            ordered_json properties = ordered_json::object();
            for (const auto& a : schema.attributes) {
                ordered_json prop;
                prop["type"] = "string";
                if (a.description) prop["description"] = *a.description;
                auto ex = examples_of(a);
                if (!ex.empty()) prop["examples"] = ex;
                properties[a.name] = std::move(prop);
            }
            ordered_json doc;
            doc["type"] = "object";
            doc["properties"] = std::move(properties);
            out << doc.dump(2);
            break;
        }
    }
    return out.str();
}

std::string render_truth_json(const CategorySchema& schema,
                              const std::map<std::string, std::string>& truth) {
    ordered_json j = ordered_json::object();
    for (const auto& a : schema.attributes) {
        auto it = truth.find(a.name);
        j[a.name] = it != truth.end() ? it->second : "n/a";
    }
    return j.dump();
}

namespace {

std::string render_system(const PromptDesign& design, const CategorySchema& schema,
                          const PromptTemplates& t) {
    if (design.representation == Representation::list) return t.role_plain;
    std::string rendered =
        render_representation(schema, design.representation, design.example_value_count);
    return replaced(t.role_with_schema, "{representation}", rendered);
}

std::string render_task_description(const PromptDesign& design, const CategorySchema& schema,
                                    const PromptTemplates& t) {
    std::string section;
    if (design.representation == Representation::list) {
        std::string rendered = render_representation(schema, Representation::list, 0);
        section = replaced(t.attribute_section_list, "{representation}", rendered);
    } else {
        section = t.attribute_section_schema;
    }
    return replaced(t.task_description, "{attribute_section}", section);
}

std::string render_task_input(const ProductOffer& offer, const PromptTemplates& t) {
    return replaced(t.task_input, "{title}", offer.title);
}

}  // namespace

ChatPrompt build_zero_shot(const PromptDesign& design, const CategorySchema& schema,
                           const ProductOffer& offer, const PromptTemplates& templates) {
    ChatPrompt prompt;
    prompt.messages.push_back({MsgRole::system, render_system(design, schema, templates)});
    prompt.messages.push_back(
        {MsgRole::user, render_task_description(design, schema, templates) + "\n\n" +
                            render_task_input(offer, templates)});
    return prompt;
}

ChatPrompt build_few_shot(const PromptDesign& design, const CategorySchema& schema,
                          const ProductOffer& offer, const std::vector<ProductOffer>& demos,
                          const PromptTemplates& templates) {
    if (demos.empty()) throw InvalidArgument("few-shot prompt requires at least one demonstration");
    for (const auto& demo : demos)
        if (demo.category != offer.category)
            throw InvalidArgument("demonstration '" + demo.offer_id + "' is from category '" +
                                  demo.category + "', query is from '" + offer.category + "'");

    std::string task_description = render_task_description(design, schema, templates);
    ChatPrompt prompt;
    prompt.messages.push_back({MsgRole::system, render_system(design, schema, templates)});
    prompt.messages.push_back({MsgRole::user, task_description});
    for (const auto& demo : demos) {
        prompt.messages.push_back({MsgRole::user, render_task_input(demo, templates)});
        prompt.messages.push_back({MsgRole::assistant, render_truth_json(schema, demo.truth)});
    }
    // The task description is repeated before the actual task input.
    prompt.messages.push_back(
        {MsgRole::user, task_description + "\n\n" + render_task_input(offer, templates)});
    return prompt;
}

std::string prompt_to_json(const ChatPrompt& prompt) {
    ordered_json messages = ordered_json::array();
    for (const auto& m : prompt.messages) {
        ordered_json msg;
        msg["role"] = to_string(m.msg_role);
        msg["content"] = m.content;
        messages.push_back(std::move(msg));
    }
    return messages.dump();
}

ChatPrompt prompt_from_json(const std::string& text) {
    ordered_json messages;
    try {
        messages = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError("invalid prompt JSON: " + std::string(e.what()));
    }
    ChatPrompt prompt;
    for (const auto& m : messages)
        prompt.messages.push_back(
            {msg_role_from_string(m.at("role").get<std::string>()),
             m.at("content").get<std::string>()});
    return prompt;
}

}  // namespace avex
