#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avex/corpus.hpp"
#include "avex/schema.hpp"

namespace avex {

enum class MsgRole { system, user, assistant };

std::string to_string(MsgRole role);
MsgRole msg_role_from_string(const std::string& s);

struct ChatMessage {
    MsgRole msg_role = MsgRole::user;
    std::string content;   // non-empty

    bool operator==(const ChatMessage&) const = default;
};

struct ChatPrompt {
    std::vector<ChatMessage> messages;

    bool operator==(const ChatPrompt&) const = default;
};

enum class Representation { list, textual, compact, json };

std::string to_string(Representation r);
Representation representation_from_string(const std::string& s);

struct PromptDesign {
    Representation representation = Representation::json;
    size_t example_value_count = 0;    // must be 0 for the list representation
    size_t demonstration_count = 0;
};

// The template strings are configuration, not code. Defaults ship with the
// binary; a directory of .txt files can override any of them.
struct PromptTemplates {
    std::string role_plain;
    std::string role_with_schema;      // placeholder {representation}
    std::string task_description;      // placeholders {attribute_section}
    std::string task_input;            // placeholder {title}
    std::string attribute_section_list;     // placeholder {representation}
    std::string attribute_section_schema;   // fixed text for injected designs
    std::string description_request;   // placeholders {attribute}, {category}

    static PromptTemplates defaults();
    static PromptTemplates load_dir(const std::filesystem::path& dir);
};

// Renders the target-schema block. For `json` the output parses as a JSON
// document whose property names equal the schema's attribute names. At most
// `example_value_count` example values are rendered per attribute;
// `list` carries names only and rejects a non-zero count.
std::string render_representation(const CategorySchema& schema, Representation representation,
                                  size_t example_value_count);

// Ground truth rendered the way a model is asked to answer: a JSON object
// with one key per schema attribute, absent values written as "n/a".
std::string render_truth_json(const CategorySchema& schema,
                              const std::map<std::string, std::string>& truth);

// [system(role), user(task description + task input)].
ChatPrompt build_zero_shot(const PromptDesign& design, const CategorySchema& schema,
                           const ProductOffer& offer,
                           const PromptTemplates& templates = PromptTemplates::defaults());

// [system, user(task description)] ++ per demo [user(title), assistant(truth
// JSON)] ++ [user(task description repeated + task input)]: 3 + 2n messages.
ChatPrompt build_few_shot(const PromptDesign& design, const CategorySchema& schema,
                          const ProductOffer& offer, const std::vector<ProductOffer>& demos,
                          const PromptTemplates& templates = PromptTemplates::defaults());

std::string prompt_to_json(const ChatPrompt& prompt);
ChatPrompt prompt_from_json(const std::string& text);

}  // namespace avex
