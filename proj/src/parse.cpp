#include "avex/parse.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"
#include "avex/schema.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

std::string to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::ok: return "ok";
        case ParseStatus::repaired: return "repaired";
        case ParseStatus::failed: return "failed";
    }
    return "failed";
}

ParseStatus parse_status_from_string(const std::string& s) {
    if (s == "ok") return ParseStatus::ok;
    if (s == "repaired") return ParseStatus::repaired;
    if (s == "failed") return ParseStatus::failed;
    throw InvalidArgument("unknown parse status: " + s);
}

std::optional<std::string> normalize_value(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = true;   // leading whitespace is dropped
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(c));
            in_space = false;
        }
    }
    if (out.empty()) return std::nullopt;
    if (out.size() == 3 && (out[0] == 'n' || out[0] == 'N') && out[1] == '/' &&
        (out[2] == 'a' || out[2] == 'A'))
        return std::nullopt;
    return out;
}

namespace {

std::string scalar_to_string(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Finds the first balanced {...} block that parses as a JSON object.
std::optional<ordered_json> first_json_object(const std::string& text) {
    for (size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    auto candidate =
                        ordered_json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!candidate.is_discarded() && candidate.is_object()) return candidate;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace

ExtractionResult parse_response(const std::string& text, const CategorySchema& schema) {
    ExtractionResult result;
    result.parse_status = ParseStatus::failed;

    // Exact parse first: the whole (trimmed) text is one JSON object.
    auto trimmed_begin = text.find_first_not_of(" \t\r\n");
    auto trimmed_end = text.find_last_not_of(" \t\r\n");
    ordered_json doc;
    bool repaired = false;
    if (trimmed_begin != std::string::npos) {
        std::string trimmed = text.substr(trimmed_begin, trimmed_end - trimmed_begin + 1);
        auto direct = ordered_json::parse(trimmed, nullptr, false);
        if (!direct.is_discarded() && direct.is_object()) {
            doc = std::move(direct);
        } else {
            auto extracted = first_json_object(text);
            if (!extracted) return result;   // failed, never a throw
            doc = std::move(*extracted);
            repaired = true;
        }
    } else {
        return result;
    }

    for (auto& [key, value] : doc.items()) {
        if (!schema.find(key)) {
            result.dropped_keys.push_back(key);
            continue;
        }
        if (value.is_null()) {
            result.values[key] = std::nullopt;
        } else if (value.is_object() || value.is_array()) {
            // Structured values are flattened to their JSON text.
            result.values[key] = normalize_value(value.dump());
        } else {
            result.values[key] = normalize_value(scalar_to_string(value));
        }
    }
    result.parse_status = repaired ? ParseStatus::repaired : ParseStatus::ok;
    return result;
}

}  // namespace avex
