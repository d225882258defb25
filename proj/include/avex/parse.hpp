#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avex {

struct CategorySchema;

enum class ParseStatus { ok, repaired, failed };

std::string to_string(ParseStatus s);
ParseStatus parse_status_from_string(const std::string& s);

// Validated model output for one offer. Keys are always a subset of the
// schema's attribute names; a missing entry in `values` means "no value".
struct ExtractionResult {
    std::string offer_id;
    std::map<std::string, std::optional<std::string>> values;
    ParseStatus parse_status = ParseStatus::failed;
    std::vector<std::string> dropped_keys;   // model keys outside the schema
};

// Trims outer whitespace, collapses internal whitespace runs to one space.
// Empty or "n/a" (case-insensitive) after trimming means "no value".
// Case is preserved. Idempotent.
std::optional<std::string> normalize_value(const std::string& raw);

// Total function: every input yields a result with a status, never a throw.
// Strips surrounding prose / code fences (-> repaired), maps "n/a" and null
// to no-value, drops keys outside the schema, stringifies non-string scalars.
ExtractionResult parse_response(const std::string& text, const CategorySchema& schema);

}  // namespace avex
