#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avex/corpus.hpp"
#include "avex/parse.hpp"
#include "avex/schema.hpp"

namespace avex {

// Five-case categorization of one (truth, prediction) slot.
enum class Outcome { NN, NV, VN, VC, VW };

std::string to_string(Outcome o);

struct EvalCounts {
    long long nn = 0, nv = 0, vn = 0, vc = 0, vw = 0;

    long long total() const { return nn + nv + vn + vc + vw; }
    void add(Outcome o);
    EvalCounts& operator+=(const EvalCounts& other);
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// (absent, absent) -> NN; (absent, v) -> NV; (v, absent) -> VN;
// (v, v) -> VC; (v, v') -> VW. Inputs must be pre-normalized.
Outcome categorize(const std::optional<std::string>& truth,
                   const std::optional<std::string>& predicted,
                   bool case_insensitive = false);

// P = VC/(NV+VC+VW), R = VC/(VN+VC+VW), F1 = 2PR/(P+R); zero denominators
// yield 0. F1 is evaluated as 2*VC/(P_den + R_den), which equals 2PR/(P+R).
Metrics compute_metrics(const EvalCounts& c);

struct EvalReport {
    EvalCounts counts;
    Metrics overall;
    std::map<std::string, std::pair<EvalCounts, Metrics>> per_category;
    std::map<std::string, std::pair<EvalCounts, Metrics>> per_attribute;  // "category/attr"
    size_t evaluated_offers = 0;
    size_t missing_offers = 0;   // test offers with no result: scored as empty predictions
};

// One slot per (test offer, schema attribute). Results for unknown offer ids
// are an error; test offers without a result are scored as if the model
// predicted nothing. Micro aggregation: counts pooled before metrics.
EvalReport evaluate_run(const std::vector<ExtractionResult>& results, const Dataset& test,
                        const SchemaRegistry& schemas, bool case_insensitive = false);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

// -------------------------------------------------------- dict baseline

struct ValueDictionary {
    // (category, attribute) -> known values, normalized, sorted.
    std::map<std::pair<std::string, std::string>, std::set<std::string>> values;
};

ValueDictionary dict_build(const Dataset& train);

// Scans the title for dictionary values as case-insensitive whole-token
// substrings; longest match wins, ties by lowest canonical value order.
ExtractionResult dict_extract(const std::string& title, const std::string& category,
                              const ValueDictionary& d, const SchemaRegistry& schemas);

// ------------------------------------------------------ seen-value ratio

struct SeenRatio {
    size_t unique_sampled = 0;
    double seen_fraction = 0.0;   // of distinct test (attribute, value) pairs
};

SeenRatio seen_ratio(const std::map<std::string, std::vector<std::string>>& sampled_by_attribute,
                     const Dataset& test, const std::string& category);

}  // namespace avex
