#include "avex/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::NN: return "NN";
        case Outcome::NV: return "NV";
        case Outcome::VN: return "VN";
        case Outcome::VC: return "VC";
        case Outcome::VW: return "VW";
    }
    return "NN";
}

void EvalCounts::add(Outcome o) {
    switch (o) {
        case Outcome::NN: ++nn; break;
        case Outcome::NV: ++nv; break;
        case Outcome::VN: ++vn; break;
        case Outcome::VC: ++vc; break;
        case Outcome::VW: ++vw; break;
    }
}

EvalCounts& EvalCounts::operator+=(const EvalCounts& other) {
    nn += other.nn;
    nv += other.nv;
    vn += other.vn;
    vc += other.vc;
    vw += other.vw;
    return *this;
}

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

Outcome categorize(const std::optional<std::string>& truth,
                   const std::optional<std::string>& predicted, bool case_insensitive) {
    if (!truth && !predicted) return Outcome::NN;
    if (!truth) return Outcome::NV;
    if (!predicted) return Outcome::VN;
    bool match = case_insensitive ? lowercase(*truth) == lowercase(*predicted)
                                  : *truth == *predicted;
    return match ? Outcome::VC : Outcome::VW;
}

Metrics compute_metrics(const EvalCounts& c) {
    Metrics m;
    long long p_den = c.nv + c.vc + c.vw;
    long long r_den = c.vn + c.vc + c.vw;
    if (p_den > 0) m.precision = static_cast<double>(c.vc) / static_cast<double>(p_den);
    if (r_den > 0) m.recall = static_cast<double>(c.vc) / static_cast<double>(r_den);
    // 2PR/(P+R) with P = vc/p_den, R = vc/r_den simplifies to 2vc/(p_den+r_den).
    if (c.vc > 0) m.f1 = 2.0 * static_cast<double>(c.vc) / static_cast<double>(p_den + r_den);
    return m;
}

EvalReport evaluate_run(const std::vector<ExtractionResult>& results, const Dataset& test,
                        const SchemaRegistry& schemas, bool case_insensitive) {
    std::map<std::string, const ProductOffer*> by_id;
    for (const auto& offer : test.offers) by_id[offer.offer_id] = &offer;

    std::map<std::string, const ExtractionResult*> result_by_id;
    for (const auto& r : results) {
        if (!by_id.count(r.offer_id))
            throw InvalidArgument("result for unknown offer '" + r.offer_id + "'");
        result_by_id[r.offer_id] = &r;
    }

    EvalReport report;
    report.evaluated_offers = test.offers.size();
    static const ExtractionResult empty_result;
    for (const auto& offer : test.offers) {
        auto schema_it = schemas.find(offer.category);
        if (schema_it == schemas.end())
            throw NotFoundError("no schema for category '" + offer.category + "'");
        const ExtractionResult* result;
        auto rit = result_by_id.find(offer.offer_id);
        if (rit == result_by_id.end()) {
            result = &empty_result;   // missing offers score as empty predictions
            ++report.missing_offers;
        } else {
            result = rit->second;
        }

        for (const auto& attr : schema_it->second.attributes) {
            std::optional<std::string> truth;
            auto tit = offer.truth.find(attr.name);
            if (tit != offer.truth.end()) truth = tit->second;
            std::optional<std::string> predicted;
            auto pit = result->values.find(attr.name);
            if (pit != result->values.end()) predicted = pit->second;

            Outcome outcome = categorize(truth, predicted, case_insensitive);
            report.counts.add(outcome);
            report.per_category[offer.category].first.add(outcome);
            report.per_attribute[offer.category + "/" + attr.name].first.add(outcome);
        }
    }

    report.overall = compute_metrics(report.counts);
    for (auto& [_, entry] : report.per_category) entry.second = compute_metrics(entry.first);
    for (auto& [_, entry] : report.per_attribute) entry.second = compute_metrics(entry.first);
    return report;
}

namespace {

ordered_json counts_json(const EvalCounts& c) {
    ordered_json j;
    j["nn"] = c.nn;
    j["nv"] = c.nv;
    j["vn"] = c.vn;
    j["vc"] = c.vc;
    j["vw"] = c.vw;
    return j;
}

ordered_json metrics_json(const Metrics& m) {
    ordered_json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    ordered_json j;
    j["counts"] = counts_json(report.counts);
    j["overall"] = metrics_json(report.overall);
    j["evaluated_offers"] = report.evaluated_offers;
    j["missing_offers"] = report.missing_offers;
    j["per_category"] = ordered_json::object();
    for (const auto& [category, entry] : report.per_category) {
        j["per_category"][category]["counts"] = counts_json(entry.first);
        j["per_category"][category]["metrics"] = metrics_json(entry.second);
    }
    j["per_attribute"] = ordered_json::object();
    for (const auto& [attr, entry] : report.per_attribute) {
        j["per_attribute"][attr]["counts"] = counts_json(entry.first);
        j["per_attribute"][attr]["metrics"] = metrics_json(entry.second);
    }
    return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-28s %6s %6s %6s %6s %6s %8s %8s %8s\n", "scope", "NN",
                  "NV", "VN", "VC", "VW", "P", "R", "F1");
    out << line;
    auto row = [&](const std::string& scope, const EvalCounts& c, const Metrics& m) {
        std::snprintf(line, sizeof(line),
                      "%-28s %6lld %6lld %6lld %6lld %6lld %8.4f %8.4f %8.4f\n", scope.c_str(),
                      c.nn, c.nv, c.vn, c.vc, c.vw, m.precision, m.recall, m.f1);
        out << line;
    };
    row("overall", report.counts, report.overall);
    for (const auto& [category, entry] : report.per_category)
        row(category, entry.first, entry.second);
    return out.str();
}

// -------------------------------------------------------- dict baseline

ValueDictionary dict_build(const Dataset& train) {
    ValueDictionary d;
    for (const auto& offer : train.offers)
        for (const auto& [attr, value] : offer.truth)
            d.values[{offer.category, attr}].insert(value);
    return d;
}

namespace {

bool is_token_char(unsigned char c) { return std::isalnum(c) != 0; }

// Case-insensitive whole-token substring search: the match must not be
// flanked by alphanumeric characters on either side.
bool whole_token_match(const std::string& title_lower, const std::string& value_lower) {
    if (value_lower.empty()) return false;
    for (size_t pos = title_lower.find(value_lower); pos != std::string::npos;
         pos = title_lower.find(value_lower, pos + 1)) {
        bool left_ok = pos == 0 || !is_token_char(title_lower[pos - 1]);
        size_t end = pos + value_lower.size();
        bool right_ok = end >= title_lower.size() || !is_token_char(title_lower[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace

ExtractionResult dict_extract(const std::string& title, const std::string& category,
                              const ValueDictionary& d, const SchemaRegistry& schemas) {
    auto schema_it = schemas.find(category);
    if (schema_it == schemas.end())
        throw NotFoundError("no schema for category '" + category + "'");

    ExtractionResult result;
    result.parse_status = ParseStatus::ok;
    std::string title_lower = lowercase(title);
    for (const auto& attr : schema_it->second.attributes) {
        auto vit = d.values.find({category, attr.name});
        if (vit == d.values.end()) continue;
        const std::string* best = nullptr;
        for (const auto& value : vit->second) {   // canonical (sorted) order
            if (!whole_token_match(title_lower, lowercase(value))) continue;
            if (!best || value.size() > best->size()) best = &value;  // longest wins, ties keep
        }                                                             // the earlier value
        if (best) result.values[attr.name] = *best;
    }
    return result;
}

SeenRatio seen_ratio(const std::map<std::string, std::vector<std::string>>& sampled_by_attribute,
                     const Dataset& test, const std::string& category) {
    SeenRatio ratio;
    std::set<std::string> unique_sampled;
    for (const auto& [_, values] : sampled_by_attribute)
        unique_sampled.insert(values.begin(), values.end());
    ratio.unique_sampled = unique_sampled.size();

    std::set<std::pair<std::string, std::string>> test_pairs;
    for (const auto* offer : test.offers_in(category))
        for (const auto& [attr, value] : offer->truth) test_pairs.emplace(attr, value);
    if (test_pairs.empty()) return ratio;

    size_t seen = 0;
    for (const auto& [attr, value] : test_pairs) {
        auto it = sampled_by_attribute.find(attr);
        if (it == sampled_by_attribute.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), value) != it->second.end()) ++seen;
    }
    ratio.seen_fraction = static_cast<double>(seen) / static_cast<double>(test_pairs.size());
    return ratio;
}

}  // namespace avex
