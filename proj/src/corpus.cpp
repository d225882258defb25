#include "avex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avex/errors.hpp"
#include "avex/parse.hpp"
#include "avex/random.hpp"

namespace avex {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void finish_dataset(Dataset& d) {
    std::set<std::string> ids;
    for (const auto& o : d.offers) {
        if (!ids.insert(o.offer_id).second)
            throw ParseError("duplicate offer id: " + o.offer_id);
        d.categories.insert(o.category);
    }
}

}  // namespace

std::vector<const ProductOffer*> Dataset::offers_in(const std::string& category) const {
    std::vector<const ProductOffer*> out;
    for (const auto& o : offers)
        if (o.category == category) out.push_back(&o);
    return out;
}

// OA-Mine style layout: one <category>.jsonl file per category, each line a
// JSON object with "title", an optional "id"/"asin", and annotations either
// as a flat "truth" map or an OA-Mine "target_scores" map whose entries are
// {value: score}; the highest-scoring value wins, ties by lexical order.
Dataset import_oamine(const std::filesystem::path& dir) {
    Dataset d;
    d.name = "oa-mine";
    if (!std::filesystem::is_directory(dir))
        throw IoError("not a readable directory: " + dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        std::string category = file.stem().string();
        std::ifstream in(file);
        if (!in) throw IoError("cannot open " + file.string());
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            ordered_json j;
            try {
                j = ordered_json::parse(line);
            } catch (const std::exception& e) {
                throw ParseError(file.string() + ":" + std::to_string(lineno) +
                                 ": invalid JSON: " + e.what());
            }
            ProductOffer offer;
            offer.category = category;
            if (j.contains("id"))
                offer.offer_id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
            else if (j.contains("asin"))
                offer.offer_id = j["asin"].get<std::string>();
            else
                offer.offer_id = category + "-" + std::to_string(lineno);
            offer.title = trim(j.value("title", ""));
            if (offer.title.empty())
                throw ParseError(file.string() + ":" + std::to_string(lineno) + ": missing title");

            const char* key = j.contains("truth") ? "truth" : "target_scores";
            if (j.contains(key)) {
                for (auto& [attr, val] : j[key].items()) {
                    std::optional<std::string> best;
                    if (val.is_string()) {
                        best = normalize_value(val.get<std::string>());
                    } else if (val.is_object()) {
                        double best_score = -1;
                        for (auto& [candidate, score] : val.items()) {
                            double s = score.is_number() ? score.get<double>() : 1.0;
                            auto norm = normalize_value(candidate);
                            if (!norm) continue;
                            if (s > best_score || (s == best_score && (!best || *norm < *best))) {
                                best_score = s;
                                best = norm;
                            }
                        }
                    } else {
                        throw ParseError(file.string() + ":" + std::to_string(lineno) +
                                         ": unsupported annotation for attribute " + attr);
                    }
                    if (best) offer.truth[attr] = *best;
                }
            }
            d.offers.push_back(std::move(offer));
        }
    }
    finish_dataset(d);
    return d;
}

// Tab-separated "title<TAB>attribute<TAB>value[<TAB>category]" lines.
// Offers are formed by grouping triples with byte-identical titles; empty or
// NULL values are dropped, exact duplicate pairs stored once.
Dataset import_ae110k(const std::filesystem::path& file) {
    Dataset d;
    d.name = "ae-110k";
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());

    std::map<std::string, size_t> by_title;  // title -> index into d.offers
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() < 3 || fields.size() > 4)
            throw ParseError(file.string() + ":" + std::to_string(lineno) +
                             ": expected 3 or 4 tab-separated fields, got " +
                             std::to_string(fields.size()));
        std::string title = trim(fields[0]);
        std::string attr = trim(fields[1]);
        std::string raw_value = trim(fields[2]);
        std::string category = fields.size() == 4 ? trim(fields[3]) : "default";
        if (title.empty())
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": empty title");
        if (raw_value == "NULL" || raw_value == "null") continue;
        auto value = normalize_value(raw_value);

        auto it = by_title.find(title);
        if (it == by_title.end()) {
            ProductOffer offer;
            offer.offer_id = "ae-" + std::to_string(d.offers.size() + 1);
            offer.category = category;
            offer.title = title;
            d.offers.push_back(std::move(offer));
            it = by_title.emplace(title, d.offers.size() - 1).first;
        }
        if (value && !attr.empty()) d.offers[it->second].truth[attr] = *value;
    }
    finish_dataset(d);
    return d;
}

std::string canonical_line(const ProductOffer& offer) {
    ordered_json j;
    j["id"] = offer.offer_id;
    j["category"] = offer.category;
    j["title"] = offer.title;
    ordered_json truth = ordered_json::object();
    for (const auto& [attr, value] : offer.truth) truth[attr] = value;
    j["truth"] = truth;
    return j.dump();
}

Dataset load_canonical(const std::filesystem::path& file) {
    Dataset d;
    d.name = file.stem().string();
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) +
                             ": invalid JSON: " + e.what());
        }
        ProductOffer offer;
        offer.offer_id = j.at("id").get<std::string>();
        offer.category = j.at("category").get<std::string>();
        offer.title = j.at("title").get<std::string>();
        for (auto& [attr, value] : j.at("truth").items())
            offer.truth[attr] = value.get<std::string>();
        d.offers.push_back(std::move(offer));
    }
    finish_dataset(d);
    return d;
}

void save_canonical(const Dataset& d, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    for (const auto& offer : d.offers) out << canonical_line(offer) << "\n";
}

namespace {

// Attributes of an offer, namespaced by category.
std::set<std::string> offer_attrs(const ProductOffer& o) {
    std::set<std::string> out;
    for (const auto& [attr, _] : o.truth) out.insert(o.category + "/" + attr);
    return out;
}

std::set<std::string> side_attrs(const std::vector<const ProductOffer*>& side) {
    std::set<std::string> out;
    for (const auto* o : side)
        for (const auto& a : offer_attrs(*o)) out.insert(a);
    return out;
}

}  // namespace

SplitBundle split_dataset(const Dataset& d, uint64_t seed) {
    if (d.empty()) throw SplitError("cannot split an empty dataset");

    SplitBundle bundle;
    bundle.seed = seed;
    bundle.train_large.name = d.name + "-train-large";
    bundle.test.name = d.name + "-test";

    // Attribute multiplicity across the whole dataset, for repair feasibility.
    std::map<std::string, size_t> attr_offer_count;
    for (const auto& o : d.offers)
        for (const auto& a : offer_attrs(o)) ++attr_offer_count[a];
    std::set<std::string> flagged;
    for (const auto& [attr, count] : attr_offer_count)
        if (count < 2) flagged.insert(attr);

    std::vector<std::string> categories(d.categories.begin(), d.categories.end());
    std::map<std::string, bool> in_train;  // offer_id -> side

    for (const auto& category : categories) {
        auto offers = d.offers_in(category);
        size_t n = offers.size();
        if (n < 4)
            throw SplitError("category '" + category + "' has only " + std::to_string(n) +
                             " offers; at least 4 required for a 75:25 split");

        // Shuffle canonical indices, then cut. Train rounds up on .5 ties.
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        Rng rng = stratum_rng(seed, category);
        rng.shuffle(idx);
        size_t train_n = static_cast<size_t>(std::floor(0.75 * n + 0.5));
        if (train_n == n) train_n = n - 1;  // both sides must be non-empty

        std::vector<const ProductOffer*> train, test;
        for (size_t i = 0; i < n; ++i)
            (i < train_n ? train : test).push_back(offers[idx[i]]);

        // Repair: for every attribute missing on one side, swap the
        // smallest-index offer carrying it against a partner from the other
        // side whose removal keeps that side's coverage intact.
        auto canonical_order = [](std::vector<const ProductOffer*>& v) {
            std::sort(v.begin(), v.end());  // pointers into d.offers, so
        };                                  // address order = canonical order
        canonical_order(train);
        canonical_order(test);

        // Budgeted so a pathological fixture cannot loop forever.
        size_t budget = 4 * attr_offer_count.size() + 16;
        while (budget-- > 0) {
            auto train_set = side_attrs(train);
            auto test_set = side_attrs(test);
            std::string missing;
            bool missing_in_test = false;
            for (const auto& attr : train_set)
                if (!flagged.count(attr) && !test_set.count(attr)) {
                    missing = attr;
                    missing_in_test = true;
                    break;
                }
            if (missing.empty())
                for (const auto& attr : test_set)
                    if (!flagged.count(attr) && !train_set.count(attr)) {
                        missing = attr;
                        break;
                    }
            if (missing.empty()) break;

            auto& donor = missing_in_test ? train : test;
            auto& receiver = missing_in_test ? test : train;
            auto other_donor_coverage = [&](const ProductOffer* leaving, const std::string& a) {
                for (const auto* o : donor)
                    if (o != leaving && offer_attrs(*o).count(a)) return true;
                return false;
            };

            // Smallest-index carrier whose other attributes stay covered on
            // the donor side after it leaves; fall back to the first carrier.
            const ProductOffer* moved = nullptr;
            for (const auto* o : donor) {
                if (!offer_attrs(*o).count(missing)) continue;
                bool safe = true;
                for (const auto& a : offer_attrs(*o))
                    if (a != missing && !flagged.count(a) && !other_donor_coverage(o, a)) {
                        safe = false;
                        break;
                    }
                if (safe) {
                    moved = o;
                    break;
                }
            }
            if (!moved)
                for (const auto* o : donor)
                    if (offer_attrs(*o).count(missing)) {
                        moved = o;
                        break;
                    }
            if (!moved) break;

            // Swap partner keeps the sizes intact: smallest-index receiver
            // offer whose attributes remain covered on the receiver side
            // (counting the incoming offer).
            const ProductOffer* partner = nullptr;
            for (const auto* o : receiver) {
                bool safe = true;
                for (const auto& a : offer_attrs(*o)) {
                    if (flagged.count(a)) continue;
                    bool still_in_receiver = offer_attrs(*moved).count(a) > 0;
                    for (const auto* r : receiver)
                        if (r != o && offer_attrs(*r).count(a)) still_in_receiver = true;
                    if (!still_in_receiver) {
                        safe = false;
                        break;
                    }
                }
                if (safe) {
                    partner = o;
                    break;
                }
            }
            if (!partner && !receiver.empty()) partner = receiver.front();

            donor.erase(std::find(donor.begin(), donor.end(), moved));
            receiver.push_back(moved);
            if (partner) {
                receiver.erase(std::find(receiver.begin(), receiver.end(), partner));
                donor.push_back(partner);
            }
            canonical_order(donor);
            canonical_order(receiver);
        }

        for (const auto* o : train) in_train[o->offer_id] = true;
        for (const auto* o : test) in_train[o->offer_id] = false;
    }

    // Emit in canonical dataset order.
    for (const auto& o : d.offers)
        (in_train.at(o.offer_id) ? bundle.train_large : bundle.test).offers.push_back(o);
    finish_dataset(bundle.train_large);
    finish_dataset(bundle.test);
    bundle.uncoverable_attributes.assign(flagged.begin(), flagged.end());

    bundle.train_small = subsample_small(bundle.train_large, seed);
    bundle.train_small.name = d.name + "-train-small";
    return bundle;
}

Dataset subsample_small(const Dataset& train, uint64_t seed) {
    if (train.empty()) throw SplitError("cannot subsample an empty dataset");
    Dataset small;
    small.name = train.name + "-small";

    std::set<std::string> keep;
    for (const auto& category : train.categories) {
        auto offers = train.offers_in(category);
        size_t n = offers.size();
        size_t m = static_cast<size_t>(std::floor(0.2 * n + 0.5));
        if (m < 1) m = 1;
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        Rng rng = stratum_rng(seed ^ 0x20a11ull, category);
        rng.shuffle(idx);
        for (size_t i = 0; i < m; ++i) keep.insert(offers[idx[i]]->offer_id);
    }
    for (const auto& o : train.offers)
        if (keep.count(o.offer_id)) small.offers.push_back(o);
    finish_dataset(small);
    return small;
}

DatasetStats dataset_stats(const Dataset& d) {
    DatasetStats s;
    s.offers = d.offers.size();
    s.unique_categories = d.categories.size();
    std::set<std::string> attrs;
    std::set<std::string> pairs;
    for (const auto& o : d.offers) {
        for (const auto& [attr, value] : o.truth) {
            attrs.insert(o.category + "/" + attr);
            pairs.insert(o.category + "/" + attr + "\x1f" + value);
            ++s.av_pairs;
        }
    }
    s.unique_attributes = attrs.size();
    s.unique_av_pairs = pairs.size();
    return s;
}

}  // namespace avex
