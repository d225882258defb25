#include <doctest.h>

#include "avex/errors.hpp"
#include "avex/metrics.hpp"
#include "avex/random.hpp"
#include "fixtures.hpp"

using namespace avex;

TEST_CASE("categorize covers the five cases") {
    CHECK(categorize(std::nullopt, std::nullopt) == Outcome::NN);
    CHECK(categorize(std::nullopt, "Blue") == Outcome::NV);
    CHECK(categorize("Red", std::nullopt) == Outcome::VN);
    CHECK(categorize("Red", "Red") == Outcome::VC);
    CHECK(categorize("Red", "Blue") == Outcome::VW);

    // Exact match is case-sensitive by default; the flag relaxes it.
    CHECK(categorize("Red", "red") == Outcome::VW);
    CHECK(categorize("Red", "red", true) == Outcome::VC);
}

TEST_CASE("compute_metrics canonical cases") {
    CHECK(compute_metrics({0, 0, 0, 5, 0}).precision == 1.0);
    CHECK(compute_metrics({0, 0, 0, 5, 0}).recall == 1.0);
    CHECK(compute_metrics({0, 0, 0, 5, 0}).f1 == 1.0);

    Metrics zero = compute_metrics({0, 0, 0, 0, 0});
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);

    Metrics m = compute_metrics({0, 1, 1, 3, 1});
    CHECK(m.precision == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(m.f1 == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("f1 is zero exactly when vc is zero") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        EvalCounts c{static_cast<long long>(rng.below(10)), static_cast<long long>(rng.below(10)),
                     static_cast<long long>(rng.below(10)), static_cast<long long>(rng.below(10)),
                     static_cast<long long>(rng.below(10))};
        Metrics m = compute_metrics(c);
        CHECK((m.f1 == 0.0) == (c.vc == 0));
        CHECK(m.precision >= 0.0);
        CHECK(m.precision <= 1.0);
        CHECK(m.recall >= 0.0);
        CHECK(m.recall <= 1.0);
        CHECK(m.f1 >= 0.0);
        CHECK(m.f1 <= 1.0);
    }
}

namespace {

SchemaRegistry toy_registry(const Dataset& d) {
    SchemaRegistry registry;
    for (const auto& category : d.categories) registry[category] = build_schema(d, category);
    return registry;
}

}  // namespace

TEST_CASE("evaluate_run: perfect results give F1 = 1") {
    Dataset d = fixtures::toy_dataset();
    SchemaRegistry registry = toy_registry(d);
    std::vector<ExtractionResult> results;
    for (const auto& offer : d.offers) {
        ExtractionResult r;
        r.offer_id = offer.offer_id;
        r.parse_status = ParseStatus::ok;
        for (const auto& [attr, value] : offer.truth) r.values[attr] = value;
        results.push_back(std::move(r));
    }
    EvalReport report = evaluate_run(results, d, registry);
    CHECK(report.overall.f1 == 1.0);
    CHECK(report.counts.vc == 300);
    CHECK(report.counts.total() == 300);
}

TEST_CASE("evaluate_run: empty results are all VN/NN with zero recall") {
    Dataset d = fixtures::toy_dataset();
    SchemaRegistry registry = toy_registry(d);
    EvalReport report = evaluate_run({}, d, registry);
    CHECK(report.overall.f1 == 0.0);
    CHECK(report.overall.recall == 0.0);
    CHECK(report.counts.vn == 300);
    CHECK(report.missing_offers == 60);
}

TEST_CASE("evaluate_run slot count is schema-driven regardless of predictions") {
    Dataset d = fixtures::toy_dataset();
    SchemaRegistry registry = toy_registry(d);
    // One result with garbage keys already dropped by the parser, others absent.
    ExtractionResult r;
    r.offer_id = d.offers[0].offer_id;
    r.parse_status = ParseStatus::ok;
    r.values["Brand"] = "wrong";
    EvalReport report = evaluate_run({r}, d, registry);
    long long expected_slots = 0;
    for (const auto& offer : d.offers)
        expected_slots += static_cast<long long>(registry.at(offer.category).attributes.size());
    CHECK(report.counts.total() == expected_slots);
}

TEST_CASE("evaluate_run rejects unknown offer ids naming them") {
    Dataset d = fixtures::toy_dataset();
    SchemaRegistry registry = toy_registry(d);
    ExtractionResult r;
    r.offer_id = "ghost-01";
    try {
        evaluate_run({r}, d, registry);
        FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("ghost-01") != std::string::npos);
    }
}

TEST_CASE("evaluate_run micro-aggregation pools counts across categories") {
    Dataset d = fixtures::toy_dataset();
    SchemaRegistry registry = toy_registry(d);
    std::vector<ExtractionResult> results;
    for (const auto& offer : d.offers) {
        ExtractionResult r;
        r.offer_id = offer.offer_id;
        r.parse_status = ParseStatus::ok;
        for (const auto& [attr, value] : offer.truth)
            r.values[attr] = offer.category == "widget" ? "always-wrong" : value;
        results.push_back(std::move(r));
    }
    EvalReport report = evaluate_run(results, d, registry);
    CHECK(report.counts.vw == 100);
    CHECK(report.counts.vc == 200);
    // Micro F1 pools counts first: P = R = 200/300.
    CHECK(report.overall.precision == doctest::Approx(200.0 / 300.0).epsilon(1e-15));
    CHECK(report.per_category.at("widget").second.f1 == 0.0);
    CHECK(report.per_category.at("gadget").second.f1 == 1.0);
}

TEST_CASE("dict baseline: longest whole-token match wins") {
    Dataset train;
    train.name = "train";
    train.offers.push_back(fixtures::make_offer("t1", "c", "Pro 1000 brush",
                                                {{"Model", "Pro"}, {"Brand", "X"}}));
    train.offers.push_back(fixtures::make_offer("t2", "c", "Pro 1000 deluxe brush",
                                                {{"Model", "Pro 1000"}}));
    train.categories.insert("c");
    ValueDictionary dict = dict_build(train);
    SchemaRegistry registry = toy_registry(train);

    auto r = dict_extract("Super Pro 1000 cleaning kit", "c", dict, registry);
    CHECK(r.values.at("Model") == "Pro 1000");        // longest match
    CHECK(r.values.count("Brand") == 0);              // "X" not present in the title

    // Whole-token: "X" does not match inside "Xylophone".
    auto no_match = dict_extract("Xylophone accessories", "c", dict, registry);
    CHECK(no_match.values.count("Brand") == 0);

    // Case-insensitive matching.
    auto ci = dict_extract("SUPER PRO 1000 KIT", "c", dict, registry);
    CHECK(ci.values.at("Model") == "Pro 1000");

    // Title sharing no tokens with the dictionary -> empty result.
    auto empty = dict_extract("Completely unrelated thing", "c", dict, registry);
    CHECK(empty.values.empty());
}

TEST_CASE("dict predictions are always members of the dictionary") {
    Dataset d = fixtures::toy_dataset();
    ValueDictionary dict = dict_build(d);
    SchemaRegistry registry = toy_registry(d);
    for (const auto& offer : d.offers) {
        auto r = dict_extract(offer.title, offer.category, dict, registry);
        for (const auto& [attr, value] : r.values) {
            if (!value) continue;
            const auto& known = dict.values.at({offer.category, attr});
            CHECK(known.count(*value) == 1);
        }
    }
}

TEST_CASE("dict baseline achieves F1 = 1 on the toy corpus whose titles embed all values") {
    Dataset d = fixtures::toy_dataset();
    ValueDictionary dict = dict_build(d);
    SchemaRegistry registry = toy_registry(d);
    std::vector<ExtractionResult> results;
    for (const auto& offer : d.offers) {
        auto r = dict_extract(offer.title, offer.category, dict, registry);
        r.offer_id = offer.offer_id;
        results.push_back(std::move(r));
    }
    EvalReport report = evaluate_run(results, d, registry);
    CHECK(report.overall.f1 == 1.0);
}

TEST_CASE("seen_ratio boundary cases and counting") {
    Dataset test;
    test.name = "test";
    test.offers.push_back(fixtures::make_offer("1", "c", "First test offer",
                                               {{"A", "x"}, {"B", "y"}}));
    test.offers.push_back(fixtures::make_offer("2", "c", "Second test offer", {{"A", "z"}}));
    test.categories.insert("c");

    // Superset of all test values -> 1.0.
    std::map<std::string, std::vector<std::string>> super = {{"A", {"x", "z", "extra"}},
                                                             {"B", {"y"}}};
    SeenRatio s = seen_ratio(super, test, "c");
    CHECK(s.seen_fraction == 1.0);
    CHECK(s.unique_sampled == 4);

    // Disjoint -> 0.0.
    std::map<std::string, std::vector<std::string>> disjoint = {{"A", {"q"}}, {"B", {"w"}}};
    CHECK(seen_ratio(disjoint, test, "c").seen_fraction == 0.0);

    // Partial: 1 of 3 distinct pairs seen; membership is per-attribute.
    std::map<std::string, std::vector<std::string>> partial = {{"A", {"x", "y"}}};
    CHECK(seen_ratio(partial, test, "c").seen_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}
