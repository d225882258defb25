#include <doctest.h>

#include <cmath>
#include <set>

#include "avex/demos.hpp"
#include "avex/errors.hpp"
#include "fixtures.hpp"

using namespace avex;

namespace {

DemoPool synthetic_pool(const std::vector<EmbeddingVector>& vectors,
                        const std::vector<std::map<std::string, std::string>>& truths = {}) {
    DemoPool pool;
    pool.category = "c";
    for (size_t i = 0; i < vectors.size(); ++i) {
        auto truth = i < truths.size() ? truths[i] : std::map<std::string, std::string>{};
        pool.entries.emplace_back(
            fixtures::make_offer("p" + std::to_string(i), "c", "Pool item " + std::to_string(i),
                                 truth),
            vectors[i]);
    }
    return pool;
}

ProductOffer query_offer() { return fixtures::make_offer("q", "c", "Query item", {}); }

std::vector<std::string> ids(const std::vector<ProductOffer>& offers) {
    std::vector<std::string> out;
    for (const auto& o : offers) out.push_back(o.offer_id);
    return out;
}

}  // namespace

TEST_CASE("cosine_similarity basics") {
    CHECK(cosine_similarity({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_similarity({1, 0}, {1, 1}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(cosine_similarity({1, 0}, {1, 1}) == cosine_similarity({1, 1}, {1, 0}));
    CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), InvalidArgument);
    CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 0}), InvalidArgument);
}

TEST_CASE("hash embedder is deterministic, unit-norm, and separates titles") {
    HashEmbedder embedder(128);
    auto a = embedder.embed("abc");
    CHECK(a.size() == 128);
    CHECK(embedder.embed("abc") == a);
    double norm = 0;
    for (double x : a) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));

    // Distinct titles from the toy corpus map to distinct vectors.
    Dataset d = fixtures::toy_dataset();
    std::set<std::vector<double>> seen;
    for (const auto& o : d.offers) seen.insert(embedder.embed(o.title));
    CHECK(seen.size() == d.offers.size());

    CHECK_THROWS_AS(embedder.embed(""), InvalidArgument);
}

TEST_CASE("embedding cache hits and persistence") {
    auto file = std::filesystem::temp_directory_path() / "avex-embed-cache.jsonl";
    std::filesystem::remove(file);
    HashEmbedder embedder(32);
    EmbeddingVector first;
    {
        EmbeddingCache cache(file);
        first = cache.get_or_compute(embedder, "some title");
        CHECK(cache.get_or_compute(embedder, "some title") == first);
        CHECK(cache.size() == 1);
    }
    EmbeddingCache reloaded(file);
    CHECK(reloaded.size() == 1);
    CHECK(reloaded.get_or_compute(embedder, "some title") == first);
}

TEST_CASE("select_demonstrations common contracts") {
    auto pool = synthetic_pool({{1, 0}, {0.9, 0.1}, {0, 1}});
    EmbeddingVector q = {1, 0};
    for (auto strategy : {SelectorStrategy::fixed, SelectorStrategy::random,
                          SelectorStrategy::semantic_similarity, SelectorStrategy::mmr,
                          SelectorStrategy::semsim_avd}) {
        SelectorConfig cfg;
        cfg.strategy = strategy;
        cfg.k = 0;
        CHECK(select_demonstrations(query_offer(), q, pool, cfg).empty());

        cfg.k = 2;
        auto out = select_demonstrations(query_offer(), q, pool, cfg);
        CHECK(out.size() == 2);
        auto out_ids = ids(out);
        CHECK(std::set<std::string>(out_ids.begin(), out_ids.end()).size() == 2);

        cfg.k = 10;   // |output| = min(k, |pool|)
        CHECK(select_demonstrations(query_offer(), q, pool, cfg).size() == 3);
    }

    // Pool of one: every strategy returns that single offer.
    auto single = synthetic_pool({{1, 1}});
    for (auto strategy : {SelectorStrategy::fixed, SelectorStrategy::random,
                          SelectorStrategy::semantic_similarity, SelectorStrategy::mmr,
                          SelectorStrategy::semsim_avd}) {
        SelectorConfig cfg;
        cfg.strategy = strategy;
        cfg.k = 1;
        auto out = select_demonstrations(query_offer(), q, single, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0].offer_id == "p0");
    }

    // Empty pool with k > 0: empty result, not an error.
    DemoPool empty;
    empty.category = "c";
    SelectorConfig cfg;
    cfg.k = 3;
    CHECK(select_demonstrations(query_offer(), q, empty, cfg).empty());
}

TEST_CASE("fixed selector is query-independent") {
    auto pool = synthetic_pool({{1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}});
    SelectorConfig cfg;
    cfg.strategy = SelectorStrategy::fixed;
    cfg.k = 2;
    auto a = select_demonstrations(query_offer(), {1, 0}, pool, cfg);
    auto b = select_demonstrations(fixtures::make_offer("q2", "c", "Other query", {}), {0, 1},
                                   pool, cfg);
    CHECK(ids(a) == ids(b));
    CHECK(ids(a) == std::vector<std::string>{"p0", "p1"});   // canonical pool order
}

TEST_CASE("random selector: equal seeds identical, different seeds differ") {
    std::vector<EmbeddingVector> vectors(100, EmbeddingVector{1, 0});
    auto pool = synthetic_pool(vectors);
    SelectorConfig cfg;
    cfg.strategy = SelectorStrategy::random;
    cfg.k = 10;
    cfg.seed = 1;
    auto a = select_demonstrations(query_offer(), {1, 0}, pool, cfg);
    CHECK(ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg)) == ids(a));
    cfg.seed = 2;
    CHECK(ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg)) != ids(a));
}

TEST_CASE("semantic similarity ranks by cosine with canonical tie-break") {
    auto pool = synthetic_pool({{0, 1}, {1, 0.1}, {1, 0}, {1, 0.1}});
    SelectorConfig cfg;
    cfg.strategy = SelectorStrategy::semantic_similarity;
    cfg.k = 4;
    auto out = ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg));
    CHECK(out == std::vector<std::string>{"p2", "p1", "p3", "p0"});   // tie p1 before p3

    // output[0] is the argmax by brute force.
    double best = -2;
    std::string best_id;
    for (const auto& [offer, v] : pool.entries) {
        double s = cosine_similarity({1, 0}, v);
        if (s > best) {
            best = s;
            best_id = offer.offer_id;
        }
    }
    CHECK(out[0] == best_id);
}

TEST_CASE("mmr with lambda=1 equals the semantic similarity ordering") {
    auto pool = synthetic_pool({{1, 0}, {0.8, 0.6}, {0, 1}, {0.6, 0.8}, {0.9, 0.1}});
    SelectorConfig sim;
    sim.strategy = SelectorStrategy::semantic_similarity;
    sim.k = 5;
    SelectorConfig mmr;
    mmr.strategy = SelectorStrategy::mmr;
    mmr.k = 5;
    mmr.mmr_lambda = 1.0;
    EmbeddingVector q = {0.7, 0.3};
    CHECK(ids(select_demonstrations(query_offer(), q, pool, sim)) ==
          ids(select_demonstrations(query_offer(), q, pool, mmr)));
}

TEST_CASE("mmr balances similarity and redundancy") {
    // p0 and p1 nearly identical and closest to the query; with a
    // diversity-heavy lambda the selector pulls in p2 before p1.
    auto pool = synthetic_pool({{1, 0}, {1, 0.1}, {0.6, 0.8}});
    SelectorConfig cfg;
    cfg.strategy = SelectorStrategy::mmr;
    cfg.k = 2;
    cfg.mmr_lambda = 0.3;
    auto out = ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg));
    CHECK(out == std::vector<std::string>{"p0", "p2"});
}

TEST_CASE("semsim_avd skips redundant candidates and backfills") {
    // Candidates 0 and 1 carry identical truth pairs; candidate 1 is skipped
    // until backfill even though it ranks second by similarity.
    std::vector<std::map<std::string, std::string>> truths = {
        {{"Brand", "X"}}, {{"Brand", "X"}}, {{"Brand", "Y"}}};
    auto pool = synthetic_pool({{1, 0}, {0.99, 0.01}, {0.5, 0.5}}, truths);
    SelectorConfig cfg;
    cfg.strategy = SelectorStrategy::semsim_avd;
    cfg.k = 2;
    auto out = ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg));
    CHECK(out == std::vector<std::string>{"p0", "p2"});

    cfg.k = 3;   // backfill restores the skipped candidate
    out = ids(select_demonstrations(query_offer(), {1, 0}, pool, cfg));
    CHECK(out == std::vector<std::string>{"p0", "p2", "p1"});
}

TEST_CASE("select_demonstrations rejects bad inputs") {
    auto pool = synthetic_pool({{1, 0}});
    SelectorConfig cfg;
    cfg.k = 1;
    auto wrong_category = fixtures::make_offer("q", "other", "Query", {});
    CHECK_THROWS_AS(select_demonstrations(wrong_category, {1, 0}, pool, cfg), InvalidArgument);

    auto in_pool = fixtures::make_offer("p0", "c", "Query", {});
    CHECK_THROWS_AS(select_demonstrations(in_pool, {1, 0}, pool, cfg), InvalidArgument);
}

TEST_CASE("build_demo_pool embeds every offer of the category") {
    Dataset d = fixtures::toy_dataset();
    HashEmbedder embedder(64);
    EmbeddingCache cache;
    DemoPool pool = build_demo_pool(d, "widget", embedder, &cache);
    CHECK(pool.entries.size() == 20);
    CHECK(cache.size() == 20);
    for (const auto& [offer, v] : pool.entries) {
        CHECK(offer.category == "widget");
        CHECK(v.size() == 64);
    }
}
