#include <doctest.h>

#include "harness.hpp"
#include "oracles.hpp"

#include "pfm/enrichment.hpp"
#include "pfm/error.hpp"
#include "pfm/taste.hpp"

#include <algorithm>

using namespace pfm;

namespace {

void check_box(const TasteRegion& got, const TasteRegion& want, double tol) {
    for (std::size_t c = 0; c < kChannels; ++c) {
        CHECK(std::abs(got.lo[c] - want.lo[c]) <= tol);
        CHECK(std::abs(got.hi[c] - want.hi[c]) <= tol);
    }
}

}  // namespace

TEST_CASE("item_region matches the sort oracle") {
    Rng rng(41);
    for (int t = 0; t < 100; ++t) {
        std::vector<TasteVector> samples(100);
        for (auto& s : samples) s = oracle::random_vector(rng);
        const auto got = item_region(std::span<const TasteVector>(samples), 0.1);
        const auto want = oracle::item_region(samples, 0.1);
        check_box(got, want, 1e-12);
        for (std::size_t c = 0; c < kChannels; ++c) CHECK(std::abs(got.centroid[c] - want.centroid[c]) <= 1e-12);
        CHECK(got.sample_count == 100);
    }
}

TEST_CASE("item_region preconditions") {
    std::vector<TasteVector> none;
    CHECK_THROWS_AS(item_region(std::span<const TasteVector>(none), 0.1), Error);
    std::vector<TasteVector> one(1);
    CHECK_THROWS_AS(item_region(std::span<const TasteVector>(one), 0.3), Error);
    const auto r = item_region(std::span<const TasteVector>(one), 0.0);
    CHECK(r.volume() == 0.0);
}

TEST_CASE("dish_region stays within the Monte-Carlo hull of narrow ingredients") {
    // With narrow boxes the extremes of the mix are reachable by sampling.
    Rng rng(42);
    for (int t = 0; t < 10; ++t) {
        std::map<std::string, TasteRegion> regions;
        std::vector<RecipeComponent> recipe;
        std::vector<std::pair<TasteRegion, double>> parts;
        double rest = 1.0;
        for (int i = 0; i < 5; ++i) {
            const std::string id = "i" + std::to_string(i);
            regions[id] = oracle::random_region(rng, 0.05);
            const double w = i == 4 ? rest : 0.2;
            rest -= w;
            recipe.push_back({id, w});
            parts.emplace_back(regions[id], w);
        }
        const auto got = dish_region(recipe, regions);
        const auto hull = oracle::monte_carlo_hull(parts, 100000, rng);
        check_box(got, hull, 0.01);
        check_box(got, oracle::dish_region(parts), 1e-12);
    }
}

TEST_CASE("dish_region preconditions") {
    std::map<std::string, TasteRegion> regions{{"a", TasteRegion{}}};
    const std::vector<RecipeComponent> bad_sum{{"a", 0.5}};
    const std::vector<RecipeComponent> unknown{{"b", 1.0}};
    const std::vector<RecipeComponent> zero{{"a", 1.0}, {"a", 0.0}};
    auto code = [&](const std::vector<RecipeComponent>& r) {
        try {
            dish_region(r, regions);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code(bad_sum) == ErrorCode::BadProportions);
    CHECK(code(unknown) == ErrorCode::UnknownIngredient);
    CHECK(code(zero) == ErrorCode::BadProportions);
}

TEST_CASE("box_overlap and preference_score match the closed form") {
    Rng rng(43);
    for (int t = 0; t < 2000; ++t) {
        const auto a = oracle::random_region(rng, rng.bernoulli(0.3) ? 0.004 : 0.5);
        const auto b = oracle::random_region(rng, rng.bernoulli(0.3) ? 0.004 : 0.5);
        const double o = box_overlap(a, b);
        CHECK(std::abs(o - oracle::overlap(a, b, kOverlapEpsilon)) <= 1e-9);
        CHECK(o >= 0.0);
        CHECK(o <= 1.0 + 1e-12);
        CHECK(std::abs(o - box_overlap(b, a)) <= 1e-12);
    }
    const auto p = TasteRegion::point(TasteVector{});
    CHECK(box_overlap(p, p) == doctest::Approx(1.0));
}

TEST_CASE("preference_score does not depend on region order") {
    Rng rng(44);
    for (int t = 0; t < 200; ++t) {
        PreferenceProfile profile;
        for (int i = 0; i < 4; ++i) profile.regions.push_back({oracle::random_region(rng), 0.25});
        const auto q = oracle::random_region(rng);
        const double before = preference_score(profile, q);
        rng.shuffle(profile.regions.begin(), profile.regions.end());
        CHECK(preference_score(profile, q) == doctest::Approx(before).epsilon(1e-12));
        CHECK(before == doctest::Approx(oracle::preference(profile, q)).epsilon(1e-9));
    }
}

TEST_CASE("preference profile clusters well-separated liked items") {
    Rng rng(45);
    std::vector<std::pair<TasteVector, int>> rated;
    for (int i = 0; i < 40; ++i) {
        TasteVector v;
        for (std::size_t c = 0; c < kChannels; ++c) v[c] = (i % 2 ? 0.2 : 0.8) + rng.uniform(-0.03, 0.03);
        rated.emplace_back(v, 5);
    }
    rated.emplace_back(TasteVector{}, 1);
    const auto p = preference_profile(rated, 4);
    REQUIRE(p.regions.size() == 2);
    CHECK(p.built_from == 40);
    CHECK(p.regions[0].weight + p.regions[1].weight == doctest::Approx(1.0));
    for (const auto& [v, r] : rated) {
        if (r < 4) continue;
        CHECK((p.regions[0].region.contains(v) || p.regions[1].region.contains(v)));
    }
    std::vector<std::pair<TasteVector, int>> disliked{{TasteVector{}, 2}};
    CHECK_THROWS_AS(preference_profile(disliked, 4), Error);
}

TEST_CASE("substitute_search matches the exhaustive oracle") {
    Rng rng(46);
    for (int t = 0; t < 300; ++t) {
        PreferenceProfile profile;
        for (int i = 0; i < 2; ++i) profile.regions.push_back({oracle::random_region(rng, 0.6), 0.5});
        std::vector<FoodCandidate> pool(2 + rng.index(10));
        for (std::size_t i = 0; i < pool.size(); ++i) {
            pool[i].item_id = "c" + std::to_string(i);
            pool[i].region = oracle::random_region(rng, 0.5);
            pool[i].nutrition.sugar_g = static_cast<double>(rng.index(4));  // ties on health
        }
        const FoodCandidate target = pool[rng.index(pool.size())];
        const std::size_t k = 1 + rng.index(4);
        const auto got = substitute_search(target, pool, profile, "sugar_g", k);
        const auto want = oracle::substitutes(target, pool, profile, "sugar_g", k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].item_id == want[i]);
    }
}

TEST_CASE("diet soda: the fixture catalog puts diet cola first") {
    const auto dir = harness::source_path("data/fixtures");
    const auto cal = load_taste_calibration(harness::source_path("data/config/taste_calibration.json").string());
    const auto catalog = TasteCatalog::load((dir / "taste_samples.jsonl").string(), (dir / "recipes.jsonl").string(), cal);
    const auto nutrition = FixtureNutritionClient::load(dir / "nutrition.jsonl", dir / "barcodes.jsonl");
    auto candidate = [&](const std::string& id) {
        FoodCandidate c;
        c.item_id = id;
        c.region = *catalog.region_for(id);
        c.nutrition = nutrition->items().at(id).per_100g;
        return c;
    };
    const FoodCandidate cola = candidate("cola");
    std::vector<FoodCandidate> pool;
    for (const char* id : {"water", "orange_juice", "diet_cola", "sparkling_water"}) pool.push_back(candidate(id));
    // A user who likes what cola tastes like, give or take.
    PreferenceProfile profile;
    TasteRegion liked = cola.region;
    for (std::size_t c = 0; c < kChannels; ++c) {
        liked.lo[c] = std::max(0.0, liked.lo[c] - 0.12);
        liked.hi[c] = std::min(1.0, liked.hi[c] + 0.12);
    }
    profile.regions.push_back({liked, 1.0});
    const auto ranked = substitute_search(cola, pool, profile, "sugar_g", 3);
    REQUIRE_FALSE(ranked.empty());
    CHECK(ranked.front().item_id == "diet_cola");
    CHECK(ranked.front().health_value < cola.nutrition.sugar_g);
}

TEST_CASE("spicy calibration from Scoville units") {
    TasteCalibration cal;
    CHECK(cal.spicy_from_scoville(0) == 0.0);
    CHECK(cal.spicy_from_scoville(1e6) == doctest::Approx(1.0));
    CHECK(cal.spicy_from_scoville(1e9) == 1.0);
    CHECK(cal.spicy_from_scoville(5000) < cal.spicy_from_scoville(50000));
}
