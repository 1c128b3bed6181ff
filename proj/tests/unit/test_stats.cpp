#include <doctest.h>

#include "oracles.hpp"

#include "pfm/stats.hpp"
#include "pfm/verify.hpp"

#include <algorithm>

using namespace pfm;

TEST_CASE("quantile_sorted matches the interpolation oracle") {
    Rng rng(31);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> xs(1 + rng.index(50));
        for (auto& x : xs) x = rng.normal();
        const double p = rng.uniform();
        std::vector<double> sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        CHECK(stats::quantile_sorted(sorted, p) == doctest::Approx(oracle::quantile(xs, p)).epsilon(1e-12));
    }
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(stats::quantile_sorted(v, 0.0) == 1.0);
    CHECK(stats::quantile_sorted(v, 1.0) == 4.0);
    CHECK(stats::quantile_sorted(v, 0.5) == 2.5);
}

TEST_CASE("benjamini_hochberg matches the definition") {
    Rng rng(32);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> p(1 + rng.index(20));
        for (auto& x : p) x = rng.bernoulli(0.2) ? 0.5 : rng.uniform();  // ties included
        const auto got = stats::benjamini_hochberg(p);
        const auto want = oracle::bh(p);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
            CHECK(got[i] >= p[i] * (1 - 1e-15));
            CHECK(got[i] <= 1.0);
        }
    }
}

TEST_CASE("permutation test") {
    const std::vector<double> t{10, 11, 12, 13, 14, 15};
    const std::vector<double> c{0, 1, 2, 3, 4, 5};
    const auto r = stats::permutation_test(t, c, 999, 7);
    CHECK(r.observed == doctest::Approx(10.0));
    // Only the observed split and its mirror are as extreme.
    CHECK(r.p_value <= 0.02);
    CHECK(r.p_value >= 1.0 / 1000.0);
    const auto again = stats::permutation_test(t, c, 999, 7);
    CHECK(again.p_value == r.p_value);

    const std::vector<double> same{5, 5, 5};
    CHECK(stats::permutation_test(same, same, 200, 1).p_value == 1.0);
}

TEST_CASE("bootstrap is seeded and centred on the effect") {
    Rng rng(33);
    std::vector<double> t(40), c(40);
    for (auto& x : t) x = 10 + rng.normal();
    for (auto& x : c) x = rng.normal();
    const auto a = stats::bootstrap_effects(t, c, 400, 9);
    const auto b = stats::bootstrap_effects(t, c, 400, 9);
    CHECK(a == b);
    CHECK(stats::mean(a) == doctest::Approx(stats::mean(t) - stats::mean(c)).epsilon(0.05));
    CHECK(validity_from_bootstrap(10.0, a, 1.0) == 1.0);
    CHECK(validity_from_bootstrap(10.0, a, 100.0) == 0.0);
}

TEST_CASE("confounder bins agree with a sorted tercile oracle") {
    Rng rng(34);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> xs(3 + rng.index(60));
        for (auto& x : xs) x = std::round(rng.uniform(0, 20));
        const auto edges = equal_frequency_edges(xs, 3);
        REQUIRE(edges.size() == 2);
        CHECK(edges[0] == doctest::Approx(oracle::quantile(xs, 1.0 / 3)).epsilon(1e-12));
        CHECK(edges[1] == doctest::Approx(oracle::quantile(xs, 2.0 / 3)).epsilon(1e-12));
        for (double x : xs) {
            const std::string label = bin_label(edges, x);
            std::size_t below = 0;
            for (double e : edges) below += e < x ? 1 : 0;
            CHECK(label == "bin" + std::to_string(below));
        }
    }
}
