#include <doctest.h>

#include "oracles.hpp"

#include "pfm/error.hpp"
#include "pfm/heatmap.hpp"
#include "pfm/pattern.hpp"

#include <algorithm>
#include <tuple>

using namespace pfm;

TEST_CASE("find_occurrences agrees with exhaustive enumeration") {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const auto c = oracle::random_chronicle(rng, 1 + rng.index(120));
        for (int p = 0; p < 5; ++p) {
            const auto pattern = oracle::random_pattern(rng);
            const auto got = find_occurrences(pattern, c);
            const auto want = oracle::occurrences(pattern, c);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].indices == want[i]);
                for (std::size_t k = 0; k < want[i].size(); ++k) CHECK(got[i].event_ids[k] == event_id(c.events()[want[i][k]]));
            }
        }
    }
}

TEST_CASE("occurrences do not overlap and respect gaps") {
    Rng rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = oracle::random_chronicle(rng, 150);
        const auto pattern = oracle::random_pattern(rng);
        std::size_t last = 0;
        bool first = true;
        for (const auto& o : find_occurrences(pattern, c)) {
            if (!first) CHECK(o.indices.front() > last);
            first = false;
            last = o.indices.back();
            for (std::size_t s = 1; s < o.indices.size(); ++s) {
                const double gap = static_cast<double>(start_ms(c.events()[o.indices[s]]) - start_ms(c.events()[o.indices[s - 1]])) / 60000.0;
                CHECK(gap >= pattern.steps[s].min_gap_minutes);
                CHECK(gap <= pattern.steps[s].max_gap_minutes);
            }
        }
    }
}

TEST_CASE("statistics in patterns are resolved against the chronicle") {
    Chronicle c("u");
    for (int d = 0; d < 2; ++d) {
        for (int m = 0; m < 3; ++m) {
            FoodEvent f;
            f.event_id = "f" + std::to_string(d) + std::to_string(m);
            f.user_id = "u";
            f.dish = "x";
            f.start_ms = d * 86400000LL + (8 + 5 * m) * 3600000LL;
            f.logged_ms = f.start_ms;
            NutritionFacts n;
            n.kcal = m == 2 ? 1000 : 400;
            f.nutrition = n;
            c.append(f);
        }
    }
    EventPattern p;
    p.steps.push_back(PatternStep{"food", {Predicate{"kcal", CompareOp::Gt, StatRef{"daily_mean", "kcal", 0.4}}}, 0, 0});
    CHECK_FALSE(is_resolved(p));
    const auto r = resolve(p, c);
    CHECK(is_resolved(r));
    // daily mean = 1800, 0.4 of it = 720
    CHECK(std::get<double>(r.steps[0].where[0].value) == doctest::Approx(720.0));
    CHECK(find_occurrences(r, c).size() == 2);
    CHECK_THROWS_AS(find_occurrences(p, c), Error);
}

TEST_CASE("cooccurrence_matrix agrees with the pair scan") {
    Rng rng(23);
    const std::vector<std::pair<std::string, oracle::Cat>> cats = {
        {"food.dish", {"food", "dish", {}}},
        {"food.kcal:300,700", {"food", "kcal", {300, 700}}},
        {"sleep.sleep_quality:55,75", {"sleep", "sleep_quality", {55, 75}}},
    };
    for (int trial = 0; trial < 80; ++trial) {
        const auto c = oracle::random_chronicle(rng, 1 + rng.index(150));
        const auto& [sa, a] = cats[rng.index(cats.size())];
        const auto& [sb, b] = cats[rng.index(cats.size())];
        const std::int64_t window = 15 * static_cast<std::int64_t>(1 + rng.index(60));
        const auto m = cooccurrence_matrix(Categorizer::parse(sa), Categorizer::parse(sb), window, c);
        const auto want = oracle::cooccurrence(a, b, window, c);
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            for (std::size_t j = 0; j < m.cols.size(); ++j) {
                const std::string r = a.edges.empty() ? m.rows[i] : "#" + std::to_string(i);
                const std::string k = b.edges.empty() ? m.cols[j] : "#" + std::to_string(j);
                const auto it = want.find({r, k});
                CHECK(m.counts[i][j] == (it == want.end() ? 0 : it->second));
                total += m.counts[i][j];
            }
        }
        std::uint64_t want_total = 0;
        for (const auto& [key, n] : want) want_total += n;
        CHECK(total == want_total);
    }
}

TEST_CASE("generate_candidates is a filter and a sort") {
    Rng rng(24);
    for (int trial = 0; trial < 100; ++trial) {
        CooccurrenceMatrix m;
        const std::size_t r = 1 + rng.index(5), k = 1 + rng.index(5);
        for (std::size_t i = 0; i < r; ++i) m.rows.push_back("r" + std::to_string(i));
        for (std::size_t j = 0; j < k; ++j) m.cols.push_back("c" + std::to_string(j));
        m.counts.assign(r, std::vector<std::uint64_t>(k));
        for (auto& row : m.counts) for (auto& v : row) v = rng.index(6);
        const std::uint64_t support = 1 + rng.index(4);

        std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> want;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < k; ++j)
                if (m.counts[i][j] >= support) want.emplace_back(-static_cast<std::int64_t>(m.counts[i][j]), i, j);
        std::sort(want.begin(), want.end());

        const auto got = generate_candidates(m, support);
        REQUIRE(got.size() == want.size());
        for (std::size_t n = 0; n < got.size(); ++n) {
            CHECK(got[n].row == std::get<1>(want[n]));
            CHECK(got[n].col == std::get<2>(want[n]));
            CHECK(got[n].row_label == m.rows[got[n].row]);
        }
    }
}

TEST_CASE("categorizer specs") {
    const auto sleep = Categorizer::parse("sleep");
    CHECK(sleep.attr == "sleep_quality");
    CHECK(sleep.bin_labels().size() == 3);
    CHECK(Categorizer::parse("food").attr == "dish");
    CHECK_THROWS_AS(Categorizer::parse("sleep.sleep_quality:75,60"), Error);
    CHECK_THROWS_AS(Categorizer::parse("nonsense stream"), Error);
    CHECK_THROWS_AS(cooccurrence_matrix(sleep, sleep, 0, Chronicle("u")), Error);
    CHECK_THROWS_AS(generate_candidates(CooccurrenceMatrix{}, 0), Error);
}
