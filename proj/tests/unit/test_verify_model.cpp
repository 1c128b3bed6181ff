#include <doctest.h>

#include "harness.hpp"
#include "oracles.hpp"

#include "pfm/app.hpp"
#include "pfm/error.hpp"
#include "pfm/model.hpp"
#include "pfm/recommender.hpp"
#include "pfm/synth.hpp"
#include "pfm/verify.hpp"

#include <algorithm>
#include <set>

using namespace pfm;

namespace {

SynthSpec heavy_spec(std::uint64_t seed) {
    SynthSpec s = synth_spec_from_json(harness::read_json(harness::source_path("data/scenario/synth_heavy_dinner.json")));
    s.seed = seed;
    return s;
}

Hypothesis heavy_hypothesis() {
    return hypothesis_from_json(
        harness::read_json(harness::source_path("data/scenario/synth_heavy_dinner_hypothesis.json")));
}

VerifyOptions fast_options() {
    VerifyOptions o;
    o.n_permutations = 300;
    o.n_bootstrap = 200;
    return o;
}

struct DemoStore {
    harness::TempDir dir{"unit-demo"};
    std::unique_ptr<Engine> engine;
    PersonalFoodModel model;

    DemoStore() {
        harness::seed_data_dir(dir.path());
        EngineOptions o;
        o.data_dir = dir.path();
        engine = std::make_unique<Engine>(o);
        engine->import_chronicle(import_jsonl_file(harness::source_path("data/scenario/chronicle.jsonl").string()));
        engine->enrich("demo");
        engine->build_model("demo");
        model = *engine->store().load_model("demo");
    }
};

DemoStore& demo() {
    static DemoStore d;
    return d;
}

}  // namespace

TEST_CASE("synth is deterministic in its seed") {
    const auto a = generate(heavy_spec(3));
    const auto b = generate(heavy_spec(3));
    const auto c = generate(heavy_spec(4));
    CHECK(export_jsonl(a.chronicle) == export_jsonl(b.chronicle));
    CHECK(export_jsonl(a.chronicle) != export_jsonl(c.chronicle));
    CHECK(a.truth.nights.size() == 90);
    for (const auto& e : a.chronicle.events()) CHECK(validate(e).empty());
}

TEST_CASE("without noise the planted effect is recovered exactly") {
    SynthSpec s = heavy_spec(5);
    s.sleep.noise_sigma["sleep_quality"] = 0.0;
    const auto data = generate(s);
    CHECK(data.truth.true_ate.at("heavy_dinner").at("sleep_quality") == doctest::Approx(-10.0));
    const auto r = verify(heavy_hypothesis(), data.chronicle, fast_options());
    CHECK(r.overall_effect == doctest::Approx(-10.0).epsilon(1e-9));
    CHECK(r.direction == "decrease");
    for (const auto& c : r.contexts) {
        if (c.estimable) CHECK(c.effect == doctest::Approx(-10.0).epsilon(1e-9));
    }
}

TEST_CASE("verify is reproducible and round-trips through JSON") {
    const auto data = generate(heavy_spec(6));
    const auto a = verify(heavy_hypothesis(), data.chronicle, fast_options());
    const auto b = verify(heavy_hypothesis(), data.chronicle, fast_options());
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(to_json(verified_rule_from_json(to_json(a))).dump() == to_json(a).dump());
    CHECK(a.n_treated + a.n_control <= 90);
    CHECK(a.n_treated > 0);
}

TEST_CASE("contextual matching partitions the units") {
    const auto data = generate(heavy_spec(7));
    Hypothesis h = heavy_hypothesis();
    ConfounderSelector lunch;
    lunch.name = "lunch_kcal";
    lunch.stream = "food";
    lunch.attr = "kcal";
    lunch.aggregate = "max";
    lunch.lookback_minutes = 600;
    h.confounders.push_back(lunch);
    const auto p = resolve(h.input, data.chronicle);
    const auto units = build_units(h, data.chronicle, find_occurrences(p, data.chronicle));
    std::vector<Unit> with_values = units;
    for (auto& u : with_values) {
        u.confounders.clear();
        for (const auto& c : h.confounders) u.confounders.push_back(confounder_value(c, data.chronicle, u.outcome_ms, 0, u.id));
    }
    const auto m = contextual_match(with_values, h.confounders);
    std::multiset<std::size_t> seen;
    for (const auto& g : m.groups) {
        for (auto i : g.treated) {
            CHECK(with_values[i].treated);
            seen.insert(i);
        }
        for (auto i : g.control) {
            CHECK_FALSE(with_values[i].treated);
            seen.insert(i);
        }
        CHECK(g.low_power == (g.treated.size() < kMinGroupArm || g.control.size() < kMinGroupArm));
    }
    CHECK(seen.size() == with_values.size());
    for (std::size_t i = 0; i < with_values.size(); ++i) CHECK(seen.count(i) == 1);
    CHECK(std::is_sorted(m.groups.begin(), m.groups.end(), [](const auto& a, const auto& b) { return a.key < b.key; }));
}

TEST_CASE("verify reports missing data with codes") {
    Chronicle empty("u");
    try {
        verify(heavy_hypothesis(), empty, fast_options());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK((e.code() == ErrorCode::NoOccurrences || e.code() == ErrorCode::InvalidArgument));
    }
}

TEST_CASE("model build is reproducible and round-trips") {
    auto& d = demo();
    const Json first = to_json(d.model);
    CHECK(to_json(model_from_json(first)).dump() == first.dump());
    const Chronicle c = d.engine->store().load_enriched("demo");
    const auto rules = load_rulebase(harness::source_path("data/config/knowledge_rules.json").string());
    const auto again = build_model(c, rules, d.model.constraints, d.engine->config());
    CHECK(to_json(again).dump() == first.dump());
    CHECK(d.model.built_at == start_ms(c.events().back()));
    CHECK(d.model.rules.size() == rules.size());
}

TEST_CASE("short chronicles are refused") {
    const auto rules = load_rulebase(harness::source_path("data/config/knowledge_rules.json").string());
    SynthSpec s = heavy_spec(1);
    s.days = 10;
    try {
        personalize(rules, generate(s).chronicle, EngineConfig{});
        FAIL("expected InsufficientData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
}

TEST_CASE("predictions are the capped sum of rule contributions") {
    auto& d = demo();
    const auto& cfg = d.engine->config();
    const Json req = harness::read_json(harness::source_path("data/scenario/request.json"));
    auto request = recommendation_request_from_json(req, cfg);
    d.engine->complete_candidates(request);
    request.context = fill_confounders(request.context, d.model, d.engine->store().load_enriched("demo"));
    std::set<std::string> verified, prior;
    for (const auto& r : d.model.rules) (r.status == RuleStatus::Verified ? verified : prior).insert(r.knowledge.rule_id);

    for (const auto& dish : request.candidates) {
        const auto preds = predict_outcome(d.model, hypothetical_event(dish, request), request.context, cfg);
        for (const auto& p : preds) {
            double sum = 0.0;
            for (const auto& c : p.contributions) {
                sum += c.delta;
                if (c.prior_only) {
                    CHECK(prior.count(c.rule_id) == 1);
                    CHECK(std::abs(c.delta) == doctest::Approx(cfg.prior_fraction * cfg.min_effect));
                    CHECK(c.validity == 0.0);
                } else {
                    CHECK(verified.count(c.rule_id) == 1);
                }
            }
            CHECK(p.delta == doctest::Approx(sum));
            const double cap = cfg.cap_for(p.metric);
            CHECK(p.capped_delta == doctest::Approx(std::clamp(sum, -cap, cap)));
        }
    }
}

TEST_CASE("recommendation scores match an independent recomputation") {
    auto& d = demo();
    EngineConfig cfg = d.engine->config();
    const Json req = harness::read_json(harness::source_path("data/scenario/request.json"));
    auto request = recommendation_request_from_json(req, cfg);
    d.engine->complete_candidates(request);
    request.context = fill_confounders(request.context, d.model, d.engine->store().load_enriched("demo"));
    PersonalFoodModel model = d.model;
    model.constraints = {StaticConstraint{"chili_pepper", Severity::Soft, ""}, StaticConstraint{"peanuts", Severity::Hard, ""}};

    const auto rec = recommend(request, &model, cfg);
    for (const auto& s : rec.ranked) {
        const auto& dish = *std::find_if(request.candidates.begin(), request.candidates.end(),
                                         [&](const DishCandidate& c) { return c.dish_id == s.dish_id; });
        const auto preds = predict_outcome(model, hypothetical_event(dish, request), request.context, cfg);
        double health = 0.0, wsum = 0.0;
        for (const auto& g : request.goals) {
            double u = 0.5;
            for (const auto& p : preds) {
                if (p.metric != g.metric) continue;
                const double aligned = g.direction == Direction::Increase ? p.capped_delta : -p.capped_delta;
                u = 0.5 + 0.5 * std::clamp(aligned / cfg.cap_for(g.metric), -1.0, 1.0);
            }
            health += g.weight * u;
            wsum += g.weight;
        }
        health /= wsum;
        const double pref = dish.region ? preference_score(*model.preference, *dish.region) : 0.0;
        double total = request.w_pref * pref + request.w_health * health - (s.soft_flags.empty() ? 0.0 : cfg.soft_penalty);
        total = std::clamp(total, 0.0, 1.0);
        CHECK(s.health_utility == doctest::Approx(health).epsilon(1e-12));
        CHECK(s.preference == doctest::Approx(pref).epsilon(1e-12));
        CHECK(s.total == doctest::Approx(total).epsilon(1e-12));
    }
    REQUIRE(rec.blocked.size() == 1);
    CHECK(rec.blocked[0].dish_id == "peanut_satay");
}

TEST_CASE("ranking properties") {
    auto& d = demo();
    EngineConfig cfg = d.engine->config();
    const Json req = harness::read_json(harness::source_path("data/scenario/request.json"));
    auto request = recommendation_request_from_json(req, cfg);
    d.engine->complete_candidates(request);
    request.context = fill_confounders(request.context, d.model, d.engine->store().load_enriched("demo"));
    const auto base = recommend(request, &d.model, cfg);
    REQUIRE(base.ranked.size() >= 2);
    auto ids = [](const Recommendation& r) {
        std::vector<std::string> out;
        for (const auto& s : r.ranked) out.push_back(s.dish_id);
        return out;
    };

    SUBCASE("input order does not matter") {
        Rng rng(61);
        for (int t = 0; t < 10; ++t) {
            auto shuffled = request;
            rng.shuffle(shuffled.candidates.begin(), shuffled.candidates.end());
            CHECK(ids(recommend(shuffled, &d.model, cfg)) == ids(base));
        }
    }
    SUBCASE("dropping a non-winner keeps the winner") {
        for (std::size_t i = 0; i < request.candidates.size(); ++i) {
            if (request.candidates[i].dish_id == base.ranked.front().dish_id) continue;
            auto fewer = request;
            fewer.candidates.erase(fewer.candidates.begin() + static_cast<std::ptrdiff_t>(i));
            CHECK(recommend(fewer, &d.model, cfg).ranked.front().dish_id == base.ranked.front().dish_id);
        }
    }
    SUBCASE("with no health weight the order is by preference") {
        auto pref_only = request;
        pref_only.w_pref = 1.0;
        pref_only.w_health = 0.0;
        const auto r = recommend(pref_only, &d.model, cfg);
        for (std::size_t i = 1; i < r.ranked.size(); ++i) {
            CHECK(r.ranked[i - 1].preference >= r.ranked[i].preference);
            if (r.ranked[i - 1].preference == r.ranked[i].preference) CHECK(r.ranked[i - 1].dish_id < r.ranked[i].dish_id);
        }
    }
    SUBCASE("invalid requests") {
        auto bad = request;
        bad.w_pref = 0.7;
        CHECK_THROWS_AS(recommend(bad, &d.model, cfg), Error);
        auto none = request;
        none.candidates.clear();
        CHECK_THROWS_AS(recommend(none, &d.model, cfg), Error);
        CHECK_THROWS_AS(recommend(request, nullptr, cfg), Error);
    }
}
