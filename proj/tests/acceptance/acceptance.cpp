// Runs the nine acceptance criteria and prints one PASS/FAIL line each.
// Exit status is the number of failing criteria.

#include "harness.hpp"
#include "oracles.hpp"

#include "pfm/app.hpp"
#include "pfm/config.hpp"
#include "pfm/heatmap.hpp"
#include "pfm/model.hpp"
#include "pfm/pattern.hpp"
#include "pfm/recommender.hpp"
#include "pfm/rng.hpp"
#include "pfm/service.hpp"
#include "pfm/synth.hpp"
#include "pfm/taste.hpp"
#include "pfm/verify.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

using namespace pfm;
namespace fs = std::filesystem;

namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t0) {
    return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fixed(double x, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

EngineConfig shipped_config() { return load_config(harness::source_path("data/config/pfm.json").string()); }

SynthSpec synth_spec(const std::string& name, std::uint64_t seed) {
    SynthSpec s = synth_spec_from_json(harness::read_json(harness::source_path("data/scenario/" + name)));
    s.seed = seed;
    return s;
}

// ---------------------------------------------------------------------------
// 1. pattern matching and heatmaps against brute force

Outcome criterion_1() {
    const auto t0 = SteadyClock::now();
    const std::vector<oracle::Cat> cats = {
        {"food", "dish", {}},
        {"food", "kcal", {300, 700}},
        {"sleep", "sleep_quality", {55, 75}},
        {"exercise", "duration_min", {30, 60}},
    };
    auto spec_of = [](const oracle::Cat& c) {
        std::string s = c.stream + "." + c.attr;
        for (std::size_t i = 0; i < c.edges.size(); ++i) s += (i ? "," : ":") + std::to_string(static_cast<int>(c.edges[i]));
        return s;
    };

    Rng rng(derive_seed(1, "acceptance-1"));
    std::size_t pattern_mismatch = 0;
    std::size_t heatmap_mismatch = 0;
    std::size_t total_occurrences = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto chronicle = oracle::random_chronicle(rng, 1 + rng.index(200));

        for (int p = 0; p < 3; ++p) {
            const auto pattern = oracle::random_pattern(rng);
            const auto got = find_occurrences(pattern, chronicle);
            const auto want = oracle::occurrences(pattern, chronicle);
            total_occurrences += want.size();
            bool same = got.size() == want.size();
            for (std::size_t i = 0; same && i < got.size(); ++i) {
                same = got[i].indices == want[i];
                const auto ev = chronicle.events();
                same = same && got[i].start_ms == start_ms(ev[want[i].front()]) &&
                       got[i].end_ms == end_ms(ev[want[i].back()]) &&
                       got[i].event_ids.size() == want[i].size();
            }
            if (!same) ++pattern_mismatch;
        }

        const auto& a = cats[rng.index(cats.size())];
        const auto& b = cats[rng.index(cats.size())];
        const auto window = static_cast<std::int64_t>(15 * (1 + rng.index(48)));
        const auto m = cooccurrence_matrix(Categorizer::parse(spec_of(a)), Categorizer::parse(spec_of(b)), window, chronicle);
        const auto want = oracle::cooccurrence(a, b, window, chronicle);
        std::map<std::pair<std::string, std::string>, std::uint64_t> got;
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            for (std::size_t j = 0; j < m.cols.size(); ++j) {
                if (m.counts[i][j] == 0) continue;
                const std::string r = a.edges.empty() ? m.rows[i] : "#" + std::to_string(i);
                const std::string c = b.edges.empty() ? m.cols[j] : "#" + std::to_string(j);
                got[{r, c}] = m.counts[i][j];
            }
        }
        if (got != want) ++heatmap_mismatch;
    }
    const double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = pattern_mismatch == 0 && heatmap_mismatch == 0 && elapsed < 30.0;
    o.detail = "500 chronicles, 1500 patterns (" + std::to_string(total_occurrences) + " occurrences): " +
               std::to_string(pattern_mismatch) + " pattern / " + std::to_string(heatmap_mismatch) +
               " heatmap mismatches, " + fixed(elapsed, 2) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 2. planted effect recovery

Outcome criterion_2() {
    const auto cfg = shipped_config();
    const Hypothesis h =
        hypothesis_from_json(harness::read_json(harness::source_path("data/scenario/synth_heavy_dinner_hypothesis.json")));
    int recovered = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto t0 = SteadyClock::now();
        const auto data = generate(synth_spec("synth_heavy_dinner.json", seed));
        const auto r = verify(h, data.chronicle, cfg.verify_options());
        worst = std::max(worst, seconds_since(t0));
        if (r.significant && r.min_adjusted_p < 0.05 && r.overall_effect >= -13.0 && r.overall_effect <= -7.0) ++recovered;
    }
    Outcome o;
    o.pass = recovered >= 40 && worst < 10.0;
    o.detail = std::to_string(recovered) + "/50 seeds significant with effect in [-13, -7], slowest seed " +
               fixed(worst, 2) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 3. null calibration

Outcome criterion_3() {
    const auto cfg = shipped_config();
    Json hj = harness::read_json(harness::source_path("data/scenario/synth_heavy_dinner_hypothesis.json"));
    hj["confounders"] = Json::array();
    const Hypothesis h = hypothesis_from_json(hj);
    int false_positives = 0;
    std::vector<double> p;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto data = generate(synth_spec("synth_null.json", 1000 + seed));
        const auto r = verify(h, data.chronicle, cfg.verify_options());
        if (r.min_adjusted_p < 0.05) ++false_positives;
        p.push_back(r.contexts.front().p_value);
    }
    std::sort(p.begin(), p.end());
    double ks = 0.0;
    const double n = static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        ks = std::max({ks, (static_cast<double>(i) + 1) / n - p[i], p[i] - static_cast<double>(i) / n});
    }
    Outcome o;
    o.pass = false_positives <= 10 && ks < 0.15;
    o.detail = std::to_string(false_positives) + "/100 seeds with adjusted p < 0.05, KS = " + fixed(ks);
    return o;
}

// ---------------------------------------------------------------------------
// 4. deconfounding

Outcome criterion_4() {
    const auto cfg = shipped_config();
    const auto rules = load_rulebase(harness::source_path("data/config/knowledge_rules.json").string());
    const auto it = std::find_if(rules.begin(), rules.end(), [](const KnowledgeRule& r) { return r.rule_id == "kiwi_sleep"; });
    if (it == rules.end()) return {false, "kiwi_sleep missing from the rule base"};
    const Hypothesis h = instantiate(*it);
    int naive_significant = 0;
    int matched_null = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto data = generate(synth_spec("synth_confounded_kiwi.json", 2000 + seed));
        const auto naive = naive_estimate(h, data.chronicle, cfg.verify_options());
        const auto matched = verify(h, data.chronicle, cfg.verify_options());
        if (naive.p_value < 0.05) ++naive_significant;
        if (!matched.significant) ++matched_null;
    }
    Outcome o;
    o.pass = naive_significant >= 30 && matched_null >= 35;
    o.detail = "naive significant " + std::to_string(naive_significant) + "/50, matched non-significant " +
               std::to_string(matched_null) + "/50";
    return o;
}

// ---------------------------------------------------------------------------
// 5. taste-space geometry

Outcome criterion_5() {
    Rng rng(derive_seed(5, "acceptance-5"));
    std::size_t item_bad = 0, dish_bad = 0, pref_bad = 0, identity_bad = 0, containment_bad = 0;
    double item_err = 0, dish_err = 0, pref_err = 0;
    auto box_err = [](const TasteRegion& a, const TasteRegion& b) {
        double e = 0;
        for (std::size_t c = 0; c < kChannels; ++c) {
            e = std::max({e, std::abs(a.lo[c] - b.lo[c]), std::abs(a.hi[c] - b.hi[c]),
                          std::abs(a.centroid[c] - b.centroid[c])});
        }
        return e;
    };
    for (int t = 0; t < 10000; ++t) {
        // item_region vs sort oracle
        std::vector<TasteVector> samples(1 + rng.index(100));
        for (auto& s : samples) s = oracle::random_vector(rng);
        const double trim = rng.uniform(0.0, 0.25);
        const double e1 = box_err(item_region(std::span<const TasteVector>(samples), trim), oracle::item_region(samples, trim));
        item_err = std::max(item_err, e1);
        if (e1 > 1e-12) ++item_bad;

        // trim = 0 contains every sample
        const auto full = item_region(std::span<const TasteVector>(samples), 0.0);
        for (const auto& s : samples) {
            if (!full.contains(s)) {
                ++containment_bad;
                break;
            }
        }

        // dish_region vs arithmetic oracle
        const std::size_t k = 1 + rng.index(5);
        std::vector<double> w(k);
        double sum = 0;
        for (auto& x : w) sum += (x = rng.uniform(0.05, 1.0));
        std::map<std::string, TasteRegion> regions;
        std::vector<RecipeComponent> recipe;
        std::vector<std::pair<TasteRegion, double>> parts;
        for (std::size_t i = 0; i < k; ++i) {
            const std::string id = "i" + std::to_string(i);
            regions[id] = oracle::random_region(rng);
            recipe.push_back({id, w[i] / sum});
        }
        // exact unit sum, so the precondition holds regardless of rounding
        double rest = 1.0;
        for (std::size_t i = 0; i + 1 < k; ++i) rest -= recipe[i].proportion;
        recipe.back().proportion = rest;
        for (const auto& rc : recipe) parts.emplace_back(regions[rc.item_id], rc.proportion);
        const double e2 = box_err(dish_region(recipe, regions), oracle::dish_region(parts));
        dish_err = std::max(dish_err, e2);
        if (e2 > 1e-12) ++dish_bad;

        // one ingredient at proportion 1 is the ingredient itself
        const std::vector<RecipeComponent> single{{"i0", 1.0}};
        const auto one = dish_region(single, regions);
        if (one.lo != regions["i0"].lo || one.hi != regions["i0"].hi || one.centroid != regions["i0"].centroid) {
            ++identity_bad;
        }

        // preference_score vs closed-form box intersection
        PreferenceProfile profile;
        const std::size_t nr = 1 + rng.index(5);
        double wsum = 0;
        for (std::size_t i = 0; i < nr; ++i) {
            WeightedRegion wr{oracle::random_region(rng, rng.bernoulli(0.2) ? 0.005 : 0.6), rng.uniform(0.1, 1.0)};
            wsum += wr.weight;
            profile.regions.push_back(wr);
        }
        for (auto& wr : profile.regions) wr.weight /= wsum;
        const auto q = oracle::random_region(rng, rng.bernoulli(0.2) ? 0.005 : 0.6);
        const double e3 = std::abs(preference_score(profile, q) - oracle::preference(profile, q));
        pref_err = std::max(pref_err, e3);
        if (e3 > 1e-9) ++pref_bad;
    }
    Outcome o;
    o.pass = item_bad + dish_bad + pref_bad + identity_bad + containment_bad == 0;
    o.detail = "10^4 cases; max error item " + fixed(item_err * 1e12, 3) + "e-12, dish " + fixed(dish_err * 1e12, 3) +
               "e-12, preference " + fixed(pref_err * 1e9, 3) + "e-9; identity failures " + std::to_string(identity_bad) +
               ", containment failures " + std::to_string(containment_bad);
    return o;
}

// ---------------------------------------------------------------------------
// Scenario store shared by 6 and 8: demo chronicle imported, enriched, modelled.

struct Scenario {
    harness::TempDir dir{"scenario"};
    std::unique_ptr<Engine> engine;

    Scenario() {
        harness::seed_data_dir(dir.path());
        EngineOptions opt;
        opt.data_dir = dir.path();
        engine = std::make_unique<Engine>(opt);
        engine->import_chronicle(import_jsonl_file(harness::source_path("data/scenario/chronicle.jsonl").string()));
        engine->enrich("demo");
        engine->build_model("demo");
    }
};

Scenario& scenario() {
    static Scenario s;
    return s;
}

// ---------------------------------------------------------------------------
// 6. diet soda

Outcome criterion_6() {
    auto& engine = *scenario().engine;
    const Json sub_req = harness::read_json(harness::source_path("data/scenario/substitutes.json"));
    const Json rec_req = harness::read_json(harness::source_path("data/scenario/diet_soda_request.json"));
    const Json subs = engine.substitutes("demo", sub_req);
    const Json rec = engine.recommend("demo", rec_req);
    const bool deterministic = canonical_line(subs) == canonical_line(engine.substitutes("demo", sub_req)) &&
                               canonical_line(rec) == canonical_line(engine.recommend("demo", rec_req));

    const std::string sub_first = subs["ranked"].empty() ? "" : subs["ranked"][0]["item_id"].get<std::string>();
    const std::string rec_first = rec["ranked"].empty() ? "" : rec["ranked"][0]["dish_id"].get<std::string>();

    // The winner must actually be the same-taste, lower-sugar option.
    auto fixture = FixtureNutritionClient::load(harness::source_path("data/fixtures/nutrition.jsonl"),
                                                harness::source_path("data/fixtures/barcodes.jsonl"));
    const auto& items = fixture->items();
    const bool lower_sugar = items.count("diet_cola") && items.count("cola") &&
                             items.at("diet_cola").per_100g.sugar_g < items.at("cola").per_100g.sugar_g;

    Outcome o;
    o.pass = sub_first == "diet_cola" && rec_first == "diet_cola" && lower_sugar && deterministic;
    o.detail = "substitute_search first: " + sub_first + ", recommend first: " + rec_first +
               (lower_sugar ? ", lower sugar than cola" : ", NOT lower sugar") +
               (deterministic ? ", repeat runs identical" : ", repeat runs differ");
    return o;
}

// ---------------------------------------------------------------------------
// 7. preference prediction

Outcome criterion_7() {
    Rng rng(derive_seed(7, "acceptance-7"));
    const double half = 0.06;
    TasteVector centre_a, centre_b;
    for (std::size_t c = 0; c < kChannels; ++c) {
        centre_a[c] = 0.25;
        centre_b[c] = 0.75;
    }
    centre_b[2] = 0.2;  // not just the diagonal
    auto in_box = [&](const TasteVector& centre) {
        TasteVector v;
        for (std::size_t c = 0; c < kChannels; ++c) v[c] = rng.uniform(centre[c] - half, centre[c] + half);
        return v;
    };
    auto inside_any = [&](const TasteVector& v) {
        for (const auto* centre : {&centre_a, &centre_b}) {
            bool in = true;
            for (std::size_t c = 0; c < kChannels; ++c) in = in && std::abs(v[c] - (*centre)[c]) <= half;
            if (in) return true;
        }
        return false;
    };

    // Liked items rated 4-5 around the two centres, disliked ones elsewhere.
    std::vector<std::pair<TasteVector, int>> rated;
    for (int i = 0; i < 60; ++i) rated.emplace_back(in_box(i % 2 ? centre_a : centre_b), 4 + static_cast<int>(rng.index(2)));
    for (int i = 0; i < 60; ++i) {
        TasteVector v;
        do v = oracle::random_vector(rng);
        while (inside_any(v));
        rated.emplace_back(v, 1 + static_cast<int>(rng.index(2)));
    }
    const auto profile = preference_profile(rated, 4);

    auto small_region = [&](const TasteVector& at) {
        TasteRegion r;
        for (std::size_t c = 0; c < kChannels; ++c) {
            r.lo[c] = std::clamp(at[c] - 0.02, 0.0, 1.0);
            r.hi[c] = std::clamp(at[c] + 0.02, 0.0, 1.0);
        }
        r.centroid = at;
        return r;
    };
    int wins = 0;
    for (int d = 0; d < 1000; ++d) {
        const auto inside = small_region(in_box(rng.bernoulli(0.5) ? centre_a : centre_b));
        TasteVector v;
        do v = oracle::random_vector(rng);
        while (inside_any(v));
        const auto outside = small_region(v);
        if (preference_score(profile, inside) > preference_score(profile, outside)) ++wins;
    }
    Outcome o;
    o.pass = profile.regions.size() == 2 && wins >= 950;
    o.detail = std::to_string(profile.regions.size()) + " learned regions, inside item wins " + std::to_string(wins) + "/1000";
    return o;
}

// ---------------------------------------------------------------------------
// 8. constraint safety

std::string plain_name(const std::string& s) {
    std::string out;
    bool space = false;
    for (unsigned char ch : s) {
        if (std::isspace(ch)) {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(ch));
    }
    return out;
}

Outcome criterion_8() {
    auto& engine = *scenario().engine;
    const auto base = *engine.store().load_model("demo");
    const EngineConfig& cfg = engine.config();
    const std::vector<std::string> allergens = {"peanuts", "milk", "shrimp", "wheat", "egg", "soy", "sesame", "kiwi"};
    const std::vector<std::string> dishes = {"ramen",  "cola",      "diet_cola",     "water",   "orange_juice",
                                             "pizza",  "salmon_rice", "peanut_satay", "kiwi",   "milk",
                                             "peanuts", "chili_con_carne", "pad thai", "omelette", "tofu bowl"};
    auto vary = [](Rng& r, std::string s) {
        if (r.bernoulli(0.2)) std::transform(s.begin(), s.end(), s.begin(), ::toupper);
        if (r.bernoulli(0.2)) s = "  " + s + " ";
        return s;
    };

    std::map<std::string, std::set<std::string>> recipes;
    for (const auto& line : harness::read_lines(harness::source_path("data/fixtures/recipes.jsonl"))) {
        const Json j = Json::parse(line);
        for (const auto& part : j["ingredients"]) recipes[j["dish_id"]].insert(part["item_id"].get<std::string>());
    }

    Rng rng(derive_seed(8, "acceptance-8"));
    std::size_t leaks = 0;
    std::size_t blocked_seen = 0;
    std::size_t ranked_seen = 0;
    for (int t = 0; t < 10000; ++t) {
        PersonalFoodModel model = base;
        model.constraints.clear();
        std::set<std::string> hard;
        for (std::size_t i = 0, n = 1 + rng.index(3); i < n; ++i) {
            const auto& a = allergens[rng.index(allergens.size())];
            const bool is_hard = rng.bernoulli(0.7);
            model.constraints.push_back(static_constraint_from_json(
                Json{{"item_id", vary(rng, a)}, {"severity", is_hard ? "hard" : "soft"}}));
            if (is_hard) hard.insert(a);
        }

        Json req{{"user_id", "demo"},
                 {"goals", Json::array({Json{{"metric", "sleep_quality"}, {"direction", "increase"}, {"weight", 1}}})},
                 {"context", Json{{"at_ms", 1776108600000LL + static_cast<std::int64_t>(rng.index(86400)) * 1000},
                                  {"tz_offset_min", 60}}}};
        Json candidates = Json::array();
        std::set<std::string> used;
        for (std::size_t i = 0, n = 1 + rng.index(8); i < n; ++i) {
            const std::string dish = dishes[rng.index(dishes.size())];
            if (!used.insert(dish).second) continue;
            Json c{{"dish_id", vary(rng, dish)}};
            Json ingredients = Json::array();
            for (std::size_t k = 0, m = rng.index(4); k < m; ++k) {
                ingredients.push_back(vary(rng, rng.bernoulli(0.5) ? allergens[rng.index(allergens.size())]
                                                                  : dishes[rng.index(dishes.size())]));
            }
            c["ingredients"] = ingredients;
            candidates.push_back(c);
        }
        req["candidates"] = candidates;
        auto request = recommendation_request_from_json(req, cfg);
        engine.complete_candidates(request);
        const auto rec = recommend(request, &model, cfg);

        // Forbidden = the dish itself, anything listed with it, or anything
        // its fixture recipe contains.
        std::map<std::string, std::set<std::string>> contents;
        for (const auto& c : candidates) {
            const std::string id = c["dish_id"].get<std::string>();
            auto& names = contents[plain_name(id)];
            names.insert(plain_name(id));
            for (const auto& ing : c["ingredients"]) names.insert(plain_name(ing.get<std::string>()));
            if (auto r = recipes.find(plain_name(id)); r != recipes.end()) names.insert(r->second.begin(), r->second.end());
        }
        for (const auto& s : rec.ranked) {
            ++ranked_seen;
            for (const auto& name : contents.at(plain_name(s.dish_id))) {
                if (hard.count(name)) {
                    ++leaks;
                    break;
                }
            }
        }
        blocked_seen += rec.blocked.size();
        if (rec.ranked.size() + rec.blocked.size() != request.candidates.size()) ++leaks;
    }
    Outcome o;
    o.pass = leaks == 0 && blocked_seen > 0;
    o.detail = "10^4 requests, " + std::to_string(ranked_seen) + " ranked / " + std::to_string(blocked_seen) +
               " blocked candidates, " + std::to_string(leaks) + " hard-constrained items in a ranked list";
    return o;
}

// ---------------------------------------------------------------------------
// 9. CLI and HTTP byte identity

Outcome criterion_9() {
    const auto chronicle = harness::source_path("data/scenario/chronicle.jsonl");
    const auto hypothesis = harness::source_path("data/scenario/hypothesis.json");
    const auto request = harness::source_path("data/scenario/request.json");
    const std::string seed = "7";
    const std::string a = "food.dish";
    const std::string b = "sleep.sleep_quality:60,75";
    const std::string window = "4h";

    // CLI
    harness::TempDir cli_dir("e2e-cli");
    harness::seed_data_dir(cli_dir.path());
    std::map<std::string, std::string> via_cli;
    auto run = [&](const std::string& step, std::vector<std::string> args) {
        std::vector<std::string> full{"--data-dir", cli_dir.str(), "--seed", seed, "--json"};
        full.insert(full.end(), args.begin(), args.end());
        const auto r = harness::cli(full);
        via_cli[step] = r.code == 0 ? r.out : "exit " + std::to_string(r.code) + ": " + r.err;
    };
    run("import", {"import", chronicle.string()});
    run("enrich", {"--user", "demo", "enrich"});
    run("chronicle", {"--user", "demo", "export"});
    run("heatmap", {"--user", "demo", "heatmap", "--a", a, "--b", b, "--window", window});
    run("verify", {"--user", "demo", "verify", "--hypothesis", hypothesis.string()});
    run("model", {"--user", "demo", "model", "build"});
    run("model_full", {"--user", "demo", "model", "show"});
    run("recommend", {"--user", "demo", "recommend", "--request", request.string()});

    // HTTP
    harness::TempDir http_dir("e2e-http");
    harness::seed_data_dir(http_dir.path());
    ServiceOptions so;
    so.engine.data_dir = http_dir.path();
    so.engine.seed = std::stoull(seed);
    so.port = 0;
    so.background_enrichment = false;
    Service service(so);
    const int port = service.bind();
    std::thread server([&] { service.serve(); });
    std::map<std::string, std::string> via_http;
    std::size_t created = 0;
    {
        httplib::Client client("127.0.0.1", port);
        client.set_read_timeout(120, 0);
        auto body = [](const httplib::Result& r) {
            if (!r) return std::string("no response");
            return r->status == 200 ? r->body : "status " + std::to_string(r->status) + ": " + r->body;
        };
        for (const auto& line : harness::read_lines(chronicle)) {
            const auto r = client.Post("/v1/users/demo/events", line, "application/json");
            if (r && r->status == 201) ++created;
        }
        via_http["enrich"] = body(client.Post("/v1/users/demo/enrich", "", "application/json"));
        via_http["chronicle"] = body(client.Get("/v1/users/demo/chronicle"));
        via_http["heatmap"] = body(client.Get("/v1/users/demo/heatmap?streamA=" + httplib::detail::encode_query_param(a) +
                                              "&streamB=" + httplib::detail::encode_query_param(b) + "&window=" + window));
        via_http["verify"] = body(client.Post("/v1/users/demo/hypotheses/verify", harness::read_text(hypothesis),
                                              "application/json"));
        via_http["model"] = body(client.Post("/v1/users/demo/model/build", "", "application/json"));
        via_http["model_full"] = body(client.Get("/v1/users/demo/model/full"));
        via_http["recommend"] = body(client.Post("/v1/users/demo/recommendations", harness::read_text(request),
                                                 "application/json"));
    }
    service.stop();
    server.join();

    std::vector<std::string> differing;
    for (const auto& [step, text] : via_http) {
        if (via_cli[step] != text) differing.push_back(step);
    }
    const Json import_summary = Json::parse(via_cli["import"], nullptr, false);
    const bool import_ok = !import_summary.is_discarded() && import_summary.value("created", 0) == created && created > 0;

    Outcome o;
    o.pass = differing.empty() && import_ok;
    std::string list;
    for (const auto& d : differing) list += (list.empty() ? "" : ",") + d;
    o.detail = std::to_string(via_http.size()) + " steps compared, " + std::to_string(created) + " events ingested; " +
               (differing.empty() ? std::string("all byte-identical") : "differ: " + list);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 oracle equivalence: pattern matching and heatmaps", criterion_1},
        {"2 planted-effect recovery", criterion_2},
        {"3 null calibration", criterion_3},
        {"4 deconfounding", criterion_4},
        {"5 taste-space geometry", criterion_5},
        {"6 diet-soda scenario", criterion_6},
        {"7 preference prediction", criterion_7},
        {"8 constraint safety", criterion_8},
        {"9 end-to-end CLI/HTTP determinism", criterion_9},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = SteadyClock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << "  [" << o.detail << "; "
                  << fixed(seconds_since(t0), 1) << " s]" << std::endl;
    }
    return failed;
}
