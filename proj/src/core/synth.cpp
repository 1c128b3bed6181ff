#include "pfm/synth.hpp"

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace pfm {

namespace {

std::string clock(int minutes) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

Json map_json(const std::map<std::string, double>& m) {
    Json j = Json::object();
    for (const auto& [k, v] : m) j[k] = num(v);
    return j;
}

std::map<std::string, double> map_from(const Json& j) {
    std::map<std::string, double> m;
    for (const auto& [k, v] : j.items()) m[k] = v.get<double>();
    return m;
}

double clamp_metric(const std::string& metric, double v) {
    if (declared_unit(metric) == std::optional<std::string_view>("score")) return std::clamp(v, 0.0, 100.0);
    return std::max(v, 0.0);
}

NutritionFacts meal_nutrition(double kcal) {
    NutritionFacts n;
    n.kcal = kcal;
    n.carb_g = 0.5 * kcal / 4.0;
    n.protein_g = 0.2 * kcal / 4.0;
    n.fat_g = 0.3 * kcal / 9.0;
    n.sugar_g = 0.1 * kcal / 4.0;
    n.fiber_g = 0.012 * kcal;
    return n;
}

// Rounded to 0.1 so that exported chronicles stay short and exact.
double round1(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace

SynthSpec default_synth_spec() {
    SynthSpec s;
    s.start_day = parse_date_days("2026-01-05");
    s.meals = {
        MealSlot{"breakfast", 8 * 60, 30.0, 450.0, 40.0, {"oatmeal", "toast with jam", "yogurt bowl"}},
        MealSlot{"lunch", 12 * 60 + 30, 30.0, 600.0, 40.0, {"chicken salad", "lentil soup", "turkey sandwich"}},
        MealSlot{"dinner", 20 * 60 + 15, 15.0, 650.0, 40.0, {"salmon rice", "pasta primavera", "vegetable stir fry"}},
    };
    return s;
}

std::vector<std::string> validate(const SynthSpec& s) {
    std::vector<std::string> out;
    if (s.days < 1) out.emplace_back("days must be >= 1");
    if (s.user_id.empty()) out.emplace_back("user_id must be non-empty");
    bool has_dinner = false;
    for (const auto& m : s.meals) {
        if (m.dishes.empty()) out.push_back("meal '" + m.slot + "' needs at least one dish");
        if (m.kcal_sd < 0.0 || m.jitter_min < 0.0) out.push_back("meal '" + m.slot + "': sd and jitter must be >= 0");
        has_dinner = has_dinner || m.slot == "dinner";
    }
    for (const auto& [metric, sigma] : s.sleep.noise_sigma) {
        if (!(sigma >= 0.0)) out.push_back("noise sigma of " + metric + " must be >= 0");
    }
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(s.exercise.probability)) out.emplace_back("exercise probability must be in [0, 1]");
    for (const auto& t : s.treatments) {
        const std::string where = "treatment '" + t.name + "'";
        if (t.name.empty()) out.emplace_back("treatment needs a name");
        if (t.kind != "heavy_dinner" && t.kind != "evening_item") out.push_back(where + ": unknown kind '" + t.kind + "'");
        if (t.kind == "heavy_dinner" && !has_dinner) out.push_back(where + ": needs a dinner meal slot");
        if (t.kind == "evening_item" && t.item.empty()) out.push_back(where + ": needs an item");
        if (!prob_ok(t.probability) || (t.probability_given_exercise && !prob_ok(*t.probability_given_exercise))) {
            out.push_back(where + ": probabilities must be in [0, 1]");
        }
    }
    return out;
}

SynthSpec synth_spec_from_json(const Json& j) {
    SynthSpec s = default_synth_spec();
    try {
        s.user_id = j.value("user_id", s.user_id);
        s.days = j.value("days", s.days);
        s.seed = j.value("seed", s.seed);
        if (j.contains("start_date")) s.start_day = parse_date_days(j["start_date"].get<std::string>());
        s.tz_offset_min = j.value("tz_offset_min", s.tz_offset_min);
        if (j.contains("meals")) {
            s.meals.clear();
            for (const auto& m : j["meals"]) {
                MealSlot slot;
                slot.slot = m.at("slot").get<std::string>();
                slot.time_min = parse_clock_minutes(m.at("time").get<std::string>());
                slot.jitter_min = m.value("jitter_min", 0.0);
                slot.kcal_mean = m.at("kcal_mean").get<double>();
                slot.kcal_sd = m.value("kcal_sd", 0.0);
                slot.dishes = m.at("dishes").get<std::vector<std::string>>();
                s.meals.push_back(std::move(slot));
            }
        }
        if (j.contains("sleep")) {
            const Json& sl = j["sleep"];
            if (sl.contains("bedtime")) s.sleep.bedtime_min = parse_clock_minutes(sl["bedtime"].get<std::string>());
            s.sleep.jitter_min = sl.value("jitter_min", s.sleep.jitter_min);
            s.sleep.duration_h = sl.value("duration_h", s.sleep.duration_h);
            if (sl.contains("baseline")) s.sleep.baseline = map_from(sl["baseline"]);
            if (sl.contains("noise_sigma")) s.sleep.noise_sigma = map_from(sl["noise_sigma"]);
        }
        if (j.contains("exercise")) {
            const Json& ex = j["exercise"];
            s.exercise.probability = ex.value("probability", 0.0);
            if (ex.contains("time")) s.exercise.time_min = parse_clock_minutes(ex["time"].get<std::string>());
            s.exercise.jitter_min = ex.value("jitter_min", s.exercise.jitter_min);
            s.exercise.duration_min = ex.value("duration_min", s.exercise.duration_min);
            if (ex.contains("effects")) s.exercise.effects = map_from(ex["effects"]);
        }
        if (j.contains("treatments")) {
            for (const auto& t : j["treatments"]) {
                TreatmentSpec ts;
                ts.name = t.at("name").get<std::string>();
                ts.kind = t.at("kind").get<std::string>();
                ts.probability = t.at("probability").get<double>();
                if (t.contains("probability_given_exercise") && !t["probability_given_exercise"].is_null()) {
                    ts.probability_given_exercise = t["probability_given_exercise"].get<double>();
                }
                ts.kcal_multiplier = t.value("kcal_multiplier", ts.kcal_multiplier);
                ts.item = t.value("item", std::string());
                if (t.contains("time")) ts.time_min = parse_clock_minutes(t["time"].get<std::string>());
                ts.jitter_min = t.value("jitter_min", ts.jitter_min);
                ts.item_kcal = t.value("item_kcal", ts.item_kcal);
                if (t.contains("effects")) ts.effects = map_from(t["effects"]);
                s.treatments.push_back(std::move(ts));
            }
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("synth spec: ") + e.what());
    }
    if (auto problems = validate(s); !problems.empty()) fail(ErrorCode::SchemaError, "synth spec: " + problems.front());
    return s;
}

Json to_json(const SynthSpec& s) {
    Json meals = Json::array();
    for (const auto& m : s.meals) {
        meals.push_back(Json{{"dishes", m.dishes},
                             {"jitter_min", num(m.jitter_min)},
                             {"kcal_mean", num(m.kcal_mean)},
                             {"kcal_sd", num(m.kcal_sd)},
                             {"slot", m.slot},
                             {"time", clock(m.time_min)}});
    }
    Json treatments = Json::array();
    for (const auto& t : s.treatments) {
        Json jt{{"effects", map_json(t.effects)}, {"kind", t.kind}, {"name", t.name}, {"probability", num(t.probability)}};
        if (t.probability_given_exercise) jt["probability_given_exercise"] = num(*t.probability_given_exercise);
        if (t.kind == "heavy_dinner") jt["kcal_multiplier"] = num(t.kcal_multiplier);
        if (t.kind == "evening_item") {
            jt["item"] = t.item;
            jt["item_kcal"] = num(t.item_kcal);
            jt["jitter_min"] = num(t.jitter_min);
            jt["time"] = clock(t.time_min);
        }
        treatments.push_back(jt);
    }
    return Json{{"days", s.days},
                {"exercise", Json{{"duration_min", num(s.exercise.duration_min)},
                                  {"effects", map_json(s.exercise.effects)},
                                  {"jitter_min", num(s.exercise.jitter_min)},
                                  {"probability", num(s.exercise.probability)},
                                  {"time", clock(s.exercise.time_min)}}},
                {"meals", meals},
                {"seed", s.seed},
                {"sleep", Json{{"baseline", map_json(s.sleep.baseline)},
                               {"bedtime", clock(s.sleep.bedtime_min)},
                               {"duration_h", num(s.sleep.duration_h)},
                               {"jitter_min", num(s.sleep.jitter_min)},
                               {"noise_sigma", map_json(s.sleep.noise_sigma)}}},
                {"start_date", format_date(s.start_day)},
                {"treatments", treatments},
                {"tz_offset_min", s.tz_offset_min},
                {"user_id", s.user_id}};
}

SynthResult generate(const SynthSpec& spec) {
    if (auto problems = validate(spec); !problems.empty()) fail(ErrorCode::InvalidArgument, problems.front());

    // Independent streams, so that e.g. changing a treatment probability does
    // not move the sleep noise of every night.
    Rng ex_rng(derive_seed(spec.seed, "exercise"));
    Rng treat_rng(derive_seed(spec.seed, "treatments"));
    Rng meal_rng(derive_seed(spec.seed, "meals"));
    Rng sleep_rng(derive_seed(spec.seed, "sleep"));

    SynthResult out;
    out.chronicle = Chronicle(spec.user_id);
    std::map<std::string, std::map<std::string, double>> effect_sum;

    auto at = [&](std::int64_t day, double minute) -> TimestampMs {
        const double local_min = static_cast<double>(day) * 1440.0 + minute - spec.tz_offset_min;
        return static_cast<TimestampMs>(std::llround(local_min * 60.0)) * 1000;
    };

    for (int d = 0; d < spec.days; ++d) {
        const std::int64_t day = spec.start_day + d;
        char tag[16];
        std::snprintf(tag, sizeof tag, "d%03d", d);
        const std::string prefix = spec.user_id + "-" + tag + "-";

        const bool exercised = ex_rng.bernoulli(spec.exercise.probability);
        const double ex_jitter = ex_rng.uniform(-spec.exercise.jitter_min, spec.exercise.jitter_min);

        std::vector<const TreatmentSpec*> applied;
        std::vector<double> item_jitter;
        for (const auto& t : spec.treatments) {
            const double p = exercised && t.probability_given_exercise ? *t.probability_given_exercise : t.probability;
            const bool on = treat_rng.bernoulli(p);
            const double j = treat_rng.uniform(-t.jitter_min, t.jitter_min);
            if (on) {
                applied.push_back(&t);
                item_jitter.push_back(j);
            }
        }

        if (exercised) {
            LifeEvent ex;
            ex.event_id = prefix + "exercise";
            ex.user_id = spec.user_id;
            ex.stream = "exercise";
            ex.start_ms = at(day, spec.exercise.time_min + ex_jitter);
            ex.end_ms = ex.start_ms + static_cast<TimestampMs>(std::llround(spec.exercise.duration_min * kMinuteMs));
            ex.tz_offset_min = spec.tz_offset_min;
            ex.attributes["duration_min"] = Measurement{spec.exercise.duration_min, "min"};
            out.chronicle.append(ex);
        }

        for (const auto& slot : spec.meals) {
            const double jitter = meal_rng.uniform(-slot.jitter_min, slot.jitter_min);
            double kcal = std::max(50.0, slot.kcal_mean + slot.kcal_sd * meal_rng.normal());
            const auto& dish = slot.dishes[meal_rng.index(slot.dishes.size())];
            for (const auto* t : applied) {
                if (t->kind == "heavy_dinner" && slot.slot == "dinner") kcal *= t->kcal_multiplier;
            }
            kcal = round1(kcal);
            FoodEvent f;
            f.event_id = prefix + slot.slot;
            f.user_id = spec.user_id;
            f.dish = dish;
            f.quantity_g = round1(kcal / 1.8);
            f.items.push_back(FoodItem{dish, *f.quantity_g});
            f.start_ms = at(day, slot.time_min + jitter);
            f.logged_ms = f.start_ms + 10 * kMinuteMs;
            f.tz_offset_min = spec.tz_offset_min;
            f.place = "home";
            f.nutrition = meal_nutrition(kcal);
            f.provenance["why.nutrition"] = Provenance{ProvenanceKind::Derived, "synth"};
            out.chronicle.append(f);
        }

        for (std::size_t k = 0; k < applied.size(); ++k) {
            const auto* t = applied[k];
            if (t->kind != "evening_item") continue;
            FoodEvent f;
            f.event_id = prefix + t->name;
            f.user_id = spec.user_id;
            f.dish = t->item;
            f.quantity_g = round1(t->item_kcal / 0.6);
            f.items.push_back(FoodItem{t->item, *f.quantity_g});
            f.start_ms = at(day, t->time_min + item_jitter[k]);
            f.logged_ms = f.start_ms + 5 * kMinuteMs;
            f.tz_offset_min = spec.tz_offset_min;
            f.place = "home";
            f.nutrition = meal_nutrition(t->item_kcal);
            f.provenance["why.nutrition"] = Provenance{ProvenanceKind::Derived, "synth"};
            out.chronicle.append(f);
        }

        const double bed_jitter = sleep_rng.uniform(-spec.sleep.jitter_min, spec.sleep.jitter_min);
        SynthNight night;
        night.date = format_date(day);
        night.sleep_event_id = prefix + "sleep";
        night.exercised = exercised;
        for (const auto* t : applied) night.treatments.push_back(t->name);

        LifeEvent sleep;
        sleep.event_id = night.sleep_event_id;
        sleep.user_id = spec.user_id;
        sleep.stream = "sleep";
        sleep.start_ms = at(day, spec.sleep.bedtime_min + bed_jitter);
        sleep.end_ms = sleep.start_ms + static_cast<TimestampMs>(std::llround(spec.sleep.duration_h * kHourMs));
        sleep.tz_offset_min = spec.tz_offset_min;
        for (const auto& [metric, base] : spec.sleep.baseline) {
            auto sigma_it = spec.sleep.noise_sigma.find(metric);
            const double sigma = sigma_it == spec.sleep.noise_sigma.end() ? 0.0 : sigma_it->second;
            double y = base + sigma * sleep_rng.normal();
            if (exercised) {
                if (auto it = spec.exercise.effects.find(metric); it != spec.exercise.effects.end()) y += it->second;
            }
            double total_effect = 0.0;
            for (const auto* t : applied) {
                if (auto it = t->effects.find(metric); it != t->effects.end()) total_effect += it->second;
            }
            const double observed = round1(clamp_metric(metric, y + total_effect));
            night.observed[metric] = observed;
            for (const auto* t : applied) {
                auto it = t->effects.find(metric);
                const double own = it == t->effects.end() ? 0.0 : it->second;
                const double cf = round1(clamp_metric(metric, y + total_effect - own));
                night.counterfactual[t->name][metric] = cf;
                effect_sum[t->name][metric] += observed - cf;
            }
            const auto unit = declared_unit(metric);
            sleep.attributes[metric] = Measurement{observed, unit ? std::string(*unit) : std::string()};
        }
        out.chronicle.append(sleep);
        for (const auto* t : applied) ++out.truth.n_treated[t->name];
        out.truth.nights.push_back(std::move(night));
    }

    for (const auto& t : spec.treatments) {
        const auto n = out.truth.n_treated[t.name];
        for (const auto& [metric, base] : spec.sleep.baseline) {
            (void)base;
            out.truth.true_ate[t.name][metric] = n == 0 ? 0.0 : effect_sum[t.name][metric] / static_cast<double>(n);
        }
    }
    return out;
}

Json to_json(const GroundTruth& t, const SynthSpec& spec) {
    Json nights = Json::array();
    for (const auto& n : t.nights) {
        Json cf = Json::object();
        for (const auto& [name, m] : n.counterfactual) cf[name] = map_json(m);
        nights.push_back(Json{{"counterfactual", cf},
                              {"date", n.date},
                              {"exercised", n.exercised},
                              {"observed", map_json(n.observed)},
                              {"sleep_event_id", n.sleep_event_id},
                              {"treatments", n.treatments}});
    }
    Json planted = Json::array();
    for (const auto& tr : spec.treatments) {
        planted.push_back(Json{{"effects", map_json(tr.effects)}, {"kind", tr.kind}, {"treatment", tr.name}});
    }
    Json ate = Json::object();
    for (const auto& [name, m] : t.true_ate) ate[name] = map_json(m);
    Json counts = Json::object();
    for (const auto& [name, n] : t.n_treated) counts[name] = n;
    return Json{{"exercise_effects", map_json(spec.exercise.effects)},
                {"n_treated", counts},
                {"nights", nights},
                {"planted", planted},
                {"spec", to_json(spec)},
                {"true_ate", ate}};
}

}  // namespace pfm
