#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pfm {

struct MealSlot {
    std::string slot;  // breakfast, lunch, dinner, ...
    int time_min = 0;  // local minutes after midnight
    double jitter_min = 0.0;
    double kcal_mean = 500.0;
    double kcal_sd = 0.0;
    std::vector<std::string> dishes;
};

struct SleepSpec {
    int bedtime_min = 22 * 60 + 45;
    double jitter_min = 15.0;
    double duration_h = 7.5;
    std::map<std::string, double> baseline{{"sleep_quality", 70.0}, {"sleep_latency", 15.0}};
    std::map<std::string, double> noise_sigma{{"sleep_quality", 5.0}, {"sleep_latency", 3.0}};
};

struct ExerciseSpec {
    double probability = 0.0;
    int time_min = 18 * 60;
    double jitter_min = 30.0;
    double duration_min = 45.0;
    std::map<std::string, double> effects;  // on that night's sleep metrics
};

// A planted treatment. "heavy_dinner" scales the dinner's energy;
// "evening_item" adds a small food event at `time_min`.
struct TreatmentSpec {
    std::string name;
    std::string kind;
    double probability = 0.0;
    std::optional<double> probability_given_exercise;
    double kcal_multiplier = 2.0;
    std::string item;
    int time_min = 21 * 60 + 30;
    double jitter_min = 15.0;
    double item_kcal = 90.0;
    std::map<std::string, double> effects;
};

struct SynthSpec {
    std::string user_id = "synth";
    int days = 90;
    std::uint64_t seed = 1;
    std::int64_t start_day = 0;  // days since 1970-01-01, local
    int tz_offset_min = 0;
    std::vector<MealSlot> meals;
    SleepSpec sleep;
    ExerciseSpec exercise;
    std::vector<TreatmentSpec> treatments;
};

/// Defaults: three meals, dinner 20:15 +-15 min, bedtime 22:45 +-15 min.
SynthSpec default_synth_spec();

std::vector<std::string> validate(const SynthSpec& s);
SynthSpec synth_spec_from_json(const Json& j);
Json to_json(const SynthSpec& s);

struct SynthNight {
    std::string date;
    std::string sleep_event_id;
    bool exercised = false;
    std::vector<std::string> treatments;
    std::map<std::string, double> observed;
    // treatment -> metric -> outcome of the same night without that treatment
    std::map<std::string, std::map<std::string, double>> counterfactual;
};

struct GroundTruth {
    std::vector<SynthNight> nights;
    // treatment -> metric -> mean over treated nights of the treatment's own effect
    std::map<std::string, std::map<std::string, double>> true_ate;
    std::map<std::string, std::size_t> n_treated;
};

struct SynthResult {
    Chronicle chronicle;
    GroundTruth truth;
};

/// Deterministic given spec (including seed). Sleep metrics are clamped to
/// [0, 100] for scores and [0, inf) otherwise.
SynthResult generate(const SynthSpec& spec);

Json to_json(const GroundTruth& t, const SynthSpec& spec);

}  // namespace pfm
