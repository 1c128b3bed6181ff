#include "pfm/nutrition.hpp"

#include "pfm/error.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace pfm {

namespace {

using Member = double NutritionFacts::*;

constexpr std::array<std::pair<std::string_view, Member>, 8> kFields = {{
    {"kcal", &NutritionFacts::kcal},
    {"carb_g", &NutritionFacts::carb_g},
    {"protein_g", &NutritionFacts::protein_g},
    {"fat_g", &NutritionFacts::fat_g},
    {"fiber_g", &NutritionFacts::fiber_g},
    {"sugar_g", &NutritionFacts::sugar_g},
    {"caffeine_mg", &NutritionFacts::caffeine_mg},
    {"capsaicin_scoville", &NutritionFacts::capsaicin_scoville},
}};

}  // namespace

bool is_nutrition_field(std::string_view name) {
    for (const auto& [n, _] : kFields) {
        if (n == name) return true;
    }
    return false;
}

std::optional<double> NutritionFacts::field(std::string_view name) const {
    for (const auto& [n, m] : kFields) {
        if (n == name) return this->*m;
    }
    if (auto it = micronutrients.find(std::string(name)); it != micronutrients.end()) {
        return it->second.value;
    }
    return std::nullopt;
}

NutritionFacts NutritionFacts::scaled(double factor) const {
    NutritionFacts out = *this;
    for (const auto& [_, m] : kFields) out.*m *= factor;
    for (auto& [_, a] : out.micronutrients) a.value *= factor;
    return out;
}

std::vector<std::string> NutritionFacts::violations() const {
    std::vector<std::string> out;
    for (const auto& [n, m] : kFields) {
        if (!(this->*m >= 0.0)) out.push_back(std::string(n) + " must be >= 0");
    }
    for (const auto& [n, a] : micronutrients) {
        if (!(a.value >= 0.0)) out.push_back("micronutrient " + n + " must be >= 0");
    }
    return out;
}

bool NutritionFacts::energy_consistent() const {
    if (carb_g <= 0.0 || protein_g <= 0.0 || fat_g <= 0.0) return true;
    const double expected = 4.0 * carb_g + 4.0 * protein_g + 9.0 * fat_g;
    return std::fabs(kcal - expected) <= 0.25 * expected;
}

Json to_json(const NutritionFacts& n) {
    Json j = Json::object();
    for (const auto& [name, m] : kFields) j[std::string(name)] = num(n.*m);
    Json micro = Json::object();
    for (const auto& [name, a] : n.micronutrients) {
        micro[name] = Json{{"unit", a.unit}, {"value", num(a.value)}};
    }
    j["micronutrients"] = micro;
    return j;
}

NutritionFacts nutrition_from_json(const Json& j) {
    if (!j.is_object()) fail(ErrorCode::ParseError, "nutrition must be an object");
    NutritionFacts n;
    for (const auto& [name, m] : kFields) {
        if (auto it = j.find(std::string(name)); it != j.end()) {
            if (!it->is_number()) fail(ErrorCode::ParseError, "nutrition." + std::string(name) + " must be a number");
            n.*m = it->get<double>();
        }
    }
    if (auto it = j.find("micronutrients"); it != j.end()) {
        if (!it->is_object()) fail(ErrorCode::ParseError, "nutrition.micronutrients must be an object");
        for (const auto& [name, v] : it->items()) {
            if (!v.is_object() || !v.contains("value") || !v["value"].is_number()) {
                fail(ErrorCode::ParseError, "nutrition.micronutrients." + name + " needs a numeric value");
            }
            n.micronutrients[name] = Amount{v["value"].get<double>(), v.value("unit", std::string{})};
        }
    }
    return n;
}

}  // namespace pfm
