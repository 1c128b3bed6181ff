#pragma once

#include "pfm/json.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pfm {

struct Amount {
    double value = 0.0;
    std::string unit;

    bool operator==(const Amount&) const = default;
};

struct NutritionFacts {
    double kcal = 0.0;
    double carb_g = 0.0;
    double protein_g = 0.0;
    double fat_g = 0.0;
    double fiber_g = 0.0;
    double sugar_g = 0.0;
    double caffeine_mg = 0.0;
    double capsaicin_scoville = 0.0;
    std::map<std::string, Amount> micronutrients;  // b12 (ug), folate (ug), magnesium (mg), ...

    bool operator==(const NutritionFacts&) const = default;

    /// Macro fields by name, then micronutrients by name.
    std::optional<double> field(std::string_view name) const;

    NutritionFacts scaled(double factor) const;

    /// Negative amounts; empty when valid.
    std::vector<std::string> violations() const;

    /// kcal within +-25% of 4*carb + 4*protein + 9*fat. Vacuously true without macros.
    bool energy_consistent() const;
};

bool is_nutrition_field(std::string_view name);

Json to_json(const NutritionFacts& n);
NutritionFacts nutrition_from_json(const Json& j);

}  // namespace pfm
