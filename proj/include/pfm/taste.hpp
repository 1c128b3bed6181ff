#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"
#include "pfm/nutrition.hpp"
#include "pfm/taste_types.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pfm {

struct TasteSample {
    std::string item_id;
    TasteVector vector;
    std::string source;
    std::string rater;
};

struct RecipeComponent {
    std::string item_id;
    double proportion = 0.0;
};

struct WeightedRegion {
    TasteRegion region;
    double weight = 0.0;  // (0, 1]

    bool operator==(const WeightedRegion&) const = default;
};

struct PreferenceProfile {
    std::string user_id;
    std::vector<WeightedRegion> regions;
    std::size_t built_from = 0;
    int min_rating_threshold = 4;

    bool operator==(const PreferenceProfile&) const = default;
};

inline constexpr double kOverlapEpsilon = 0.01;
inline constexpr double kSubstituteSlack = 0.1;

/// Per-channel box [q(trim), q(1-trim)]; centroid is the per-channel mean of
/// the values inside that interval. Throws EmptySamples, InvalidArgument.
TasteRegion item_region(std::span<const TasteVector> samples, double trim_fraction);
TasteRegion item_region(std::span<const TasteSample> samples, double trim_fraction);

/// Proportion-weighted interval sum, clamped to [0, 1].
/// Throws UnknownIngredient, BadProportions.
TasteRegion dish_region(std::span<const RecipeComponent> recipe,
                        const std::map<std::string, TasteRegion>& item_regions);

struct ClusterOptions {
    double cutoff = 0.15;
    std::size_t clusters_max = 5;
};

/// Greedy agglomerative clustering of the centroids of food events rated at
/// or above the threshold. Throws NoRatedEvents.
PreferenceProfile preference_profile(const Chronicle& chronicle, int rating_threshold,
                                     const ClusterOptions& options = {});

/// Same, from (centroid, rating) pairs.
PreferenceProfile preference_profile(std::span<const std::pair<TasteVector, int>> rated,
                                     int rating_threshold, const ClusterOptions& options = {},
                                     std::string user_id = {});

/// Volume of intersection over volume of the smaller box, after widening
/// any channel narrower than eps to eps.
double box_overlap(const TasteRegion& a, const TasteRegion& b, double eps = kOverlapEpsilon);

/// sum_k weight_k * overlap(region, region_k), clamped to [0, 1].
double preference_score(const PreferenceProfile& profile, const TasteRegion& region);

using ChannelWeights = std::array<double, kChannels>;
inline constexpr ChannelWeights kUnitWeights = {1, 1, 1, 1, 1, 1};

double taste_distance(const TasteVector& a, const TasteVector& b, const ChannelWeights& w = kUnitWeights);

struct FoodCandidate {
    std::string item_id;
    TasteRegion region;
    NutritionFacts nutrition;
};

struct RankedSubstitute {
    std::string item_id;
    double preference_score = 0.0;
    double health_value = 0.0;
    double taste_distance = 0.0;
};

/// Candidates at least as liked as the target (minus slack), ordered by
/// ascending health_key, then taste distance to the target, then id.
/// Throws NoCandidates, InvalidArgument (unknown health key).
std::vector<RankedSubstitute> substitute_search(const FoodCandidate& target,
                                                std::span<const FoodCandidate> candidates,
                                                const PreferenceProfile& profile,
                                                const std::string& health_key, std::size_t k);

struct TasteCalibration {
    double scoville_max = 1.0e6;
    // channel -> reference label -> intensity
    std::map<std::string, std::map<std::string, double>> anchors;

    /// log10(1 + s) / log10(1 + scoville_max), clamped to [0, 1].
    double spicy_from_scoville(double scoville) const;
    std::optional<double> anchor(const std::string& channel, const std::string& label) const;
};

TasteCalibration taste_calibration_from_json(const Json& j);
TasteCalibration load_taste_calibration(const std::string& path);

// Taste fixtures: per-item samples and dish recipes.
class TasteCatalog {
public:
    TasteCatalog() = default;
    TasteCatalog(std::vector<TasteSample> samples, std::map<std::string, std::vector<RecipeComponent>> recipes,
                 double trim_fraction = 0.0);

    static TasteCatalog load(const std::string& samples_path, const std::string& recipes_path,
                             const TasteCalibration& calibration, double trim_fraction = 0.0);

    /// Item region from samples, else dish region from a recipe.
    std::optional<TasteRegion> region_for(const std::string& id) const;

    const std::map<std::string, TasteRegion>& item_regions() const { return item_regions_; }
    const std::vector<RecipeComponent>* recipe_for(const std::string& dish_id) const {
        auto it = recipes_.find(dish_id);
        return it == recipes_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, TasteRegion> item_regions_;
    std::map<std::string, std::vector<RecipeComponent>> recipes_;
};

Json to_json(const PreferenceProfile& p);
PreferenceProfile preference_profile_from_json(const Json& j);
Json to_json(const RankedSubstitute& r);

}  // namespace pfm
