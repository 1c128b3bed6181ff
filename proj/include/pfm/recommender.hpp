#pragma once

#include "pfm/config.hpp"
#include "pfm/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pfm {

struct Goal {
    std::string metric;
    Direction direction = Direction::Increase;
    double weight = 1.0;
};

struct DishCandidate {
    std::string dish_id;
    std::optional<TasteRegion> region;
    std::optional<NutritionFacts> nutrition;
    std::vector<std::string> ingredients;
    std::optional<double> quantity_g;
};

struct RecommendationRequest {
    std::string user_id;
    PredictionContext context;
    std::string place;
    std::vector<DishCandidate> candidates;
    std::vector<Goal> goals;
    double w_pref = 0.5;
    double w_health = 0.5;
};

std::vector<std::string> validate(const RecommendationRequest& r);

/// Candidates may omit region/nutrition; the caller fills them in.
RecommendationRequest recommendation_request_from_json(const Json& j, const EngineConfig& cfg);
Json to_json(const RecommendationRequest& r);

struct ScoredItem {
    std::string dish_id;
    double total = 0.0;
    double preference = 0.0;
    double health_utility = 0.5;
    bool blocked = false;
    std::vector<std::string> blocked_reasons;
    std::vector<std::string> soft_flags;
    std::vector<OutcomePrediction> predictions;
};

struct Recommendation {
    std::string user_id;
    std::vector<ScoredItem> ranked;   // never contains a blocked item
    std::vector<ScoredItem> blocked;  // by dish id
    TimestampMs model_built_at = 0;
};

/// The hypothetical food event a candidate stands for in this context.
FoodEvent hypothetical_event(const DishCandidate& dish, const RecommendationRequest& request);

/// 0.5 + 0.5 * clamp(aligned delta / cap, -1, 1), goal-weight averaged;
/// metrics without a prediction count as 0.5.
double health_utility(const std::vector<OutcomePrediction>& predictions, const std::vector<Goal>& goals,
                      const EngineConfig& cfg);

ScoredItem score_candidate(const PersonalFoodModel& model, const DishCandidate& dish,
                           const RecommendationRequest& request, const EngineConfig& cfg);

/// Throws NoModel (null model), NoCandidates, InvalidArgument.
Recommendation recommend(const RecommendationRequest& request, const PersonalFoodModel* model,
                         const EngineConfig& cfg);

Json to_json(const ScoredItem& s);
Json to_json(const Recommendation& r);

}  // namespace pfm
