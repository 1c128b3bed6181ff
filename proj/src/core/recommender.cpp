#include "pfm/recommender.hpp"

#include "pfm/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pfm {

std::vector<std::string> validate(const RecommendationRequest& r) {
    std::vector<std::string> out;
    if (r.goals.empty()) out.emplace_back("at least one goal is required");
    double sum = 0.0;
    for (const auto& g : r.goals) {
        if (!(g.weight >= 0.0)) out.push_back("goal weight of " + g.metric + " must be >= 0");
        sum += g.weight;
    }
    if (!r.goals.empty() && !(sum > 0.0)) out.emplace_back("goal weights must sum to > 0");
    if (!(r.w_pref >= 0.0 && r.w_health >= 0.0) || std::abs(r.w_pref + r.w_health - 1.0) > 1e-9) {
        out.emplace_back("w_pref and w_health must be >= 0 and sum to 1");
    }
    std::set<std::string> ids;
    for (const auto& c : r.candidates) {
        if (c.dish_id.empty()) out.emplace_back("candidate without dish_id");
        if (!ids.insert(c.dish_id).second) out.push_back("candidate " + c.dish_id + " listed twice");
    }
    return out;
}

RecommendationRequest recommendation_request_from_json(const Json& j, const EngineConfig& cfg) {
    RecommendationRequest r;
    r.w_pref = cfg.w_pref;
    r.w_health = cfg.w_health;
    try {
        r.user_id = j.value("user_id", std::string());
        r.context = prediction_context_from_json(j.at("context"));
        r.place = j["context"].value("place", std::string());
        for (const auto& jc : j.at("candidates")) {
            DishCandidate c;
            if (jc.is_string()) {
                c.dish_id = normalize_dish_name(jc.get<std::string>());
            } else {
                c.dish_id = normalize_dish_name(jc.at("dish_id").get<std::string>());
                if (jc.contains("region")) c.region = taste_region_from_json(jc["region"]);
                if (jc.contains("nutrition")) c.nutrition = nutrition_from_json(jc["nutrition"]);
                if (jc.contains("ingredients")) {
                    for (const auto& i : jc["ingredients"]) c.ingredients.push_back(normalize_dish_name(i.get<std::string>()));
                }
                if (jc.contains("quantity_g")) c.quantity_g = jc["quantity_g"].get<double>();
            }
            r.candidates.push_back(std::move(c));
        }
        for (const auto& jg : j.at("goals")) {
            Goal g;
            g.metric = jg.at("metric").get<std::string>();
            const std::string dir = jg.at("direction").get<std::string>();
            if (dir == "increase") g.direction = Direction::Increase;
            else if (dir == "decrease") g.direction = Direction::Decrease;
            else fail(ErrorCode::SchemaError, "goal direction must be increase or decrease");
            g.weight = jg.value("weight", 1.0);
            r.goals.push_back(std::move(g));
        }
        if (j.contains("weights")) {
            r.w_pref = j["weights"].value("w_pref", r.w_pref);
            r.w_health = j["weights"].value("w_health", r.w_health);
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("recommendation request: ") + e.what());
    }
    return r;
}

Json to_json(const RecommendationRequest& r) {
    Json candidates = Json::array();
    for (const auto& c : r.candidates) {
        Json jc{{"dish_id", c.dish_id}, {"ingredients", c.ingredients}};
        if (c.region) jc["region"] = to_json(*c.region);
        if (c.nutrition) jc["nutrition"] = to_json(*c.nutrition);
        if (c.quantity_g) jc["quantity_g"] = num(*c.quantity_g);
        candidates.push_back(jc);
    }
    Json goals = Json::array();
    for (const auto& g : r.goals) {
        goals.push_back(Json{{"direction", std::string(to_string(g.direction))}, {"metric", g.metric}, {"weight", num(g.weight)}});
    }
    Json ctx = to_json(r.context);
    if (!r.place.empty()) ctx["place"] = r.place;
    return Json{{"candidates", candidates},
                {"context", ctx},
                {"goals", goals},
                {"user_id", r.user_id},
                {"weights", Json{{"w_health", num(r.w_health)}, {"w_pref", num(r.w_pref)}}}};
}

FoodEvent hypothetical_event(const DishCandidate& dish, const RecommendationRequest& request) {
    FoodEvent e;
    e.event_id = "whatif:" + dish.dish_id;
    e.user_id = request.user_id.empty() ? "whatif" : request.user_id;
    e.dish = dish.dish_id;
    for (const auto& i : dish.ingredients) e.items.push_back(FoodItem{i, 0.0});
    e.quantity_g = dish.quantity_g;
    e.start_ms = request.context.at;
    e.logged_ms = request.context.at;
    e.tz_offset_min = request.context.tz_offset_min;
    e.place = request.place;
    e.nutrition = dish.nutrition;
    e.taste = dish.region;
    return e;
}

double health_utility(const std::vector<OutcomePrediction>& predictions, const std::vector<Goal>& goals,
                      const EngineConfig& cfg) {
    double wsum = 0.0;
    for (const auto& g : goals) wsum += g.weight;
    if (!(wsum > 0.0)) fail(ErrorCode::InvalidArgument, "goal weights must sum to > 0");
    double h = 0.0;
    for (const auto& g : goals) {
        double u = 0.5;
        for (const auto& p : predictions) {
            if (p.metric != g.metric) continue;
            const double aligned = g.direction == Direction::Increase ? p.delta : -p.delta;
            u = 0.5 + 0.5 * std::clamp(aligned / cfg.cap_for(g.metric), -1.0, 1.0);
        }
        h += g.weight / wsum * u;
    }
    return std::clamp(h, 0.0, 1.0);
}

ScoredItem score_candidate(const PersonalFoodModel& model, const DishCandidate& dish,
                           const RecommendationRequest& request, const EngineConfig& cfg) {
    ScoredItem s;
    s.dish_id = dish.dish_id;
    std::vector<std::string> names{normalize_dish_name(dish.dish_id)};
    for (const auto& i : dish.ingredients) names.push_back(normalize_dish_name(i));
    bool soft = false;
    for (const auto& c : model.constraints) {
        if (std::find(names.begin(), names.end(), c.item_id) == names.end()) continue;
        const std::string why = c.item_id + (c.reason.empty() ? "" : " (" + c.reason + ")");
        if (c.severity == Severity::Hard) {
            s.blocked = true;
            s.blocked_reasons.push_back(why);
        } else {
            soft = true;
            s.soft_flags.push_back(why);
        }
    }
    s.predictions = predict_outcome(model, hypothetical_event(dish, request), request.context, cfg);
    if (model.preference && dish.region) s.preference = preference_score(*model.preference, *dish.region);
    s.health_utility = health_utility(s.predictions, request.goals, cfg);
    double total = request.w_pref * s.preference + request.w_health * s.health_utility;
    if (soft) total -= cfg.soft_penalty;
    s.total = std::clamp(total, 0.0, 1.0);
    return s;
}

Recommendation recommend(const RecommendationRequest& request, const PersonalFoodModel* model,
                         const EngineConfig& cfg) {
    if (!model) fail(ErrorCode::NoModel, "no model for user " + request.user_id);
    if (request.candidates.empty()) fail(ErrorCode::NoCandidates, "no candidates");
    if (auto problems = validate(request); !problems.empty()) fail(ErrorCode::InvalidArgument, problems.front());

    Recommendation out;
    out.user_id = request.user_id.empty() ? model->user_id : request.user_id;
    out.model_built_at = model->built_at;
    for (const auto& dish : request.candidates) {
        auto s = score_candidate(*model, dish, request, cfg);
        (s.blocked ? out.blocked : out.ranked).push_back(std::move(s));
    }
    std::sort(out.ranked.begin(), out.ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.total != b.total) return a.total > b.total;
        return a.dish_id < b.dish_id;
    });
    std::sort(out.blocked.begin(), out.blocked.end(),
              [](const ScoredItem& a, const ScoredItem& b) { return a.dish_id < b.dish_id; });
    return out;
}

Json to_json(const ScoredItem& s) {
    Json preds = Json::array();
    Json rules = Json::array();
    for (const auto& p : s.predictions) {
        preds.push_back(to_json(p));
        for (const auto& c : p.contributions) {
            rules.push_back(Json{{"delta", num(c.delta)}, {"metric", p.metric}, {"prior_only", c.prior_only}, {"rule_id", c.rule_id}});
        }
    }
    Json j{{"dish_id", s.dish_id},
           {"explanation", Json{{"predictions", preds}, {"rules", rules}, {"soft_flags", s.soft_flags}}},
           {"blocked", s.blocked}};
    if (s.blocked) {
        j["reasons"] = s.blocked_reasons;
        return j;
    }
    j["health_utility"] = num(s.health_utility);
    j["preference"] = num(s.preference);
    j["total"] = num(s.total);
    return j;
}

Json to_json(const Recommendation& r) {
    Json ranked = Json::array();
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
        Json j = to_json(r.ranked[i]);
        j["rank"] = i + 1;
        ranked.push_back(j);
    }
    Json blocked = Json::array();
    for (const auto& b : r.blocked) blocked.push_back(Json{{"dish_id", b.dish_id}, {"reasons", b.blocked_reasons}});
    return Json{{"blocked", blocked}, {"model_built_at", r.model_built_at}, {"ranked", ranked}, {"user_id", r.user_id}};
}

}  // namespace pfm
