#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/config.hpp"
#include "pfm/json.hpp"
#include "pfm/taste.hpp"
#include "pfm/verify.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pfm {

enum class Direction { Increase, Decrease };
enum class Strength { Weak, Moderate, Strong };

std::string_view to_string(Direction d);
std::string_view to_string(Strength s);

// Expert rule whose hypothesis is a JSON template with "${param}" slots.
struct KnowledgeRule {
    std::string rule_id;
    std::string description;
    Json hypothesis_template = Json::object();
    Json params = Json::object();
    Direction prior_direction = Direction::Increase;
    Strength prior_strength = Strength::Weak;
    std::string citation;

    bool operator==(const KnowledgeRule&) const = default;
};

/// Fills the template with params (overrides win) and parses it. The
/// hypothesis is named after the rule. Throws SchemaError naming the rule.
Hypothesis instantiate(const KnowledgeRule& rule, const Json& overrides = Json::object());

Json to_json(const KnowledgeRule& r);
KnowledgeRule knowledge_rule_from_json(const Json& j);

/// {"rules": [...]}. Every template must instantiate. Throws SchemaError.
std::vector<KnowledgeRule> seed_rulebase(const Json& j);
std::vector<KnowledgeRule> load_rulebase(const std::string& path);

enum class RuleStatus { Verified, PriorOnly };

struct ModelRule {
    KnowledgeRule knowledge;
    Hypothesis hypothesis;  // instantiated
    RuleStatus status = RuleStatus::PriorOnly;
    std::string reason;     // why the rule is prior-only
    std::optional<VerifiedRule> verified;
    std::optional<EventPattern> resolved_input;  // when the chronicle has the statistics
};

enum class Severity { Hard, Soft };

struct StaticConstraint {
    std::string item_id;
    Severity severity = Severity::Hard;
    std::string reason;

    bool operator==(const StaticConstraint&) const = default;
};

Json to_json(const StaticConstraint& c);
StaticConstraint static_constraint_from_json(const Json& j);

struct ChronicleSpan {
    TimestampMs from_ms = 0;
    TimestampMs to_ms = 0;
    std::int64_t days = 0;
    std::size_t events = 0;
};

/// Calendar days from the first to the last event, inclusive (0 if empty).
ChronicleSpan chronicle_span(const Chronicle& c);

struct PersonalFoodModel {
    std::string user_id;
    std::vector<ModelRule> rules;
    std::optional<PreferenceProfile> preference;
    std::vector<StaticConstraint> constraints;
    TimestampMs built_at = 0;
    ChronicleSpan span;
};

/// Runs verification for every rule; rules that cannot be verified on this
/// chronicle are kept as prior-only. Throws InsufficientData.
std::vector<ModelRule> personalize(const std::vector<KnowledgeRule>& rulebase, const Chronicle& c,
                                   const EngineConfig& cfg);

/// personalize + preference profile + constraints. built_at is the start of
/// the last event, so a rebuild on the same chronicle is byte-identical.
PersonalFoodModel build_model(const Chronicle& c, const std::vector<KnowledgeRule>& rulebase,
                              std::vector<StaticConstraint> constraints, const EngineConfig& cfg);

struct PredictionContext {
    TimestampMs at = 0;
    int tz_offset_min = 0;
    std::optional<TimestampMs> next_sleep_ms;
    std::optional<double> fasting_hours;
    std::map<std::string, ConfounderValue> confounders;
};

Json to_json(const PredictionContext& c);
PredictionContext prediction_context_from_json(const Json& j);

struct RuleContribution {
    std::string rule_id;
    std::string context;  // matched group key, "prior" for prior-only rules
    double delta = 0.0;
    double validity = 0.0;
    bool prior_only = false;
};

struct OutcomePrediction {
    std::string metric;
    double delta = 0.0;         // exact sum of contributions
    double capped_delta = 0.0;  // clamped to the metric cap
    double confidence = 0.0;    // mean validity of contributions
    std::vector<RuleContribution> contributions;  // by rule id
};

/// Signature key of a context for a verified rule, or nullopt if a
/// confounder value is missing.
std::optional<std::string> context_key(const VerifiedRule& rule, const PredictionContext& ctx);

/// Adds the history confounders of the model's verified rules that the context
/// does not carry, measured on the chronicle at the expected outcome time.
PredictionContext fill_confounders(const PredictionContext& ctx, const PersonalFoodModel& m, const Chronicle& c);

/// True if the rule's (single-step) input pattern matches the event and the
/// temporal condition allows the context's next sleep, when given.
bool rule_applies(const ModelRule& rule, const FoodEvent& e, const PredictionContext& ctx);

/// One prediction per metric with at least one contribution, sorted by metric.
std::vector<OutcomePrediction> predict_outcome(const PersonalFoodModel& model, const FoodEvent& e,
                                               const PredictionContext& ctx, const EngineConfig& cfg);

/// Throws NoProfile.
double predict_liking(const PersonalFoodModel& model, const TasteRegion& dish);

Json to_json(const RuleContribution& c);
Json to_json(const OutcomePrediction& p);
Json to_json(const ModelRule& r);
ModelRule model_rule_from_json(const Json& j);
Json to_json(const PersonalFoodModel& m);
PersonalFoodModel model_from_json(const Json& j);
/// Compact view: rule ids, statuses, overall effects.
Json model_summary(const PersonalFoodModel& m);

}  // namespace pfm
