#include "pfm/model.hpp"

#include "pfm/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pfm {

namespace {

constexpr std::string_view kWeekdays[7] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

Direction direction_from_string(const std::string& s, const std::string& rule) {
    if (s == "increase") return Direction::Increase;
    if (s == "decrease") return Direction::Decrease;
    fail(ErrorCode::SchemaError, "rule '" + rule + "': prior_direction must be increase or decrease");
}

Strength strength_from_string(const std::string& s, const std::string& rule) {
    if (s == "weak") return Strength::Weak;
    if (s == "moderate") return Strength::Moderate;
    if (s == "strong") return Strength::Strong;
    fail(ErrorCode::SchemaError, "rule '" + rule + "': prior_strength must be weak, moderate or strong");
}

std::string_view to_string(RuleStatus s) { return s == RuleStatus::Verified ? "verified" : "prior_only"; }

std::string_view to_string(Severity s) { return s == Severity::Hard ? "hard" : "soft"; }

Json substitute(const Json& node, const Json& params, const std::string& rule) {
    if (node.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : node.items()) out[k] = substitute(v, params, rule);
        return out;
    }
    if (node.is_array()) {
        Json out = Json::array();
        for (const auto& v : node) out.push_back(substitute(v, params, rule));
        return out;
    }
    if (!node.is_string()) return node;
    const auto& s = node.get_ref<const std::string&>();
    auto lookup = [&](const std::string& name) -> const Json& {
        if (!params.contains(name)) fail(ErrorCode::SchemaError, "rule '" + rule + "': no value for parameter '" + name + "'");
        return params[name];
    };
    if (s.size() > 3 && s.starts_with("${") && s.ends_with("}") && s.find("${", 2) == std::string::npos) {
        return lookup(s.substr(2, s.size() - 3));
    }
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = s.find("${", pos);
        if (open == std::string::npos) break;
        const auto close = s.find('}', open);
        if (close == std::string::npos) fail(ErrorCode::SchemaError, "rule '" + rule + "': unterminated parameter");
        out += s.substr(pos, open - pos);
        const Json& v = lookup(s.substr(open + 2, close - open - 2));
        out += v.is_string() ? v.get<std::string>() : v.dump();
        pos = close + 1;
    }
    return out + s.substr(pos);
}

// Confounders are measured at the outcome, so calendar builtins use the
// expected sleep time when the context has one.
TimestampMs outcome_time(const PredictionContext& ctx) { return ctx.next_sleep_ms.value_or(ctx.at); }

std::optional<ConfounderValue> builtin_value(const ConfounderSelector& sel, const PredictionContext& ctx) {
    const TimestampMs t = outcome_time(ctx);
    if (sel.builtin == "daytype") return std::string(local_weekday(t, ctx.tz_offset_min) >= 5 ? "weekend" : "weekday");
    if (sel.builtin == "weekday") return std::string(kWeekdays[local_weekday(t, ctx.tz_offset_min)]);
    return std::nullopt;
}

Json confounder_value_json(const ConfounderValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return num(*d);
    return std::get<std::string>(v);
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::Increase ? "increase" : "decrease"; }

std::string_view to_string(Strength s) {
    switch (s) {
        case Strength::Weak: return "weak";
        case Strength::Moderate: return "moderate";
        case Strength::Strong: return "strong";
    }
    return "weak";
}

Hypothesis instantiate(const KnowledgeRule& rule, const Json& overrides) {
    Json params = rule.params;
    for (const auto& [k, v] : overrides.items()) params[k] = v;
    Json filled = substitute(rule.hypothesis_template, params, rule.rule_id);
    filled["name"] = rule.rule_id;
    try {
        return hypothesis_from_json(filled);
    } catch (const Error& e) {
        fail(ErrorCode::SchemaError, "rule '" + rule.rule_id + "': " + e.what());
    }
}

Json to_json(const KnowledgeRule& r) {
    return Json{{"citation", r.citation},
                {"description", r.description},
                {"hypothesis", r.hypothesis_template},
                {"params", r.params},
                {"prior_direction", std::string(to_string(r.prior_direction))},
                {"prior_strength", std::string(to_string(r.prior_strength))},
                {"rule_id", r.rule_id}};
}

KnowledgeRule knowledge_rule_from_json(const Json& j) {
    KnowledgeRule r;
    try {
        r.rule_id = j.at("rule_id").get<std::string>();
        r.description = j.value("description", std::string());
        r.hypothesis_template = j.at("hypothesis");
        r.params = j.value("params", Json::object());
        r.prior_direction = direction_from_string(j.at("prior_direction").get<std::string>(), r.rule_id);
        r.prior_strength = strength_from_string(j.value("prior_strength", std::string("weak")), r.rule_id);
        r.citation = j.value("citation", std::string());
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, "rule '" + r.rule_id + "': " + e.what());
    }
    if (r.rule_id.empty()) fail(ErrorCode::SchemaError, "rule without rule_id");
    return r;
}

std::vector<KnowledgeRule> seed_rulebase(const Json& j) {
    if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
        fail(ErrorCode::SchemaError, "rulebase must be an object with a 'rules' array");
    }
    std::vector<KnowledgeRule> out;
    for (const auto& jr : j["rules"]) {
        auto rule = knowledge_rule_from_json(jr);
        for (const auto& existing : out) {
            if (existing.rule_id == rule.rule_id) fail(ErrorCode::SchemaError, "rule '" + rule.rule_id + "' declared twice");
        }
        instantiate(rule);
        out.push_back(std::move(rule));
    }
    return out;
}

std::vector<KnowledgeRule> load_rulebase(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read rulebase " + path);
    try {
        return seed_rulebase(Json::parse(in));
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::SchemaError, "rulebase " + path + ": " + e.what());
    }
}

Json to_json(const StaticConstraint& c) {
    return Json{{"item_id", c.item_id}, {"reason", c.reason}, {"severity", std::string(to_string(c.severity))}};
}

StaticConstraint static_constraint_from_json(const Json& j) {
    StaticConstraint c;
    try {
        c.item_id = normalize_dish_name(j.at("item_id").get<std::string>());
        const std::string sev = j.value("severity", std::string("hard"));
        if (sev == "hard") c.severity = Severity::Hard;
        else if (sev == "soft") c.severity = Severity::Soft;
        else fail(ErrorCode::SchemaError, "constraint severity must be hard or soft");
        c.reason = j.value("reason", std::string());
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("constraint: ") + e.what());
    }
    if (c.item_id.empty()) fail(ErrorCode::SchemaError, "constraint needs an item_id");
    return c;
}

ChronicleSpan chronicle_span(const Chronicle& c) {
    ChronicleSpan s;
    s.events = c.size();
    if (c.empty()) return s;
    const auto events = c.events();
    s.from_ms = start_ms(events.front());
    for (const auto& e : events) s.to_ms = std::max(s.to_ms, end_ms(e));
    const auto& first = events.front();
    const auto& last = events.back();
    s.days = local_day(start_ms(last), tz_offset_min(last)) - local_day(start_ms(first), tz_offset_min(first)) + 1;
    return s;
}

std::vector<ModelRule> personalize(const std::vector<KnowledgeRule>& rulebase, const Chronicle& c,
                                   const EngineConfig& cfg) {
    const auto span = chronicle_span(c);
    if (span.days < cfg.min_days) {
        fail(ErrorCode::InsufficientData, "chronicle spans " + std::to_string(span.days) + " days, " +
                                              std::to_string(cfg.min_days) + " required");
    }
    const auto opt = cfg.verify_options();
    std::vector<ModelRule> out;
    for (const auto& k : rulebase) {
        ModelRule r;
        r.knowledge = k;
        auto it = cfg.rule_params.find(k.rule_id);
        r.hypothesis = instantiate(k, it == cfg.rule_params.end() ? Json::object() : it->second);
        try {
            r.resolved_input = resolve(r.hypothesis.input, c);
        } catch (const Error& e) {
            r.reason = std::string(to_string(e.code())) + ": " + e.what();
        }
        if (r.resolved_input) {
            try {
                r.verified = verify(r.hypothesis, c, opt);
                r.status = RuleStatus::Verified;
            } catch (const Error& e) {
                const auto code = e.code();
                if (code != ErrorCode::NoOccurrences && code != ErrorCode::NoControls &&
                    code != ErrorCode::MissingConfounderValue) {
                    throw;
                }
                r.reason = std::string(to_string(code)) + ": " + e.what();
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

PersonalFoodModel build_model(const Chronicle& c, const std::vector<KnowledgeRule>& rulebase,
                              std::vector<StaticConstraint> constraints, const EngineConfig& cfg) {
    PersonalFoodModel m;
    m.user_id = c.user_id();
    m.rules = personalize(rulebase, c, cfg);
    try {
        m.preference = preference_profile(c, cfg.rating_threshold, cfg.clusters);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoRatedEvents) throw;
    }
    std::sort(constraints.begin(), constraints.end(),
              [](const StaticConstraint& a, const StaticConstraint& b) { return a.item_id < b.item_id; });
    m.constraints = std::move(constraints);
    m.span = chronicle_span(c);
    m.built_at = c.empty() ? 0 : start_ms(c.events().back());
    return m;
}

Json to_json(const PredictionContext& c) {
    Json conf = Json::object();
    for (const auto& [k, v] : c.confounders) conf[k] = confounder_value_json(v);
    Json j{{"at_ms", c.at}, {"confounders", conf}, {"tz_offset_min", c.tz_offset_min}};
    if (c.next_sleep_ms) j["next_sleep_ms"] = *c.next_sleep_ms;
    if (c.fasting_hours) j["fasting_hours"] = num(*c.fasting_hours);
    return j;
}

PredictionContext prediction_context_from_json(const Json& j) {
    PredictionContext c;
    try {
        c.at = j.at("at_ms").get<TimestampMs>();
        c.tz_offset_min = j.value("tz_offset_min", 0);
        if (j.contains("next_sleep_ms") && !j["next_sleep_ms"].is_null()) c.next_sleep_ms = j["next_sleep_ms"].get<TimestampMs>();
        if (j.contains("fasting_hours") && !j["fasting_hours"].is_null()) c.fasting_hours = j["fasting_hours"].get<double>();
        if (j.contains("confounders")) {
            for (const auto& [k, v] : j["confounders"].items()) {
                if (v.is_number()) c.confounders[k] = v.get<double>();
                else if (v.is_string()) c.confounders[k] = v.get<std::string>();
                else fail(ErrorCode::SchemaError, "confounder '" + k + "' must be a number or string");
            }
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("context: ") + e.what());
    }
    return c;
}

PredictionContext fill_confounders(const PredictionContext& ctx, const PersonalFoodModel& m, const Chronicle& c) {
    PredictionContext out = ctx;
    for (const auto& rule : m.rules) {
        if (!rule.verified) continue;
        for (const auto& sel : rule.verified->hypothesis.confounders) {
            if (!sel.builtin.empty() || out.confounders.count(sel.name)) continue;
            try {
                out.confounders[sel.name] = confounder_value(sel, c, outcome_time(ctx), ctx.tz_offset_min, "prediction");
            } catch (const Error& e) {
                if (e.code() != ErrorCode::MissingConfounderValue) throw;
            }
        }
    }
    return out;
}

std::optional<std::string> context_key(const VerifiedRule& rule, const PredictionContext& ctx) {
    std::string key;
    for (const auto& sel : rule.hypothesis.confounders) {
        std::optional<ConfounderValue> v;
        if (auto it = ctx.confounders.find(sel.name); it != ctx.confounders.end()) v = it->second;
        else v = builtin_value(sel, ctx);
        if (!v) return std::nullopt;
        std::string label;
        if (sel.kind == ConfounderKind::Numeric && std::holds_alternative<double>(*v)) {
            auto edges = rule.bin_edges.find(sel.name);
            label = bin_label(edges == rule.bin_edges.end() ? std::vector<double>{} : edges->second, std::get<double>(*v));
        } else {
            label = category_label(*v);
        }
        key += (key.empty() ? "" : "|") + sel.name + "=" + label;
    }
    return key.empty() ? std::string("all") : key;
}

bool rule_applies(const ModelRule& rule, const FoodEvent& e, const PredictionContext& ctx) {
    if (!rule.resolved_input || rule.resolved_input->steps.size() != 1) return false;
    const auto& step = rule.resolved_input->steps.front();
    EventContext ectx;
    ectx.fasting_hours = ctx.fasting_hours;
    if (!step_matches(step, Event{e}, ectx)) return false;
    if (ctx.next_sleep_ms && rule.hypothesis.outcome.stream == "sleep") {
        const double gap_min = static_cast<double>(*ctx.next_sleep_ms - e.start_ms) / static_cast<double>(kMinuteMs);
        if (gap_min < 0.0 || gap_min > rule.hypothesis.within_minutes) return false;
    }
    return true;
}

std::vector<OutcomePrediction> predict_outcome(const PersonalFoodModel& model, const FoodEvent& e,
                                               const PredictionContext& ctx, const EngineConfig& cfg) {
    std::map<std::string, OutcomePrediction> by_metric;
    for (const auto& rule : model.rules) {
        if (!rule_applies(rule, e, ctx)) continue;
        RuleContribution c;
        c.rule_id = rule.knowledge.rule_id;
        if (rule.status == RuleStatus::Verified) {
            const auto key = context_key(*rule.verified, ctx);
            if (!key) continue;
            const auto& contexts = rule.verified->contexts;
            auto it = std::find_if(contexts.begin(), contexts.end(), [&](const ContextResult& r) { return r.key == *key; });
            if (it == contexts.end() || !it->eligible()) continue;
            c.context = *key;
            c.validity = it->validity;
            c.delta = it->validity * it->effect;
        } else {
            const double sign = rule.knowledge.prior_direction == Direction::Increase ? 1.0 : -1.0;
            c.context = "prior";
            c.prior_only = true;
            c.delta = sign * cfg.prior_fraction * cfg.min_effect;
        }
        auto& p = by_metric[rule.hypothesis.outcome.metric];
        p.metric = rule.hypothesis.outcome.metric;
        p.contributions.push_back(std::move(c));
    }
    std::vector<OutcomePrediction> out;
    for (auto& [metric, p] : by_metric) {
        std::sort(p.contributions.begin(), p.contributions.end(),
                  [](const RuleContribution& a, const RuleContribution& b) { return a.rule_id < b.rule_id; });
        double validity = 0.0;
        for (const auto& c : p.contributions) {
            p.delta += c.delta;
            validity += c.validity;
        }
        p.confidence = validity / static_cast<double>(p.contributions.size());
        const double cap = cfg.cap_for(metric);
        p.capped_delta = std::clamp(p.delta, -cap, cap);
        out.push_back(std::move(p));
    }
    return out;
}

double predict_liking(const PersonalFoodModel& model, const TasteRegion& dish) {
    if (!model.preference) fail(ErrorCode::NoProfile, "model of " + model.user_id + " has no preference profile");
    return preference_score(*model.preference, dish);
}

Json to_json(const RuleContribution& c) {
    return Json{{"context", c.context},
                {"delta", num(c.delta)},
                {"prior_only", c.prior_only},
                {"rule_id", c.rule_id},
                {"validity", num(c.validity)}};
}

Json to_json(const OutcomePrediction& p) {
    Json contrib = Json::array();
    for (const auto& c : p.contributions) contrib.push_back(to_json(c));
    return Json{{"capped_delta", num(p.capped_delta)},
                {"confidence", num(p.confidence)},
                {"contributions", contrib},
                {"delta", num(p.delta)},
                {"metric", p.metric}};
}

Json to_json(const ModelRule& r) {
    Json j{{"hypothesis", to_json(r.hypothesis)},
           {"knowledge", to_json(r.knowledge)},
           {"reason", r.reason},
           {"status", std::string(to_string(r.status))}};
    if (r.verified) j["verified"] = to_json(*r.verified);
    if (r.resolved_input) j["resolved_input"] = to_json(*r.resolved_input);
    return j;
}

ModelRule model_rule_from_json(const Json& j) {
    ModelRule r;
    r.knowledge = knowledge_rule_from_json(j.at("knowledge"));
    r.hypothesis = hypothesis_from_json(j.at("hypothesis"));
    const std::string status = j.at("status").get<std::string>();
    if (status == "verified") r.status = RuleStatus::Verified;
    else if (status == "prior_only") r.status = RuleStatus::PriorOnly;
    else fail(ErrorCode::SchemaError, "unknown rule status '" + status + "'");
    r.reason = j.value("reason", std::string());
    if (j.contains("verified")) r.verified = verified_rule_from_json(j["verified"]);
    if (j.contains("resolved_input")) r.resolved_input = event_pattern_from_json(j["resolved_input"]);
    if (r.status == RuleStatus::Verified && !r.verified) fail(ErrorCode::SchemaError, "verified rule without results");
    return r;
}

Json to_json(const PersonalFoodModel& m) {
    Json rules = Json::array();
    for (const auto& r : m.rules) rules.push_back(to_json(r));
    Json constraints = Json::array();
    for (const auto& c : m.constraints) constraints.push_back(to_json(c));
    Json j{{"built_at", m.built_at},
           {"constraints", constraints},
           {"rules", rules},
           {"span", Json{{"days", m.span.days}, {"events", m.span.events}, {"from_ms", m.span.from_ms}, {"to_ms", m.span.to_ms}}},
           {"user_id", m.user_id}};
    j["preference"] = m.preference ? to_json(*m.preference) : Json(nullptr);
    return j;
}

PersonalFoodModel model_from_json(const Json& j) {
    PersonalFoodModel m;
    try {
        m.user_id = j.at("user_id").get<std::string>();
        for (const auto& r : j.at("rules")) m.rules.push_back(model_rule_from_json(r));
        for (const auto& c : j.at("constraints")) m.constraints.push_back(static_constraint_from_json(c));
        if (!j.at("preference").is_null()) m.preference = preference_profile_from_json(j["preference"]);
        m.built_at = j.at("built_at").get<TimestampMs>();
        const Json& s = j.at("span");
        m.span = ChronicleSpan{s.at("from_ms").get<TimestampMs>(), s.at("to_ms").get<TimestampMs>(),
                               s.at("days").get<std::int64_t>(), s.at("events").get<std::size_t>()};
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("model: ") + e.what());
    }
    return m;
}

Json model_summary(const PersonalFoodModel& m) {
    Json rules = Json::array();
    for (const auto& r : m.rules) {
        Json jr{{"rule_id", r.knowledge.rule_id},
                {"status", std::string(to_string(r.status))},
                {"prior_direction", std::string(to_string(r.knowledge.prior_direction))}};
        if (r.verified) {
            jr["direction"] = r.verified->direction;
            jr["overall_effect"] = num(r.verified->overall_effect);
            jr["significant"] = r.verified->significant;
        } else {
            jr["reason"] = r.reason;
        }
        rules.push_back(jr);
    }
    return Json{{"built_at", m.built_at},
                {"n_constraints", m.constraints.size()},
                {"preference_regions", m.preference ? m.preference->regions.size() : 0},
                {"rules", rules},
                {"span_days", m.span.days},
                {"user_id", m.user_id}};
}

}  // namespace pfm
