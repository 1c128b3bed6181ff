#include "pfm/verify.hpp"

#include "pfm/error.hpp"
#include "pfm/rng.hpp"
#include "pfm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace pfm {

namespace {

constexpr std::string_view kWeekdays[7] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

std::string_view to_string(ConfounderKind k) { return k == ConfounderKind::Numeric ? "numeric" : "categorical"; }

bool valid_aggregate(const std::string& a) {
    return a == "sum" || a == "mean" || a == "count" || a == "max" || a == "last";
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = stats::mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

Json signature_json(const std::vector<std::pair<std::string, std::string>>& sig) {
    Json j = Json::object();
    for (const auto& [k, v] : sig) j[k] = v;
    return j;
}

}  // namespace

bool known_outcome_metric(const std::string& stream, const std::string& metric) {
    if (stream == "food") return false;
    if (!valid_stream_label(stream)) return false;
    if (metric == "duration_min" || metric == "bedtime_minutes") return true;
    if (stream.starts_with("custom:")) return !metric.empty();
    return declared_unit(metric).has_value();
}

std::vector<std::string> validate(const Hypothesis& h) {
    std::vector<std::string> out = validate(h.input);
    if (h.name.empty()) out.emplace_back("hypothesis needs a name");
    if (!known_outcome_metric(h.outcome.stream, h.outcome.metric)) {
        out.push_back("unknown outcome metric '" + h.outcome.stream + "." + h.outcome.metric + "'");
    }
    if (!(h.within_minutes > 0.0)) out.emplace_back("temporal condition must be > 0 minutes");
    std::set<std::string> names;
    for (const auto& c : h.confounders) {
        const std::string where = "confounder '" + c.name + "'";
        if (c.name.empty()) out.emplace_back("confounder needs a name");
        if (!names.insert(c.name).second) out.push_back(where + " declared twice");
        if (!c.builtin.empty()) {
            if (c.builtin != "daytype" && c.builtin != "weekday") out.push_back(where + ": unknown builtin '" + c.builtin + "'");
            if (c.kind != ConfounderKind::Categorical) out.push_back(where + ": builtins are categorical");
            continue;
        }
        if (c.stream != "food" && !valid_stream_label(c.stream)) out.push_back(where + ": unknown stream '" + c.stream + "'");
        if (!valid_aggregate(c.aggregate)) out.push_back(where + ": unknown aggregate '" + c.aggregate + "'");
        if (c.attr.empty() && c.aggregate != "count") out.push_back(where + ": attribute required unless counting");
        if (!(c.lookback_minutes > 0.0)) out.push_back(where + ": lookback must be > 0");
        if (c.kind == ConfounderKind::Numeric && c.bins < 1) out.push_back(where + ": bins must be >= 1");
    }
    return out;
}

Json to_json(const ConfounderSelector& c) {
    Json j{{"kind", std::string(to_string(c.kind))}, {"name", c.name}};
    if (!c.builtin.empty()) {
        j["builtin"] = c.builtin;
        return j;
    }
    j["aggregate"] = c.aggregate;
    j["attr"] = c.attr;
    j["lookback_minutes"] = num(c.lookback_minutes);
    j["stream"] = c.stream;
    if (c.kind == ConfounderKind::Numeric) j["bins"] = c.bins;
    if (c.default_value) j["default"] = num(*c.default_value);
    return j;
}

ConfounderSelector confounder_from_json(const Json& j) {
    ConfounderSelector c;
    c.name = j.at("name").get<std::string>();
    c.builtin = j.value("builtin", std::string());
    const std::string kind = j.value("kind", c.builtin.empty() ? "numeric" : "categorical");
    if (kind == "numeric") c.kind = ConfounderKind::Numeric;
    else if (kind == "categorical") c.kind = ConfounderKind::Categorical;
    else fail(ErrorCode::SchemaError, "confounder '" + c.name + "': unknown kind '" + kind + "'");
    if (c.builtin.empty()) {
        c.stream = j.at("stream").get<std::string>();
        c.attr = j.value("attr", std::string());
        c.aggregate = j.value("aggregate", std::string("sum"));
        c.lookback_minutes = j.value("lookback_minutes", 1440.0);
        c.bins = j.value("bins", 3);
        if (j.contains("default") && !j["default"].is_null()) c.default_value = j["default"].get<double>();
    }
    return c;
}

Json to_json(const Hypothesis& h) {
    Json conf = Json::array();
    for (const auto& c : h.confounders) conf.push_back(to_json(c));
    return Json{{"confounders", conf},
                {"input", to_json(h.input)},
                {"name", h.name},
                {"outcome", Json{{"metric", h.outcome.metric}, {"stream", h.outcome.stream}}},
                {"temporal_condition", Json{{"within_minutes", num(h.within_minutes)}}}};
}

Hypothesis hypothesis_from_json(const Json& j) {
    Hypothesis h;
    try {
        h.name = j.at("name").get<std::string>();
        h.input = event_pattern_from_json(j.at("input"));
        const Json& out = j.at("outcome");
        h.outcome.stream = out.at("stream").get<std::string>();
        h.outcome.metric = out.at("metric").get<std::string>();
        const Json& tc = j.at("temporal_condition");
        if (tc.contains("within")) h.within_minutes = static_cast<double>(parse_duration_minutes(tc["within"].get<std::string>()));
        else h.within_minutes = tc.at("within_minutes").get<double>();
        if (!j.contains("confounders")) {
            fail(ErrorCode::SchemaError, "hypothesis '" + h.name + "': 'confounders' is required (use [] for none)");
        }
        for (const auto& c : j["confounders"]) h.confounders.push_back(confounder_from_json(c));
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("hypothesis: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) fail(ErrorCode::SchemaError, e.what());
        throw;
    }
    if (auto problems = validate(h); !problems.empty()) {
        fail(ErrorCode::SchemaError, "hypothesis '" + h.name + "': " + problems.front());
    }
    return h;
}

ConfounderValue confounder_value(const ConfounderSelector& sel, const Chronicle& c, TimestampMs t, int tz_offset,
                                 const std::string& unit_id) {
    if (sel.builtin == "daytype") return std::string(local_weekday(t, tz_offset) >= 5 ? "weekend" : "weekday");
    if (sel.builtin == "weekday") return std::string(kWeekdays[local_weekday(t, tz_offset)]);

    const auto lookback = static_cast<TimestampMs>(std::llround(sel.lookback_minutes * kMinuteMs));
    StreamFilter filter;
    filter.streams.insert(sel.stream);
    const auto events = c.window(t - lookback, t, filter);
    const auto ctx = EventContext{};
    std::vector<double> values;
    for (const auto& e : events) {
        if (sel.aggregate == "count" && sel.attr.empty()) {
            values.push_back(1.0);
            continue;
        }
        if (auto v = numeric_attribute(e, sel.attr, ctx)) values.push_back(*v);
    }
    std::optional<double> v;
    if (sel.aggregate == "count") v = static_cast<double>(values.size());
    else if (sel.aggregate == "sum") v = std::accumulate(values.begin(), values.end(), 0.0);
    else if (!values.empty()) {
        if (sel.aggregate == "mean") v = stats::mean(values);
        else if (sel.aggregate == "max") v = *std::max_element(values.begin(), values.end());
        else v = values.back();
    }
    if (!v) v = sel.default_value;
    if (!v) fail(ErrorCode::MissingConfounderValue, "confounder '" + sel.name + "' has no value for unit " + unit_id);
    if (sel.kind == ConfounderKind::Categorical) return category_label(*v);
    return *v;
}

std::vector<Unit> build_units(const Hypothesis& h, const Chronicle& c, const std::vector<Occurrence>& occurrences) {
    const auto events = c.events();
    struct OutcomeEvent {
        std::size_t index;
        TimestampMs start;
        double value;
    };
    std::vector<OutcomeEvent> outcomes;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (stream_of(events[i]) != h.outcome.stream) continue;
        if (auto v = numeric_attribute(events[i], h.outcome.metric)) outcomes.push_back({i, start_ms(events[i]), *v});
    }
    const auto within = static_cast<TimestampMs>(std::llround(h.within_minutes * kMinuteMs));

    std::vector<char> linked(outcomes.size(), 0);
    std::vector<std::optional<std::string>> linked_from(outcomes.size());
    for (const auto& occ : occurrences) {
        auto it = std::lower_bound(outcomes.begin(), outcomes.end(), occ.end_ms,
                                   [](const OutcomeEvent& o, TimestampMs t) { return o.start < t; });
        for (; it != outcomes.end() && it->start - occ.end_ms <= within; ++it) {
            const auto k = static_cast<std::size_t>(it - outcomes.begin());
            if (linked[k]) continue;
            linked[k] = 1;
            linked_from[k] = occ.event_ids.front();
            break;
        }
    }

    std::vector<TimestampMs> occ_ends;
    for (const auto& occ : occurrences) occ_ends.push_back(occ.end_ms);
    std::sort(occ_ends.begin(), occ_ends.end());

    std::vector<Unit> units;
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        const auto& o = outcomes[k];
        if (!linked[k]) {
            auto lo = std::lower_bound(occ_ends.begin(), occ_ends.end(), o.start - within);
            if (lo != occ_ends.end() && *lo <= o.start) continue;  // exposed but not linked
        }
        Unit u;
        u.id = event_id(events[o.index]);
        u.treated = linked[k] != 0;
        u.outcome = o.value;
        u.outcome_ms = o.start;
        u.occurrence_start_id = linked_from[k];
        const int tz = tz_offset_min(events[o.index]);
        for (const auto& sel : h.confounders) u.confounders.push_back(confounder_value(sel, c, o.start, tz, u.id));
        units.push_back(std::move(u));
    }
    return units;
}

std::vector<double> equal_frequency_edges(std::vector<double> values, int k) {
    std::vector<double> edges;
    if (values.empty() || k <= 1) return edges;
    std::sort(values.begin(), values.end());
    for (int i = 1; i < k; ++i) {
        edges.push_back(stats::quantile_sorted(values, static_cast<double>(i) / static_cast<double>(k)));
    }
    return edges;
}

std::string bin_label(const std::vector<double>& edges, double v) {
    const auto bin = std::lower_bound(edges.begin(), edges.end(), v) - edges.begin();
    return "bin" + std::to_string(bin);
}

std::string category_label(const ConfounderValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    return num(std::get<double>(v)).dump();
}

ContextMatch contextual_match(const std::vector<Unit>& units, const std::vector<ConfounderSelector>& confounders) {
    ContextMatch out;
    for (std::size_t c = 0; c < confounders.size(); ++c) {
        if (confounders[c].kind != ConfounderKind::Numeric) continue;
        std::vector<double> values;
        for (const auto& u : units) {
            if (c >= u.confounders.size()) fail(ErrorCode::MissingConfounderValue, "unit " + u.id + " lacks confounder '" + confounders[c].name + "'");
            const auto* d = std::get_if<double>(&u.confounders[c]);
            if (!d) fail(ErrorCode::InvalidArgument, "confounder '" + confounders[c].name + "' is numeric but unit " + u.id + " carries a category");
            values.push_back(*d);
        }
        out.bin_edges[confounders[c].name] = equal_frequency_edges(std::move(values), confounders[c].bins);
    }

    std::map<std::string, ContextGroup> groups;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& u = units[i];
        if (u.confounders.size() < confounders.size()) {
            fail(ErrorCode::MissingConfounderValue, "unit " + u.id + " lacks confounder values");
        }
        std::vector<std::pair<std::string, std::string>> sig;
        for (std::size_t c = 0; c < confounders.size(); ++c) {
            const auto& sel = confounders[c];
            std::string label = sel.kind == ConfounderKind::Numeric
                                    ? bin_label(out.bin_edges[sel.name], std::get<double>(u.confounders[c]))
                                    : category_label(u.confounders[c]);
            sig.emplace_back(sel.name, std::move(label));
        }
        std::string key;
        for (const auto& [name, label] : sig) key += (key.empty() ? "" : "|") + name + "=" + label;
        if (key.empty()) key = "all";
        auto& g = groups[key];
        g.key = key;
        g.signature = sig;
        (u.treated ? g.treated : g.control).push_back(i);
    }
    for (auto& [key, g] : groups) {
        g.low_power = g.treated.size() < kMinGroupArm || g.control.size() < kMinGroupArm;
        out.groups.push_back(std::move(g));
    }
    return out;
}

double validity_from_bootstrap(double effect, const std::vector<double>& boot, double min_effect) {
    if (boot.empty() || effect == 0.0) return 0.0;
    std::size_t hits = 0;
    for (double b : boot) {
        if ((b > 0.0) == (effect > 0.0) && b != 0.0 && std::fabs(b) >= min_effect) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(boot.size());
}

namespace {

void check_options(const Chronicle& c, const VerifyOptions& opt) {
    if (c.empty()) fail(ErrorCode::InvalidArgument, "chronicle is empty");
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must be in (0, 1)");
    if (opt.n_permutations < 200) fail(ErrorCode::InvalidArgument, "n_permutations must be >= 200");
    if (opt.n_bootstrap < 1) fail(ErrorCode::InvalidArgument, "n_bootstrap must be >= 1");
    if (!(opt.min_effect >= 0.0)) fail(ErrorCode::InvalidArgument, "min_effect must be >= 0");
}

struct Prepared {
    EventPattern resolved;
    std::vector<Occurrence> occurrences;
    std::vector<Unit> units;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
};

Prepared prepare(const Hypothesis& h, const Chronicle& c, const VerifyOptions& opt) {
    check_options(c, opt);
    if (auto problems = validate(h); !problems.empty()) fail(ErrorCode::InvalidArgument, problems.front());
    Prepared p;
    p.resolved = resolve(h.input, c);
    p.occurrences = find_occurrences(p.resolved, c);
    if (p.occurrences.empty()) fail(ErrorCode::NoOccurrences, "input pattern of '" + h.name + "' never occurs");
    p.units = build_units(h, c, p.occurrences);
    for (const auto& u : p.units) (u.treated ? p.n_treated : p.n_control)++;
    if (p.n_treated == 0) {
        fail(ErrorCode::NoOccurrences, "no occurrence of '" + h.name + "' is followed by " + h.outcome.stream + "." +
                                           h.outcome.metric + " within the temporal condition");
    }
    if (p.n_control == 0) fail(ErrorCode::NoControls, "no control outcomes for '" + h.name + "'");
    return p;
}

}  // namespace

VerifiedRule verify(const Hypothesis& h, const Chronicle& c, const VerifyOptions& opt) {
    Prepared prep = prepare(h, c, opt);
    const auto match = contextual_match(prep.units, h.confounders);

    VerifiedRule rule;
    rule.hypothesis = h;
    rule.resolved_input = prep.resolved;
    rule.bin_edges = match.bin_edges;
    rule.n_occurrences = prep.occurrences.size();
    rule.n_treated = prep.n_treated;
    rule.n_control = prep.n_control;

    std::vector<std::size_t> tested;
    std::vector<double> raw_p;
    for (const auto& g : match.groups) {
        ContextResult r;
        r.key = g.key;
        r.signature = g.signature;
        r.n_treated = g.treated.size();
        r.n_control = g.control.size();
        r.low_power = g.low_power;
        r.estimable = r.n_treated > 0 && r.n_control > 0;
        if (r.estimable) {
            std::vector<double> t;
            std::vector<double> ctl;
            for (auto i : g.treated) t.push_back(prep.units[i].outcome);
            for (auto i : g.control) ctl.push_back(prep.units[i].outcome);
            r.effect = stats::mean(t) - stats::mean(ctl);
            r.std_error = std::sqrt(sample_variance(t) / static_cast<double>(t.size()) +
                                    sample_variance(ctl) / static_cast<double>(ctl.size()));
            const double first = t.front();
            r.degenerate = std::all_of(t.begin(), t.end(), [&](double x) { return x == first; }) &&
                           std::all_of(ctl.begin(), ctl.end(), [&](double x) { return x == first; });
            if (!r.degenerate) {
                const auto seed = derive_seed(opt.seed, h.name + "|" + g.key);
                r.p_value = stats::permutation_test(t, ctl, opt.n_permutations, seed).p_value;
                const auto boot = stats::bootstrap_effects(t, ctl, opt.n_bootstrap, derive_seed(seed, "bootstrap"));
                r.validity = validity_from_bootstrap(r.effect, boot, opt.min_effect);
                tested.push_back(rule.contexts.size());
                raw_p.push_back(r.p_value);
            }
        }
        rule.contexts.push_back(std::move(r));
    }
    const auto adjusted = stats::benjamini_hochberg(raw_p);
    for (std::size_t k = 0; k < tested.size(); ++k) rule.contexts[tested[k]].adjusted_p = adjusted[k];

    double wsum = 0.0;
    double esum = 0.0;
    for (const auto& r : rule.contexts) {
        if (!r.eligible()) continue;
        const double w = static_cast<double>(r.n_treated * r.n_control) / static_cast<double>(r.n_treated + r.n_control);
        wsum += w;
        esum += w * r.effect;
        rule.min_adjusted_p = std::min(rule.min_adjusted_p, r.adjusted_p);
        if (r.adjusted_p < opt.alpha) rule.significant = true;
    }
    if (wsum > 0.0) rule.overall_effect = esum / wsum;
    rule.direction = rule.overall_effect > 0.0 ? "increase" : rule.overall_effect < 0.0 ? "decrease" : "none";
    return rule;
}

NaiveEstimate naive_estimate(const Hypothesis& h, const Chronicle& c, const VerifyOptions& opt) {
    Hypothesis bare = h;
    bare.confounders.clear();
    Prepared prep = prepare(bare, c, opt);
    std::vector<double> t;
    std::vector<double> ctl;
    for (const auto& u : prep.units) (u.treated ? t : ctl).push_back(u.outcome);
    const auto res = stats::permutation_test(t, ctl, opt.n_permutations, derive_seed(opt.seed, h.name + "|naive"));
    return NaiveEstimate{res.observed, res.p_value, t.size(), ctl.size()};
}

Json to_json(const ContextResult& r) {
    return Json{{"adjusted_p", num(r.adjusted_p)},
                {"degenerate", r.degenerate},
                {"effect", num(r.effect)},
                {"estimable", r.estimable},
                {"key", r.key},
                {"low_power", r.low_power},
                {"n_control", r.n_control},
                {"n_treated", r.n_treated},
                {"p_value", num(r.p_value)},
                {"signature", signature_json(r.signature)},
                {"std_error", num(r.std_error)},
                {"validity", num(r.validity)}};
}

ContextResult context_result_from_json(const Json& j) {
    ContextResult r;
    r.key = j.at("key").get<std::string>();
    for (const auto& [k, v] : j.at("signature").items()) r.signature.emplace_back(k, v.get<std::string>());
    r.effect = j.at("effect").get<double>();
    r.p_value = j.at("p_value").get<double>();
    r.adjusted_p = j.at("adjusted_p").get<double>();
    r.n_treated = j.at("n_treated").get<std::size_t>();
    r.n_control = j.at("n_control").get<std::size_t>();
    r.validity = j.at("validity").get<double>();
    r.low_power = j.at("low_power").get<bool>();
    r.degenerate = j.at("degenerate").get<bool>();
    r.estimable = j.at("estimable").get<bool>();
    r.std_error = j.at("std_error").get<double>();
    return r;
}

Json to_json(const VerifiedRule& r) {
    Json contexts = Json::array();
    for (const auto& c : r.contexts) contexts.push_back(to_json(c));
    Json edges = Json::object();
    for (const auto& [name, e] : r.bin_edges) {
        Json arr = Json::array();
        for (double x : e) arr.push_back(num(x));
        edges[name] = arr;
    }
    return Json{{"bin_edges", edges},
                {"contexts", contexts},
                {"direction", r.direction},
                {"hypothesis", to_json(r.hypothesis)},
                {"min_adjusted_p", num(r.min_adjusted_p)},
                {"n_control", r.n_control},
                {"n_occurrences", r.n_occurrences},
                {"n_treated", r.n_treated},
                {"overall_effect", num(r.overall_effect)},
                {"resolved_input", to_json(r.resolved_input)},
                {"significant", r.significant}};
}

VerifiedRule verified_rule_from_json(const Json& j) {
    VerifiedRule r;
    try {
        r.hypothesis = hypothesis_from_json(j.at("hypothesis"));
        r.resolved_input = event_pattern_from_json(j.at("resolved_input"));
        for (const auto& c : j.at("contexts")) r.contexts.push_back(context_result_from_json(c));
        for (const auto& [name, e] : j.at("bin_edges").items()) r.bin_edges[name] = e.get<std::vector<double>>();
        r.n_occurrences = j.at("n_occurrences").get<std::size_t>();
        r.n_treated = j.at("n_treated").get<std::size_t>();
        r.n_control = j.at("n_control").get<std::size_t>();
        r.overall_effect = j.at("overall_effect").get<double>();
        r.direction = j.at("direction").get<std::string>();
        r.significant = j.at("significant").get<bool>();
        r.min_adjusted_p = j.at("min_adjusted_p").get<double>();
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("verified rule: ") + e.what());
    }
    return r;
}

}  // namespace pfm
