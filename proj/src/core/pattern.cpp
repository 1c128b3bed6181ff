#include "pfm/pattern.hpp"

#include "pfm/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace pfm {

namespace {

bool is_string_attr(std::string_view attr) {
    return attr == "dish" || attr == "item" || attr == "place" || attr == "social" || attr == "how" ||
           attr == "stream";
}

bool compare(double lhs, CompareOp op, double rhs) {
    switch (op) {
        case CompareOp::Gt: return lhs > rhs;
        case CompareOp::Ge: return lhs >= rhs;
        case CompareOp::Lt: return lhs < rhs;
        case CompareOp::Le: return lhs <= rhs;
        case CompareOp::Eq: return lhs == rhs;
        case CompareOp::Ne: return lhs != rhs;
        case CompareOp::Contains: return false;
    }
    return false;
}

bool compare_string(const std::string& lhs, CompareOp op, const std::string& rhs) {
    switch (op) {
        case CompareOp::Eq: return lhs == rhs;
        case CompareOp::Ne: return lhs != rhs;
        case CompareOp::Contains: return lhs.find(rhs) != std::string::npos;
        default: return false;
    }
}

bool string_predicate(const Event& e, const Predicate& p, const std::string& raw) {
    const std::string value = normalize_dish_name(raw);
    if (p.attr == "stream") return compare_string(std::string(stream_of(e)), p.op, raw);
    const auto* f = std::get_if<FoodEvent>(&e);
    if (!f) return false;
    if (p.attr == "item") {
        // Any-of over item ids and the dish name; != means none of them.
        std::vector<std::string> names{normalize_dish_name(f->dish)};
        for (const auto& item : f->items) names.push_back(normalize_dish_name(item.item_id));
        const CompareOp positive = p.op == CompareOp::Ne ? CompareOp::Eq : p.op;
        bool any = false;
        for (const auto& n : names) any = any || (!n.empty() && compare_string(n, positive, value));
        return p.op == CompareOp::Ne ? !any : any;
    }
    std::string field;
    if (p.attr == "dish") field = normalize_dish_name(f->dish);
    else if (p.attr == "place") field = normalize_dish_name(f->place);
    else if (p.attr == "social") field = normalize_dish_name(f->social);
    else if (p.attr == "how") field = std::string(to_string(f->how));
    return compare_string(field, p.op, value);
}

bool stream_accepts(const std::string& step_stream, const Event& e) {
    return step_stream == "*" || step_stream == stream_of(e);
}

double stat_value(const StatRef& ref, const std::string& stream, const Chronicle& c,
                  const std::vector<EventContext>& ctx) {
    double sum = 0.0;
    std::size_t n = 0;
    std::set<std::int64_t> days;
    const auto events = c.events();
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!stream_accepts(stream, events[i])) continue;
        auto v = numeric_attribute(events[i], ref.attr, ctx[i]);
        if (!v) continue;
        sum += *v;
        ++n;
        days.insert(local_day(start_ms(events[i]), tz_offset_min(events[i])));
    }
    if (n == 0) fail(ErrorCode::InvalidArgument, "statistic " + ref.stat + "(" + ref.attr + ") has no data");
    if (ref.stat == "daily_mean") return ref.factor * sum / static_cast<double>(days.size());
    if (ref.stat == "mean") return ref.factor * sum / static_cast<double>(n);
    fail(ErrorCode::InvalidArgument, "unknown statistic '" + ref.stat + "'");
}

}  // namespace

std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Eq: return "==";
        case CompareOp::Ne: return "!=";
        case CompareOp::Contains: return "contains";
    }
    return "==";
}

CompareOp compare_op_from_string(std::string_view s) {
    if (s == ">") return CompareOp::Gt;
    if (s == ">=") return CompareOp::Ge;
    if (s == "<") return CompareOp::Lt;
    if (s == "<=") return CompareOp::Le;
    if (s == "==") return CompareOp::Eq;
    if (s == "!=") return CompareOp::Ne;
    if (s == "contains") return CompareOp::Contains;
    fail(ErrorCode::SchemaError, "unknown comparison '" + std::string(s) + "'");
}

std::vector<std::string> validate(const EventPattern& p) {
    std::vector<std::string> out;
    if (p.steps.empty()) out.emplace_back("pattern needs at least one step");
    for (std::size_t s = 0; s < p.steps.size(); ++s) {
        const auto& step = p.steps[s];
        const std::string where = "step " + std::to_string(s);
        if (step.stream != "*" && step.stream != "food" && !valid_stream_label(step.stream)) {
            out.push_back(where + ": unknown stream '" + step.stream + "'");
        }
        if (s > 0) {
            if (!(step.max_gap_minutes >= 0.0)) out.push_back(where + ": max gap must be >= 0");
            if (!(step.min_gap_minutes >= 0.0) || step.min_gap_minutes > step.max_gap_minutes) {
                out.push_back(where + ": min gap must be in [0, max gap]");
            }
        }
        for (const auto& pred : step.where) {
            const bool str_attr = is_string_attr(pred.attr);
            const bool str_value = std::holds_alternative<std::string>(pred.value);
            if (str_attr != str_value) out.push_back(where + ": attribute '" + pred.attr + "' compared to wrong type");
            if (str_value && pred.op != CompareOp::Eq && pred.op != CompareOp::Ne && pred.op != CompareOp::Contains) {
                out.push_back(where + ": string attribute '" + pred.attr + "' supports ==, != and contains");
            }
            if (!str_value && pred.op == CompareOp::Contains) {
                out.push_back(where + ": 'contains' needs a string attribute");
            }
            if (const auto* ref = std::get_if<StatRef>(&pred.value)) {
                if (ref->stat != "daily_mean" && ref->stat != "mean") {
                    out.push_back(where + ": unknown statistic '" + ref->stat + "'");
                }
            }
        }
    }
    return out;
}

bool is_resolved(const EventPattern& p) {
    for (const auto& step : p.steps) {
        for (const auto& pred : step.where) {
            if (std::holds_alternative<StatRef>(pred.value)) return false;
        }
    }
    return true;
}

EventPattern resolve(const EventPattern& p, const Chronicle& c) {
    if (is_resolved(p)) return p;
    const auto ctx = event_contexts(c);
    EventPattern out = p;
    for (auto& step : out.steps) {
        for (auto& pred : step.where) {
            if (const auto* ref = std::get_if<StatRef>(&pred.value)) pred.value = stat_value(*ref, step.stream, c, ctx);
        }
    }
    return out;
}

std::optional<double> numeric_attribute(const Event& e, std::string_view attr, const EventContext& ctx) {
    const TimestampMs t = start_ms(e);
    const int tz = tz_offset_min(e);
    if (attr == "local_hour") return local_hour(t, tz);
    if (attr == "weekday") return static_cast<double>(local_weekday(t, tz));
    if (const auto* f = std::get_if<FoodEvent>(&e)) {
        if (attr == "fasting_hours") return ctx.fasting_hours;
        if (attr == "rating") return f->rating ? std::optional<double>(*f->rating) : std::nullopt;
        if (attr == "companions") return static_cast<double>(f->companions);
        if (attr == "quantity_g") {
            if (f->quantity_g) return *f->quantity_g;
            if (f->items.empty()) return std::nullopt;
            double s = 0.0;
            for (const auto& item : f->items) s += item.quantity_g;
            return s;
        }
        if (attr.starts_with("taste.")) {
            if (!f->taste) return std::nullopt;
            auto ch = channel_index(attr.substr(6));
            if (!ch) return std::nullopt;
            return f->taste->centroid[*ch];
        }
        if (!f->nutrition) return std::nullopt;
        return f->nutrition->field(attr);
    }
    const auto& life = std::get<LifeEvent>(e);
    if (auto it = life.attributes.find(std::string(attr)); it != life.attributes.end()) return it->second.value;
    if (attr == "duration_min") return static_cast<double>(life.end_ms - life.start_ms) / static_cast<double>(kMinuteMs);
    if (attr == "bedtime_minutes") return minutes_since_local_noon(t, tz);
    return std::nullopt;
}

bool step_matches(const PatternStep& step, const Event& e, const EventContext& ctx) {
    if (!stream_accepts(step.stream, e)) return false;
    for (const auto& pred : step.where) {
        if (const auto* s = std::get_if<std::string>(&pred.value)) {
            if (!string_predicate(e, pred, *s)) return false;
            continue;
        }
        const auto* threshold = std::get_if<double>(&pred.value);
        if (!threshold) fail(ErrorCode::InvalidArgument, "pattern has unresolved statistics");
        auto v = numeric_attribute(e, pred.attr, ctx);
        if (!v || !compare(*v, pred.op, *threshold)) return false;
    }
    return true;
}

std::vector<EventContext> event_contexts(const Chronicle& c) {
    std::vector<EventContext> out(c.size());
    std::optional<TimestampMs> prev_food;
    const auto events = c.events();
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!is_food(events[i])) continue;
        if (prev_food) out[i].fasting_hours = static_cast<double>(start_ms(events[i]) - *prev_food) / kHourMs;
        prev_food = start_ms(events[i]);
    }
    return out;
}

std::vector<Occurrence> find_occurrences(const EventPattern& pattern, const Chronicle& c) {
    if (auto problems = validate(pattern); !problems.empty()) fail(ErrorCode::InvalidArgument, problems.front());
    const auto events = c.events();
    const std::size_t n = events.size();
    const std::size_t k = pattern.steps.size();
    const auto ctx = event_contexts(c);

    std::vector<std::vector<char>> match(k, std::vector<char>(n, 0));
    for (std::size_t s = 0; s < k; ++s) {
        for (std::size_t i = 0; i < n; ++i) match[s][i] = step_matches(pattern.steps[s], events[i], ctx[i]) ? 1 : 0;
    }
    // dead[s][j]: no completion of steps s+1.. exists after event j placed at step s.
    std::vector<std::vector<char>> dead(k, std::vector<char>(n, 0));
    std::vector<std::size_t> tuple(k);

    auto extend = [&](auto&& self, std::size_t s, std::size_t prev) -> bool {
        if (s == k) return true;
        if (dead[s - 1][prev]) return false;
        const auto& step = pattern.steps[s];
        const double t0 = static_cast<double>(start_ms(events[prev]));
        for (std::size_t j = prev + 1; j < n; ++j) {
            const double gap = (static_cast<double>(start_ms(events[j])) - t0) / static_cast<double>(kMinuteMs);
            if (gap > step.max_gap_minutes) break;
            if (gap < step.min_gap_minutes || !match[s][j]) continue;
            tuple[s] = j;
            if (self(self, s + 1, j)) return true;
        }
        dead[s - 1][prev] = 1;
        return false;
    };

    std::vector<Occurrence> out;
    std::size_t i = 0;
    while (i < n) {
        if (match[0][i]) {
            tuple[0] = i;
            if (extend(extend, 1, i)) {
                Occurrence o;
                o.indices = tuple;
                for (auto idx : tuple) o.event_ids.push_back(event_id(events[idx]));
                o.start_ms = start_ms(events[tuple.front()]);
                o.end_ms = end_ms(events[tuple.back()]);
                out.push_back(std::move(o));
                i = tuple.back() + 1;
                continue;
            }
        }
        ++i;
    }
    return out;
}

Json to_json(const EventPattern& p) {
    Json steps = Json::array();
    for (std::size_t s = 0; s < p.steps.size(); ++s) {
        const auto& step = p.steps[s];
        Json where = Json::array();
        for (const auto& pred : step.where) {
            Json v;
            if (const auto* d = std::get_if<double>(&pred.value)) v = num(*d);
            else if (const auto* str = std::get_if<std::string>(&pred.value)) v = *str;
            else {
                const auto& ref = std::get<StatRef>(pred.value);
                v = Json{{"attr", ref.attr}, {"factor", num(ref.factor)}, {"stat", ref.stat}};
            }
            where.push_back(Json{{"attr", pred.attr}, {"op", std::string(to_string(pred.op))}, {"value", v}});
        }
        Json js{{"stream", step.stream}, {"where", where}};
        if (s > 0) {
            js["max_gap_minutes"] = num(step.max_gap_minutes);
            js["min_gap_minutes"] = num(step.min_gap_minutes);
        }
        steps.push_back(js);
    }
    return Json{{"steps", steps}};
}

EventPattern event_pattern_from_json(const Json& j) {
    EventPattern p;
    try {
        for (const auto& js : j.at("steps")) {
            PatternStep step;
            step.stream = js.at("stream").get<std::string>();
            step.min_gap_minutes = js.value("min_gap_minutes", 0.0);
            step.max_gap_minutes = js.value("max_gap_minutes", 0.0);
            if (js.contains("where")) {
                for (const auto& jp : js["where"]) {
                    Predicate pred;
                    pred.attr = jp.at("attr").get<std::string>();
                    pred.op = compare_op_from_string(jp.at("op").get<std::string>());
                    const Json& v = jp.at("value");
                    if (v.is_number()) pred.value = v.get<double>();
                    else if (v.is_string()) pred.value = v.get<std::string>();
                    else if (v.is_object()) pred.value = StatRef{v.at("stat").get<std::string>(), v.at("attr").get<std::string>(), v.value("factor", 1.0)};
                    else fail(ErrorCode::SchemaError, "predicate value must be a number, string or statistic");
                    step.where.push_back(std::move(pred));
                }
            }
            p.steps.push_back(std::move(step));
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("pattern: ") + e.what());
    }
    if (auto problems = validate(p); !problems.empty()) fail(ErrorCode::SchemaError, "pattern: " + problems.front());
    return p;
}

Json to_json(const Occurrence& o) {
    return Json{{"end_ms", o.end_ms}, {"event_ids", o.event_ids}, {"start_ms", o.start_ms}};
}

}  // namespace pfm
