#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pfm {

enum class CompareOp { Gt, Ge, Lt, Le, Eq, Ne, Contains };

std::string_view to_string(CompareOp op);
CompareOp compare_op_from_string(std::string_view s);

// Chronicle-level statistic used as a threshold, e.g. 0.4 x daily mean kcal.
struct StatRef {
    std::string stat;  // daily_mean | mean
    std::string attr;
    double factor = 1.0;

    bool operator==(const StatRef&) const = default;
};

struct Predicate {
    std::string attr;
    CompareOp op = CompareOp::Eq;
    std::variant<double, std::string, StatRef> value;

    bool operator==(const Predicate&) const = default;
};

struct PatternStep {
    std::string stream;  // "food", a life stream label, or "*"
    std::vector<Predicate> where;
    // Gap to the previous step's event, in minutes; ignored on the first step.
    double min_gap_minutes = 0.0;
    double max_gap_minutes = 0.0;

    bool operator==(const PatternStep&) const = default;
};

struct EventPattern {
    std::vector<PatternStep> steps;

    bool operator==(const EventPattern&) const = default;
};

// Per-event values that depend on the surrounding chronicle.
struct EventContext {
    std::optional<double> fasting_hours;  // hours since the previous food event
};

std::vector<std::string> validate(const EventPattern& p);

/// True if no predicate still refers to a chronicle statistic.
bool is_resolved(const EventPattern& p);

/// Replaces every StatRef by its value on this chronicle. Throws
/// InvalidArgument if a statistic has no data.
EventPattern resolve(const EventPattern& p, const Chronicle& c);

std::optional<double> numeric_attribute(const Event& e, std::string_view attr, const EventContext& ctx = {});

bool step_matches(const PatternStep& step, const Event& e, const EventContext& ctx = {});

/// fasting_hours etc. for every event of the chronicle, index-aligned.
std::vector<EventContext> event_contexts(const Chronicle& c);

struct Occurrence {
    std::vector<std::size_t> indices;  // chronicle positions, one per step
    std::vector<std::string> event_ids;
    TimestampMs start_ms = 0;
    TimestampMs end_ms = 0;

    bool operator==(const Occurrence&) const = default;
};

/// Leftmost-earliest, non-overlapping matches. A match is an index-increasing
/// tuple whose events satisfy their steps and whose consecutive start times
/// differ by a value in [min_gap, max_gap]. Scanning left to right, the match
/// with the smallest first index (then lexicographically smallest tuple) is
/// taken, and the next match must start after its last index.
/// The pattern must be resolved.
std::vector<Occurrence> find_occurrences(const EventPattern& pattern, const Chronicle& c);

Json to_json(const EventPattern& p);
EventPattern event_pattern_from_json(const Json& j);
Json to_json(const Occurrence& o);

}  // namespace pfm
