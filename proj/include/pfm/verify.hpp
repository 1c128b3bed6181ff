#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"
#include "pfm/pattern.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pfm {

enum class ConfounderKind { Numeric, Categorical };

// One confounder, evaluated at the outcome event of a unit.
//   builtin "daytype"  -> weekday | weekend (categorical)
//   builtin "weekday"  -> mon..sun (categorical)
//   otherwise          -> aggregate of `attr` over `stream` events starting in
//                         [T - lookback, T), T = outcome start.
struct ConfounderSelector {
    std::string name;
    ConfounderKind kind = ConfounderKind::Numeric;
    std::string builtin;
    std::string stream;
    std::string attr;
    std::string aggregate = "sum";  // sum | mean | count | max | last
    double lookback_minutes = 1440.0;
    std::optional<double> default_value;
    int bins = 3;

    bool operator==(const ConfounderSelector&) const = default;
};

struct OutcomeSelector {
    std::string stream;
    std::string metric;

    bool operator==(const OutcomeSelector&) const = default;
};

struct Hypothesis {
    std::string name;
    EventPattern input;
    OutcomeSelector outcome;
    double within_minutes = 720.0;
    std::vector<ConfounderSelector> confounders;

    bool operator==(const Hypothesis&) const = default;
};

/// True if `metric` is a numeric quantity recorded on `stream` events.
bool known_outcome_metric(const std::string& stream, const std::string& metric);

std::vector<std::string> validate(const Hypothesis& h);

Json to_json(const ConfounderSelector& c);
ConfounderSelector confounder_from_json(const Json& j);
Json to_json(const Hypothesis& h);
/// Throws SchemaError; "confounders" must be present (it may be empty).
Hypothesis hypothesis_from_json(const Json& j);

using ConfounderValue = std::variant<double, std::string>;

struct Unit {
    std::string id;  // outcome event id
    bool treated = false;
    double outcome = 0.0;
    TimestampMs outcome_ms = 0;
    std::optional<std::string> occurrence_start_id;
    std::vector<ConfounderValue> confounders;  // aligned with the hypothesis
};

/// Evaluates one confounder for an outcome at time t (tz for calendar builtins).
/// Throws MissingConfounderValue when there is no data and no default.
ConfounderValue confounder_value(const ConfounderSelector& sel, const Chronicle& c, TimestampMs t, int tz_offset,
                                 const std::string& unit_id);

/// Treated: each occurrence linked to the first not-yet-linked outcome event
/// starting at or after its end and within `within_minutes`. Control: outcome
/// events not linked and with no occurrence ending in [start - within, start].
std::vector<Unit> build_units(const Hypothesis& h, const Chronicle& c, const std::vector<Occurrence>& occurrences);

struct ContextGroup {
    std::string key;  // "all" or "name=label|name=label"
    std::vector<std::pair<std::string, std::string>> signature;
    std::vector<std::size_t> treated;  // unit indices
    std::vector<std::size_t> control;
    bool low_power = false;
};

struct ContextMatch {
    std::vector<ContextGroup> groups;                     // sorted by key
    std::map<std::string, std::vector<double>> bin_edges;  // numeric confounders
};

inline constexpr std::size_t kMinGroupArm = 5;

/// Bin edges at the i/k quantiles (i = 1..k-1) of the values, sorted input not required.
std::vector<double> equal_frequency_edges(std::vector<double> values, int k);

/// Label of value v: bin index = number of edges strictly below v.
std::string bin_label(const std::vector<double>& edges, double v);

std::string category_label(const ConfounderValue& v);

/// Partitions units by confounder signature. Numeric confounders are binned
/// into equal-frequency bins over all units; categorical ones matched exactly.
ContextMatch contextual_match(const std::vector<Unit>& units, const std::vector<ConfounderSelector>& confounders);

struct VerifyOptions {
    double alpha = 0.05;
    std::size_t n_permutations = 1000;
    std::size_t n_bootstrap = 500;
    double min_effect = 1.0;
    std::uint64_t seed = 42;
};

struct ContextResult {
    std::string key;
    std::vector<std::pair<std::string, std::string>> signature;
    double effect = 0.0;
    double p_value = 1.0;
    double adjusted_p = 1.0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
    double validity = 0.0;
    bool low_power = false;
    bool degenerate = false;
    bool estimable = false;  // both arms nonempty
    double std_error = 0.0;

    bool eligible() const { return estimable && !low_power && !degenerate; }
};

struct VerifiedRule {
    Hypothesis hypothesis;       // as given
    EventPattern resolved_input;  // statistics replaced by chronicle values
    std::vector<ContextResult> contexts;
    std::map<std::string, std::vector<double>> bin_edges;
    std::size_t n_occurrences = 0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
    double overall_effect = 0.0;
    std::string direction = "none";  // increase | decrease | none
    bool significant = false;
    double min_adjusted_p = 1.0;
};

/// Fraction of bootstrap effects whose sign matches `effect` and whose
/// magnitude is at least min_effect.
double validity_from_bootstrap(double effect, const std::vector<double>& boot, double min_effect);

/// Throws InvalidArgument (preconditions), NoOccurrences, NoControls,
/// MissingConfounderValue.
VerifiedRule verify(const Hypothesis& h, const Chronicle& c, const VerifyOptions& opt);

/// Difference in means of all treated vs all control units, no matching.
struct NaiveEstimate {
    double effect = 0.0;
    double p_value = 1.0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
};
NaiveEstimate naive_estimate(const Hypothesis& h, const Chronicle& c, const VerifyOptions& opt);

Json to_json(const ContextResult& r);
ContextResult context_result_from_json(const Json& j);
Json to_json(const VerifiedRule& r);
VerifiedRule verified_rule_from_json(const Json& j);

}  // namespace pfm
