#pragma once

#include "pfm/json.hpp"
#include "pfm/nutrition.hpp"
#include "pfm/taste_types.hpp"
#include "pfm/time.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

namespace pfm {

inline constexpr int kSchemaVersion = 1;

enum class ProvenanceKind { Observed, Derived, Subjective };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::Observed;
    std::string source;

    bool operator==(const Provenance&) const = default;
};

std::string_view to_string(ProvenanceKind k);
ProvenanceKind provenance_kind_from_string(std::string_view s);

enum class InputChannel { Text, Barcode, Api, Ui };

std::string_view to_string(InputChannel c);
InputChannel input_channel_from_string(std::string_view s);

struct FoodItem {
    std::string item_id;
    double quantity_g = 0.0;

    bool operator==(const FoodItem&) const = default;
};

struct FoodEvent {
    std::string event_id;
    std::string user_id;

    // what
    std::string dish;
    std::vector<FoodItem> items;
    std::optional<double> quantity_g;
    std::string barcode;

    // when
    TimestampMs start_ms = 0;
    TimestampMs logged_ms = 0;
    int tz_offset_min = 0;

    // where
    std::string place;
    std::optional<double> lat;
    std::optional<double> lon;

    // who
    int companions = 0;
    std::string social;

    InputChannel how = InputChannel::Text;

    // why
    std::optional<NutritionFacts> nutrition;
    std::optional<TasteRegion> taste;

    std::optional<int> rating;  // 1..5

    // Keyed by field path, e.g. "rating", "why.nutrition".
    std::map<std::string, Provenance> provenance;

    // Unknown top-level keys, preserved verbatim.
    Json extra = Json::object();

    bool operator==(const FoodEvent&) const = default;
};

struct Measurement {
    double value = 0.0;
    std::string unit;

    bool operator==(const Measurement&) const = default;
};

struct LifeEvent {
    std::string event_id;
    std::string user_id;
    std::string stream;  // sleep | exercise | steps | stress | custom:<label>
    TimestampMs start_ms = 0;
    TimestampMs end_ms = 0;
    int tz_offset_min = 0;
    std::map<std::string, Measurement> attributes;
    std::map<std::string, Provenance> provenance;
    Json extra = Json::object();

    bool operator==(const LifeEvent&) const = default;
};

using Event = std::variant<FoodEvent, LifeEvent>;

const std::string& event_id(const Event& e);
const std::string& user_id(const Event& e);
TimestampMs start_ms(const Event& e);
TimestampMs end_ms(const Event& e);
int tz_offset_min(const Event& e);
/// "food" for food events, the stream label otherwise.
std::string_view stream_of(const Event& e);
bool is_food(const Event& e);

/// Lowercase, trimmed, internal whitespace collapsed to one space.
std::string normalize_dish_name(std::string_view name);

/// Declared unit of a known life metric, if the metric is known.
std::optional<std::string_view> declared_unit(std::string_view metric);

bool valid_stream_label(std::string_view stream);

/// Violated invariants; empty when the event is valid.
std::vector<std::string> validate(const FoodEvent& e);
std::vector<std::string> validate(const LifeEvent& e);
std::vector<std::string> validate(const Event& e);

/// Chronicle order: start time, then event id.
bool event_before(const Event& a, const Event& b);

struct StreamFilter {
    std::set<std::string> streams;  // empty = all streams

    bool accepts(const Event& e) const;
};

class Chronicle {
public:
    Chronicle() = default;
    explicit Chronicle(std::string user_id) : user_id_(std::move(user_id)) {}

    const std::string& user_id() const { return user_id_; }
    std::span<const Event> events() const { return events_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }
    bool contains(const std::string& id) const { return ids_.contains(id); }
    const Event* find(const std::string& id) const;

    /// Inserts in order. Throws DuplicateId or InvalidEvent; leaves *this
    /// unchanged on failure.
    void append(Event e);

    /// Value-returning append.
    Chronicle with(Event e) const;

    /// Events with start in [from, to) accepted by the filter. Throws InvalidRange.
    std::vector<Event> window(TimestampMs from, TimestampMs to,
                              const StreamFilter& filter = {}) const;

    /// Union of two chronicles of the same user. Identical duplicates are
    /// collapsed, conflicting ones throw DuplicateId.
    static Chronicle merge(const Chronicle& a, const Chronicle& b);

    /// Replaces an existing event (same id) in place; used to attach derived data.
    void replace(Event e);

    bool operator==(const Chronicle& other) const {
        return user_id_ == other.user_id_ && events_ == other.events_;
    }

private:
    std::string user_id_;
    std::vector<Event> events_;
    std::unordered_set<std::string> ids_;
};

Json to_json(const Event& e);
/// Throws ParseError naming the missing/invalid field; `line` is used for messages only.
Event event_from_json(const Json& j, std::size_t line = 0);

Chronicle import_jsonl(std::istream& in);
Chronicle import_jsonl_file(const std::string& path);
void export_jsonl(const Chronicle& c, std::ostream& out);
std::string export_jsonl(const Chronicle& c);

/// Generic re-serialization of each line with sorted keys.
std::string canonicalize_jsonl(std::istream& in);

Json to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);

}  // namespace pfm
