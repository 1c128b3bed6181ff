#include "pfm/chronicle.hpp"

#include "pfm/error.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

namespace pfm {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kDeclaredUnits = {{
    {"sleep_quality", "score"},
    {"sleep_latency", "min"},
    {"duration_min", "min"},
    {"kcal_burned", "kcal"},
    {"steps", "count"},
    {"stress_level", "score"},
    {"heart_rate", "bpm"},
}};

const std::set<std::string, std::less<>> kFoodKeys = {
    "schema_version", "type", "event_id", "user_id", "what", "when",
    "where", "who", "how", "why", "rating", "provenance"};

const std::set<std::string, std::less<>> kLifeKeys = {
    "schema_version", "type", "event_id", "user_id", "stream", "start_ms",
    "end_ms", "tz_offset_min", "attributes", "provenance"};

[[noreturn]] void parse_fail(std::size_t line, const std::string& reason) {
    if (line > 0) fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason);
    fail(ErrorCode::ParseError, reason);
}

const Json& require(const Json& j, const char* key, const std::string& path, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) parse_fail(line, "missing field '" + path + "'");
    return *it;
}

std::string get_string(const Json& j, const char* key, const std::string& path, std::size_t line) {
    const Json& v = require(j, key, path, line);
    if (!v.is_string()) parse_fail(line, "field '" + path + "' must be a string");
    return v.get<std::string>();
}

std::int64_t get_int(const Json& j, const char* key, const std::string& path, std::size_t line) {
    const Json& v = require(j, key, path, line);
    if (!v.is_number_integer()) parse_fail(line, "field '" + path + "' must be an integer");
    return v.get<std::int64_t>();
}

double get_number(const Json& j, const char* key, const std::string& path, std::size_t line) {
    const Json& v = require(j, key, path, line);
    if (!v.is_number()) parse_fail(line, "field '" + path + "' must be a number");
    return v.get<double>();
}

std::string opt_string(const Json& j, const char* key, const std::string& path, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) parse_fail(line, "field '" + path + "' must be a string");
    return it->get<std::string>();
}

std::optional<double> opt_number(const Json& j, const char* key, const std::string& path, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) parse_fail(line, "field '" + path + "' must be a number");
    return it->get<double>();
}

const Json& object_or_empty(const Json& j, const char* key, std::size_t line) {
    static const Json empty = Json::object();
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return empty;
    if (!it->is_object()) parse_fail(line, std::string("field '") + key + "' must be an object");
    return *it;
}

std::map<std::string, Provenance> provenance_map(const Json& j, std::size_t line) {
    std::map<std::string, Provenance> out;
    for (const auto& [field, v] : object_or_empty(j, "provenance", line).items()) {
        try {
            out[field] = provenance_from_json(v);
        } catch (const Error& e) {
            parse_fail(line, "provenance." + field + ": " + e.what());
        }
    }
    return out;
}

Json provenance_json(const std::map<std::string, Provenance>& p) {
    Json j = Json::object();
    for (const auto& [field, prov] : p) j[field] = to_json(prov);
    return j;
}

Json extra_of(const Json& j, const std::set<std::string, std::less<>>& known) {
    Json extra = Json::object();
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) extra[k] = v;
    }
    return extra;
}

FoodEvent food_from_json(const Json& j, std::size_t line) {
    FoodEvent e;
    e.event_id = get_string(j, "event_id", "event_id", line);
    e.user_id = get_string(j, "user_id", "user_id", line);

    const Json& what = require(j, "what", "what", line);
    if (!what.is_object()) parse_fail(line, "field 'what' must be an object");
    e.dish = opt_string(what, "dish", "what.dish", line);
    e.barcode = opt_string(what, "barcode", "what.barcode", line);
    e.quantity_g = opt_number(what, "quantity_g", "what.quantity_g", line);
    if (auto it = what.find("items"); it != what.end() && !it->is_null()) {
        if (!it->is_array()) parse_fail(line, "field 'what.items' must be an array");
        for (const auto& item : *it) {
            if (!item.is_object()) parse_fail(line, "field 'what.items[]' must be an object");
            e.items.push_back(FoodItem{get_string(item, "item_id", "what.items[].item_id", line),
                                       get_number(item, "quantity_g", "what.items[].quantity_g", line)});
        }
    }

    const Json& when = require(j, "when", "when", line);
    if (!when.is_object()) parse_fail(line, "field 'when' must be an object");
    e.start_ms = get_int(when, "start_ms", "when.start_ms", line);
    e.logged_ms = get_int(when, "logged_ms", "when.logged_ms", line);
    if (when.contains("tz_offset_min")) e.tz_offset_min = static_cast<int>(get_int(when, "tz_offset_min", "when.tz_offset_min", line));

    const Json& where = object_or_empty(j, "where", line);
    e.place = opt_string(where, "place", "where.place", line);
    e.lat = opt_number(where, "lat", "where.lat", line);
    e.lon = opt_number(where, "lon", "where.lon", line);

    const Json& who = object_or_empty(j, "who", line);
    if (who.contains("companions")) e.companions = static_cast<int>(get_int(who, "companions", "who.companions", line));
    e.social = opt_string(who, "social", "who.social", line);

    if (j.contains("how")) {
        try {
            e.how = input_channel_from_string(get_string(j, "how", "how", line));
        } catch (const Error& err) {
            parse_fail(line, err.what());
        }
    }

    const Json& why = object_or_empty(j, "why", line);
    try {
        if (why.contains("nutrition") && !why["nutrition"].is_null()) e.nutrition = nutrition_from_json(why["nutrition"]);
        if (why.contains("taste") && !why["taste"].is_null()) e.taste = taste_region_from_json(why["taste"]);
    } catch (const Error& err) {
        parse_fail(line, std::string("why: ") + err.what());
    }

    if (j.contains("rating") && !j["rating"].is_null()) {
        e.rating = static_cast<int>(get_int(j, "rating", "rating", line));
    }
    e.provenance = provenance_map(j, line);
    e.extra = extra_of(j, kFoodKeys);
    return e;
}

LifeEvent life_from_json(const Json& j, std::size_t line) {
    LifeEvent e;
    e.event_id = get_string(j, "event_id", "event_id", line);
    e.user_id = get_string(j, "user_id", "user_id", line);
    e.stream = get_string(j, "stream", "stream", line);
    e.start_ms = get_int(j, "start_ms", "start_ms", line);
    e.end_ms = get_int(j, "end_ms", "end_ms", line);
    if (j.contains("tz_offset_min")) e.tz_offset_min = static_cast<int>(get_int(j, "tz_offset_min", "tz_offset_min", line));
    for (const auto& [name, v] : object_or_empty(j, "attributes", line).items()) {
        if (!v.is_object()) parse_fail(line, "attributes." + name + " must be {value, unit}");
        e.attributes[name] = Measurement{get_number(v, "value", "attributes." + name + ".value", line),
                                         opt_string(v, "unit", "attributes." + name + ".unit", line)};
    }
    e.provenance = provenance_map(j, line);
    e.extra = extra_of(j, kLifeKeys);
    return e;
}


}  // namespace

std::string_view to_string(ProvenanceKind k) {
    switch (k) {
        case ProvenanceKind::Observed: return "observed";
        case ProvenanceKind::Derived: return "derived";
        case ProvenanceKind::Subjective: return "subjective";
    }
    return "observed";
}

ProvenanceKind provenance_kind_from_string(std::string_view s) {
    if (s == "observed") return ProvenanceKind::Observed;
    if (s == "derived") return ProvenanceKind::Derived;
    if (s == "subjective") return ProvenanceKind::Subjective;
    fail(ErrorCode::ParseError, "unknown provenance kind '" + std::string(s) + "'");
}

std::string_view to_string(InputChannel c) {
    switch (c) {
        case InputChannel::Text: return "text";
        case InputChannel::Barcode: return "barcode";
        case InputChannel::Api: return "api";
        case InputChannel::Ui: return "ui";
    }
    return "text";
}

InputChannel input_channel_from_string(std::string_view s) {
    if (s == "text") return InputChannel::Text;
    if (s == "barcode") return InputChannel::Barcode;
    if (s == "api") return InputChannel::Api;
    if (s == "ui") return InputChannel::Ui;
    fail(ErrorCode::ParseError, "unknown input channel '" + std::string(s) + "'");
}

Json to_json(const Provenance& p) {
    return Json{{"kind", std::string(to_string(p.kind))}, {"source", p.source}};
}

Provenance provenance_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        fail(ErrorCode::ParseError, "provenance needs a 'kind'");
    }
    return Provenance{provenance_kind_from_string(j["kind"].get<std::string>()), j.value("source", std::string{})};
}

const std::string& event_id(const Event& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.event_id; }, e);
}

const std::string& user_id(const Event& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.user_id; }, e);
}

TimestampMs start_ms(const Event& e) {
    return std::visit([](const auto& x) { return x.start_ms; }, e);
}

TimestampMs end_ms(const Event& e) {
    if (const auto* f = std::get_if<FoodEvent>(&e)) return f->start_ms;
    return std::get<LifeEvent>(e).end_ms;
}

int tz_offset_min(const Event& e) {
    return std::visit([](const auto& x) { return x.tz_offset_min; }, e);
}

std::string_view stream_of(const Event& e) {
    if (std::holds_alternative<FoodEvent>(e)) return "food";
    return std::get<LifeEvent>(e).stream;
}

bool is_food(const Event& e) { return std::holds_alternative<FoodEvent>(e); }

std::string normalize_dish_name(std::string_view name) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : name) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

std::optional<std::string_view> declared_unit(std::string_view metric) {
    for (const auto& [m, u] : kDeclaredUnits) {
        if (m == metric) return u;
    }
    return std::nullopt;
}

bool valid_stream_label(std::string_view stream) {
    if (stream == "sleep" || stream == "exercise" || stream == "steps" || stream == "stress") return true;
    return stream.starts_with("custom:") && stream.size() > 7;
}

std::vector<std::string> validate(const FoodEvent& e) {
    std::vector<std::string> out;
    if (e.event_id.empty()) out.emplace_back("event_id must be non-empty");
    if (e.user_id.empty()) out.emplace_back("user_id must be non-empty");
    if (e.start_ms > e.logged_ms) out.emplace_back("eating time must not be after logging time");
    if (e.quantity_g && !(*e.quantity_g >= 0.0)) out.emplace_back("what.quantity_g must be >= 0");
    for (const auto& item : e.items) {
        if (item.item_id.empty()) out.emplace_back("what.items[].item_id must be non-empty");
        if (!(item.quantity_g >= 0.0)) out.emplace_back("quantity of " + item.item_id + " must be >= 0");
    }
    if (e.rating && (*e.rating < 1 || *e.rating > 5)) out.emplace_back("rating must be in [1, 5]");
    if (e.companions < 0) out.emplace_back("who.companions must be >= 0");
    if (e.lat && (*e.lat < -90.0 || *e.lat > 90.0)) out.emplace_back("where.lat out of range");
    if (e.lon && (*e.lon < -180.0 || *e.lon > 180.0)) out.emplace_back("where.lon out of range");
    if (e.nutrition) {
        for (auto& v : e.nutrition->violations()) out.push_back("why.nutrition: " + v);
    }
    if (e.taste && !e.taste->valid()) out.emplace_back("why.taste is not a valid region");
    if (auto it = e.provenance.find("rating"); it != e.provenance.end() && it->second.kind != ProvenanceKind::Subjective) {
        out.emplace_back("rating provenance must be subjective");
    }
    return out;
}

std::vector<std::string> validate(const LifeEvent& e) {
    std::vector<std::string> out;
    if (e.event_id.empty()) out.emplace_back("event_id must be non-empty");
    if (e.user_id.empty()) out.emplace_back("user_id must be non-empty");
    if (!valid_stream_label(e.stream)) out.push_back("unknown stream '" + e.stream + "'");
    if (e.start_ms > e.end_ms) out.emplace_back("start must not be after end");
    for (const auto& [name, m] : e.attributes) {
        if (!std::isfinite(m.value)) out.push_back("attribute " + name + " must be finite");
        if (auto unit = declared_unit(name); unit && m.unit != *unit) {
            out.push_back("attribute " + name + " must carry unit '" + std::string(*unit) + "'");
        }
    }
    return out;
}

std::vector<std::string> validate(const Event& e) {
    return std::visit([](const auto& x) { return validate(x); }, e);
}

bool event_before(const Event& a, const Event& b) {
    const auto sa = start_ms(a);
    const auto sb = start_ms(b);
    if (sa != sb) return sa < sb;
    return event_id(a) < event_id(b);
}

bool StreamFilter::accepts(const Event& e) const {
    if (streams.empty()) return true;
    return streams.contains(std::string(stream_of(e)));
}

const Event* Chronicle::find(const std::string& id) const {
    if (!ids_.contains(id)) return nullptr;
    for (const auto& e : events_) {
        if (event_id(e) == id) return &e;
    }
    return nullptr;
}

void Chronicle::append(Event e) {
    auto problems = validate(e);
    if (!user_id_.empty() && !pfm::user_id(e).empty() && pfm::user_id(e) != user_id_) {
        problems.push_back("user_id '" + pfm::user_id(e) + "' does not match chronicle user '" + user_id_ + "'");
    }
    if (!problems.empty()) {
        std::string msg = "invalid event '" + event_id(e) + "':";
        for (const auto& p : problems) msg += " " + p + ";";
        fail(ErrorCode::InvalidEvent, msg);
    }
    if (ids_.contains(event_id(e))) fail(ErrorCode::DuplicateId, "duplicate event id '" + event_id(e) + "'");
    if (user_id_.empty()) user_id_ = pfm::user_id(e);
    auto pos = std::upper_bound(events_.begin(), events_.end(), e, event_before);
    ids_.insert(event_id(e));
    events_.insert(pos, std::move(e));
}

Chronicle Chronicle::with(Event e) const {
    Chronicle copy = *this;
    copy.append(std::move(e));
    return copy;
}

void Chronicle::replace(Event e) {
    auto problems = validate(e);
    if (!problems.empty()) fail(ErrorCode::InvalidEvent, "invalid replacement for '" + event_id(e) + "'");
    for (auto& existing : events_) {
        if (event_id(existing) == event_id(e)) {
            if (start_ms(existing) != start_ms(e)) {
                fail(ErrorCode::InvalidEvent, "replacement must keep the start time of '" + event_id(e) + "'");
            }
            existing = std::move(e);
            return;
        }
    }
    fail(ErrorCode::NotFound, "no event '" + event_id(e) + "'");
}

std::vector<Event> Chronicle::window(TimestampMs from, TimestampMs to, const StreamFilter& filter) const {
    if (from > to) fail(ErrorCode::InvalidRange, "window start after end");
    auto first = std::lower_bound(events_.begin(), events_.end(), from,
                                  [](const Event& e, TimestampMs t) { return start_ms(e) < t; });
    std::vector<Event> out;
    for (auto it = first; it != events_.end() && start_ms(*it) < to; ++it) {
        if (filter.accepts(*it)) out.push_back(*it);
    }
    return out;
}

Chronicle Chronicle::merge(const Chronicle& a, const Chronicle& b) {
    if (!a.user_id().empty() && !b.user_id().empty() && a.user_id() != b.user_id()) {
        fail(ErrorCode::InvalidArgument, "cannot merge chronicles of different users");
    }
    Chronicle out = a;
    for (const auto& e : b.events()) {
        if (const Event* existing = out.find(event_id(e))) {
            if (!(*existing == e)) fail(ErrorCode::DuplicateId, "conflicting duplicate '" + event_id(e) + "'");
            continue;
        }
        out.append(e);
    }
    return out;
}

Json to_json(const Event& ev) {
    if (const auto* f = std::get_if<FoodEvent>(&ev)) {
        const FoodEvent& e = *f;
        Json j = e.extra.is_object() ? e.extra : Json::object();
        Json items = Json::array();
        for (const auto& item : e.items) items.push_back(Json{{"item_id", item.item_id}, {"quantity_g", num(item.quantity_g)}});
        Json what{{"dish", e.dish}, {"items", items}};
        if (e.quantity_g) what["quantity_g"] = num(*e.quantity_g);
        if (!e.barcode.empty()) what["barcode"] = e.barcode;
        Json where{{"place", e.place}};
        if (e.lat) where["lat"] = num(*e.lat);
        if (e.lon) where["lon"] = num(*e.lon);
        Json why = Json::object();
        if (e.nutrition) why["nutrition"] = to_json(*e.nutrition);
        if (e.taste) why["taste"] = to_json(*e.taste);
        j["schema_version"] = kSchemaVersion;
        j["type"] = "food";
        j["event_id"] = e.event_id;
        j["user_id"] = e.user_id;
        j["what"] = what;
        j["when"] = Json{{"logged_ms", e.logged_ms}, {"start_ms", e.start_ms}, {"tz_offset_min", e.tz_offset_min}};
        j["where"] = where;
        j["who"] = Json{{"companions", e.companions}, {"social", e.social}};
        j["how"] = std::string(to_string(e.how));
        j["why"] = why;
        if (e.rating) j["rating"] = *e.rating;
        j["provenance"] = provenance_json(e.provenance);
        return j;
    }
    const LifeEvent& e = std::get<LifeEvent>(ev);
    Json j = e.extra.is_object() ? e.extra : Json::object();
    Json attrs = Json::object();
    for (const auto& [name, m] : e.attributes) attrs[name] = Json{{"unit", m.unit}, {"value", num(m.value)}};
    j["schema_version"] = kSchemaVersion;
    j["type"] = "life";
    j["event_id"] = e.event_id;
    j["user_id"] = e.user_id;
    j["stream"] = e.stream;
    j["start_ms"] = e.start_ms;
    j["end_ms"] = e.end_ms;
    j["tz_offset_min"] = e.tz_offset_min;
    j["attributes"] = attrs;
    j["provenance"] = provenance_json(e.provenance);
    return j;
}

Event event_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) parse_fail(line, "record must be a JSON object");
    auto sv = j.find("schema_version");
    if (sv == j.end()) parse_fail(line, "missing field 'schema_version'");
    if (!sv->is_number_integer()) parse_fail(line, "field 'schema_version' must be an integer");
    if (sv->get<int>() != kSchemaVersion) {
        fail(ErrorCode::SchemaVersionMismatch,
             "line " + std::to_string(line) + ": schema_version " + std::to_string(sv->get<int>()) +
                 " (supported: " + std::to_string(kSchemaVersion) + ")");
    }
    const std::string type = get_string(j, "type", "type", line);
    if (type == "food") return food_from_json(j, line);
    if (type == "life") return life_from_json(j, line);
    parse_fail(line, "field 'type' must be 'food' or 'life'");
}

Chronicle import_jsonl(std::istream& in) {
    Chronicle c;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(text);
        } catch (const Json::parse_error& e) {
            parse_fail(line, std::string("malformed JSON: ") + e.what());
        }
        Event e = event_from_json(j, line);
        try {
            c.append(std::move(e));
        } catch (const Error& err) {
            throw Error(err.code(), "line " + std::to_string(line) + ": " + err.what());
        }
    }
    return c;
}

Chronicle import_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
    return import_jsonl(in);
}

void export_jsonl(const Chronicle& c, std::ostream& out) {
    for (const auto& e : c.events()) out << canonical(to_json(e)) << '\n';
}

std::string export_jsonl(const Chronicle& c) {
    std::ostringstream out;
    export_jsonl(c, out);
    return out.str();
}

std::string canonicalize_jsonl(std::istream& in) {
    std::string out;
    std::string text;
    while (std::getline(in, text)) {
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        out += Json::parse(text).dump();
        out += '\n';
    }
    return out;
}

}  // namespace pfm
