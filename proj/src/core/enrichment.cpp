#include "pfm/enrichment.hpp"

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pfm {

namespace fs = std::filesystem;

namespace {

std::string url_encode(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

bool valid_barcode(const std::string& code) {
    if (code.size() < 8 || code.size() > 14) return false;
    for (unsigned char c : code) {
        if (!std::isdigit(c)) return false;
    }
    return true;
}

template <typename F>
void for_each_jsonl(const fs::path& path, F&& f) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            f(Json::parse(line));
        } catch (const Json::exception& e) {
            fail(ErrorCode::ParseError, path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
}

}  // namespace

std::string FoodQuery::cache_key() const {
    if (!barcode.empty()) return "barcode:" + barcode;
    return "dish:" + dish;
}

FoodQuery query_for(const FoodEvent& e) {
    FoodQuery q;
    q.barcode = e.barcode;
    q.dish = normalize_dish_name(e.dish);
    if (q.barcode.empty() && q.dish.empty()) {
        fail(ErrorCode::InvalidArgument, "event '" + e.event_id + "' has neither dish name nor barcode");
    }
    return q;
}

Json to_json(const ResolvedFood& r) {
    return Json{{"item_id", r.item_id}, {"per_100g", to_json(r.per_100g)}, {"serving_g", num(r.serving_g)}};
}

ResolvedFood resolved_food_from_json(const Json& j) {
    ResolvedFood r;
    r.item_id = j.at("item_id").get<std::string>();
    r.per_100g = nutrition_from_json(j.at("per_100g"));
    r.serving_g = j.value("serving_g", 100.0);
    return r;
}

std::string lookup_barcode(const std::string& code, const BarcodeDb& db) {
    if (!valid_barcode(code)) fail(ErrorCode::MalformedBarcode, "barcode must be 8-14 digits: '" + code + "'");
    auto it = db.find(code);
    if (it == db.end()) fail(ErrorCode::NotFound, "barcode " + code + " not in database");
    return it->second;
}

BarcodeDb load_barcodes(const fs::path& path) {
    BarcodeDb db;
    for_each_jsonl(path, [&](const Json& j) {
        db[j.at("barcode").get<std::string>()] = j.at("item_id").get<std::string>();
    });
    return db;
}

FixtureNutritionClient::FixtureNutritionClient(std::map<std::string, ResolvedFood> items,
                                               std::map<std::string, std::string> names, BarcodeDb barcodes)
    : items_(std::move(items)), names_(std::move(names)), barcodes_(std::move(barcodes)) {}

std::shared_ptr<FixtureNutritionClient> FixtureNutritionClient::load(const fs::path& nutrition_path,
                                                                     const fs::path& barcodes_path) {
    std::map<std::string, ResolvedFood> items;
    std::map<std::string, std::string> names;
    for_each_jsonl(nutrition_path, [&](const Json& j) {
        ResolvedFood r = resolved_food_from_json(j);
        names[normalize_dish_name(r.item_id)] = r.item_id;
        if (j.contains("names")) {
            for (const auto& n : j["names"]) names[normalize_dish_name(n.get<std::string>())] = r.item_id;
        }
        items[r.item_id] = std::move(r);
    });
    return std::make_shared<FixtureNutritionClient>(std::move(items), std::move(names), load_barcodes(barcodes_path));
}

std::optional<ResolvedFood> FixtureNutritionClient::resolve(const FoodQuery& query) {
    std::string item;
    if (!query.barcode.empty()) {
        try {
            item = lookup_barcode(query.barcode, barcodes_);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MalformedBarcode) throw;
        }
    }
    if (item.empty() && !query.dish.empty()) {
        if (auto it = names_.find(query.dish); it != names_.end()) item = it->second;
    }
    if (item.empty()) return std::nullopt;
    auto it = items_.find(item);
    if (it == items_.end()) return std::nullopt;
    return it->second;
}

RemoteNutritionClient::RemoteNutritionClient(std::string base_url, std::string api_key,
                                             std::shared_ptr<Transport> transport)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), transport_(std::move(transport)) {}

std::optional<ResolvedFood> RemoteNutritionClient::resolve(const FoodQuery& query) {
    std::string url = base_url_ + "/v1/nutrition?";
    url += query.barcode.empty() ? "query=" + url_encode(query.dish) : "barcode=" + url_encode(query.barcode);
    auto body = transport_->get(url, {{"x-api-key", api_key_}});
    if (!body) return std::nullopt;
    try {
        return resolved_food_from_json(Json::parse(*body));
    } catch (const std::exception& e) {
        fail(ErrorCode::ClientUnavailable, std::string("remote nutrition response unreadable: ") + e.what());
    }
}

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

EnrichmentCache::EnrichmentCache(fs::path dir, int ttl_days)
    : dir_(std::move(dir)), ttl_ms_(static_cast<TimestampMs>(ttl_days) * kDayMs) {}

fs::path EnrichmentCache::file_for(const std::string& client, const std::string& key) const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
    return dir_ / client / (std::string(buf) + ".json");
}

std::optional<EnrichmentCache::Entry> EnrichmentCache::get(const std::string& client, const std::string& key,
                                                           TimestampMs now) const {
    std::optional<Entry> found;
    {
        std::lock_guard lock(mutex_);
        if (auto it = memory_.find(client + "|" + key); it != memory_.end()) found = it->second;
    }
    if (!found && !dir_.empty()) {
        std::ifstream in(file_for(client, key));
        if (in) {
            try {
                const Json j = Json::parse(in);
                if (j.at("key").get<std::string>() == key) {
                    found = Entry{resolved_food_from_json(j.at("food")), j.at("fetched_at").get<TimestampMs>()};
                }
            } catch (const std::exception&) {
                // Unreadable entries are treated as misses and overwritten.
            }
        }
    }
    if (found && now - found->fetched_at > ttl_ms_) return std::nullopt;
    return found;
}

void EnrichmentCache::put(const std::string& client, const std::string& key, const Entry& entry) {
    std::lock_guard lock(mutex_);
    memory_[client + "|" + key] = entry;
    if (dir_.empty()) return;
    const fs::path target = file_for(client, key);
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << canonical(Json{{"client", client}, {"fetched_at", entry.fetched_at}, {"food", to_json(entry.food)}, {"key", key}});
        if (!out) fail(ErrorCode::IoError, "cannot write cache entry " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::shared_ptr<FixtureContextClient> FixtureContextClient::load(const fs::path& weather_path,
                                                                 const fs::path& places_path) {
    auto c = std::make_shared<FixtureContextClient>();
    for_each_jsonl(weather_path, [&](const Json& j) {
        c->weather_[parse_date_days(j.at("date").get<std::string>())] =
            Weather{j.at("temp_c").get<double>(), j.value("condition", std::string{})};
    });
    for_each_jsonl(places_path, [&](const Json& j) {
        c->places_[normalize_dish_name(j.at("place").get<std::string>())] = j.at("category").get<std::string>();
    });
    return c;
}

std::optional<Weather> FixtureContextClient::weather(TimestampMs at, int tz_offset_min) {
    if (auto it = weather_.find(local_day(at, tz_offset_min)); it != weather_.end()) return it->second;
    return std::nullopt;
}

std::optional<std::string> FixtureContextClient::place_category(const std::string& place) {
    if (auto it = places_.find(normalize_dish_name(place)); it != places_.end()) return it->second;
    return std::nullopt;
}

Json to_json(const EnrichmentRecord& r) {
    Json j{{"client", r.client},
           {"energy_flagged", r.energy_flagged},
           {"event_id", r.event_id},
           {"fetched_at", r.fetched_at},
           {"item_id", r.item_id},
           {"nutrition", to_json(r.nutrition)}};
    if (r.taste) j["taste"] = to_json(*r.taste);
    if (r.weather) j["weather"] = Json{{"condition", r.weather->condition}, {"temp_c", num(r.weather->temp_c)}};
    if (r.place_category) j["place"] = Json{{"category", *r.place_category}};
    return j;
}

EnrichmentRecord enrichment_record_from_json(const Json& j) {
    EnrichmentRecord r;
    r.event_id = j.at("event_id").get<std::string>();
    r.item_id = j.value("item_id", std::string{});
    r.nutrition = nutrition_from_json(j.at("nutrition"));
    if (j.contains("taste")) r.taste = taste_region_from_json(j["taste"]);
    if (j.contains("weather")) {
        r.weather = Weather{j["weather"].at("temp_c").get<double>(), j["weather"].value("condition", std::string{})};
    }
    if (j.contains("place")) r.place_category = j["place"].at("category").get<std::string>();
    r.fetched_at = j.at("fetched_at").get<TimestampMs>();
    r.client = j.value("client", std::string{});
    r.energy_flagged = j.value("energy_flagged", false);
    return r;
}

FoodEvent apply_enrichment(const FoodEvent& e, const EnrichmentRecord& r) {
    FoodEvent out = e;
    const Provenance derived{ProvenanceKind::Derived, r.client.empty() ? "enrichment" : r.client};
    out.nutrition = r.nutrition;
    out.provenance["why.nutrition"] = derived;
    if (r.taste) {
        out.taste = r.taste;
        out.provenance["why.taste"] = derived;
    }
    if (out.dish.empty() && !r.item_id.empty()) {
        out.dish = r.item_id;
        out.provenance["what.dish"] = derived;
    }
    return out;
}

ClientRegistry::ClientRegistry(std::vector<std::shared_ptr<NutritionClient>> clients,
                               std::shared_ptr<EnrichmentCache> cache, Clock clock)
    : clients_(std::move(clients)),
      cache_(cache ? std::move(cache) : std::make_shared<EnrichmentCache>()),
      clock_(std::move(clock)) {}

EnrichmentRecord ClientRegistry::enrich(const FoodEvent& e) const {
    const FoodQuery query = query_for(e);
    const std::string key = query.cache_key();
    const TimestampMs now = clock_();

    std::optional<EnrichmentCache::Entry> hit;
    std::string via;
    for (const auto& client : clients_) {
        if ((hit = cache_->get(client->label(), key, now))) {
            via = client->label();
            break;
        }
    }
    std::vector<std::string> unavailable;
    if (!hit) {
        for (const auto& client : clients_) {
            std::optional<ResolvedFood> food;
            try {
                food = client->resolve(query);
            } catch (const Error& err) {
                if (err.code() != ErrorCode::ClientUnavailable) throw;
                unavailable.push_back(client->label());
                continue;
            }
            if (food) {
                hit = EnrichmentCache::Entry{std::move(*food), now};
                via = client->label();
                cache_->put(via, key, *hit);
                break;
            }
        }
    }
    if (!hit) {
        std::string msg = "no client resolved '" + key + "' for event '" + e.event_id + "'";
        if (!unavailable.empty()) {
            msg += " (unavailable, retriable:";
            for (const auto& u : unavailable) msg += " " + u;
            msg += ")";
        }
        fail(ErrorCode::UnresolvedFood, msg);
    }

    double grams = hit->food.serving_g;
    if (e.quantity_g && *e.quantity_g > 0.0) {
        grams = *e.quantity_g;
    } else if (!e.items.empty()) {
        double sum = 0.0;
        for (const auto& item : e.items) sum += item.quantity_g;
        if (sum > 0.0) grams = sum;
    }

    EnrichmentRecord r;
    r.event_id = e.event_id;
    r.item_id = hit->food.item_id;
    r.nutrition = hit->food.per_100g.scaled(grams / 100.0);
    r.energy_flagged = !r.nutrition.energy_consistent();
    r.fetched_at = hit->fetched_at;
    r.client = via;
    if (taste_) {
        r.taste = taste_->region_for(r.item_id);
        if (!r.taste && !query.dish.empty()) r.taste = taste_->region_for(query.dish);
    }
    if (context_) {
        r.weather = context_->weather(e.start_ms, e.tz_offset_min);
        if (!e.place.empty()) r.place_category = context_->place_category(e.place);
    }
    return r;
}

ClientRegistry make_registry(const RegistryOptions& options) {
    const fs::path fixtures = options.data_dir / "fixtures";
    std::map<std::string, std::shared_ptr<NutritionClient>> available;
    available["fixture"] = FixtureNutritionClient::load(fixtures / "nutrition.jsonl", fixtures / "barcodes.jsonl");
    if (options.api_key && options.transport && !options.remote_base_url.empty()) {
        available["remote"] = std::make_shared<RemoteNutritionClient>(options.remote_base_url, *options.api_key,
                                                                      options.transport);
    }
    std::vector<std::shared_ptr<NutritionClient>> ordered;
    for (const auto& label : options.priority) {
        if (auto it = available.find(label); it != available.end()) ordered.push_back(it->second);
    }
    auto cache = std::make_shared<EnrichmentCache>(
        options.data_dir.empty() ? fs::path{} : options.data_dir / "cache" / "enrichment", options.cache_ttl_days);
    ClientRegistry registry(std::move(ordered), std::move(cache), options.clock);
    const TasteCalibration cal = load_taste_calibration((options.data_dir / "config" / "taste_calibration.json").string());
    registry.set_taste_catalog(std::make_shared<TasteCatalog>(
        TasteCatalog::load((fixtures / "taste_samples.jsonl").string(), (fixtures / "recipes.jsonl").string(), cal,
                           options.taste_trim)));
    registry.set_context_client(FixtureContextClient::load(fixtures / "weather.jsonl", fixtures / "places.jsonl"));
    return registry;
}

}  // namespace pfm
