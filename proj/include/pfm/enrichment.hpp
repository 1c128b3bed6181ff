#pragma once

#include "pfm/chronicle.hpp"
#include "pfm/json.hpp"
#include "pfm/nutrition.hpp"
#include "pfm/taste.hpp"
#include "pfm/time.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pfm {

struct FoodQuery {
    std::string dish;     // normalized
    std::string barcode;  // digits

    std::string cache_key() const;
};

FoodQuery query_for(const FoodEvent& e);

struct ResolvedFood {
    std::string item_id;
    NutritionFacts per_100g;
    double serving_g = 100.0;

    bool operator==(const ResolvedFood&) const = default;
};

Json to_json(const ResolvedFood& r);
ResolvedFood resolved_food_from_json(const Json& j);

class NutritionClient {
public:
    virtual ~NutritionClient() = default;
    virtual std::string label() const = 0;
    /// nullopt when the client does not know the food; throws
    /// Error(ClientUnavailable) on transient failure.
    virtual std::optional<ResolvedFood> resolve(const FoodQuery& query) = 0;
};

using BarcodeDb = std::unordered_map<std::string, std::string>;

/// Exact match on an 8-14 digit code. Throws MalformedBarcode, NotFound.
std::string lookup_barcode(const std::string& code, const BarcodeDb& db);

BarcodeDb load_barcodes(const std::filesystem::path& path);

class FixtureNutritionClient final : public NutritionClient {
public:
    FixtureNutritionClient(std::map<std::string, ResolvedFood> items, std::map<std::string, std::string> names,
                           BarcodeDb barcodes);

    /// Reads fixtures/nutrition.jsonl and fixtures/barcodes.jsonl.
    static std::shared_ptr<FixtureNutritionClient> load(const std::filesystem::path& nutrition_path,
                                                        const std::filesystem::path& barcodes_path);

    std::string label() const override { return "fixture"; }
    std::optional<ResolvedFood> resolve(const FoodQuery& query) override;

    const std::map<std::string, ResolvedFood>& items() const { return items_; }
    const BarcodeDb& barcodes() const { return barcodes_; }

private:
    std::map<std::string, ResolvedFood> items_;
    std::map<std::string, std::string> names_;  // normalized name -> item id
    BarcodeDb barcodes_;
};

// Byte transport behind live clients, injectable for tests.
class Transport {
public:
    virtual ~Transport() = default;
    /// Body on 200, nullopt on 404; throws Error(ClientUnavailable) otherwise.
    virtual std::optional<std::string> get(const std::string& url, const std::map<std::string, std::string>& headers) = 0;
};

// JSON nutrition API: GET {base}/v1/nutrition?barcode=..|query=.. returning
// {"item_id", "per_100g", "serving_g"}.
class RemoteNutritionClient final : public NutritionClient {
public:
    RemoteNutritionClient(std::string base_url, std::string api_key, std::shared_ptr<Transport> transport);

    std::string label() const override { return "remote"; }
    std::optional<ResolvedFood> resolve(const FoodQuery& query) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::shared_ptr<Transport> transport_;
};

using Clock = std::function<TimestampMs()>;
Clock system_clock();

// Cache of resolved foods keyed by (client, normalized query). Entries live
// as JSON files under a directory when one is given, in memory otherwise.
class EnrichmentCache {
public:
    struct Entry {
        ResolvedFood food;
        TimestampMs fetched_at = 0;
    };

    explicit EnrichmentCache(std::filesystem::path dir = {}, int ttl_days = 30);

    std::optional<Entry> get(const std::string& client, const std::string& key, TimestampMs now) const;
    void put(const std::string& client, const std::string& key, const Entry& entry);

private:
    std::filesystem::path file_for(const std::string& client, const std::string& key) const;

    std::filesystem::path dir_;
    TimestampMs ttl_ms_;
    mutable std::mutex mutex_;
    std::map<std::string, Entry> memory_;
};

struct Weather {
    double temp_c = 0.0;
    std::string condition;

    bool operator==(const Weather&) const = default;
};

class ContextClient {
public:
    virtual ~ContextClient() = default;
    virtual std::optional<Weather> weather(TimestampMs at, int tz_offset_min) = 0;
    virtual std::optional<std::string> place_category(const std::string& place) = 0;
};

// fixtures/weather.jsonl ({"date": "YYYY-MM-DD", "temp_c", "condition"}) and
// fixtures/places.jsonl ({"place", "category"}).
class FixtureContextClient final : public ContextClient {
public:
    static std::shared_ptr<FixtureContextClient> load(const std::filesystem::path& weather_path,
                                                      const std::filesystem::path& places_path);

    std::optional<Weather> weather(TimestampMs at, int tz_offset_min) override;
    std::optional<std::string> place_category(const std::string& place) override;

private:
    std::map<std::int64_t, Weather> weather_;  // local day number -> weather
    std::map<std::string, std::string> places_;
};

struct EnrichmentRecord {
    std::string event_id;
    std::string item_id;
    NutritionFacts nutrition;
    std::optional<TasteRegion> taste;
    std::optional<Weather> weather;
    std::optional<std::string> place_category;
    TimestampMs fetched_at = 0;
    std::string client;
    bool energy_flagged = false;  // macro/kcal sanity bound violated

    bool operator==(const EnrichmentRecord&) const = default;
};

Json to_json(const EnrichmentRecord& r);
EnrichmentRecord enrichment_record_from_json(const Json& j);

/// Enriched copy of the event: nutrition, taste and (if empty) dish name
/// attached with Derived provenance.
FoodEvent apply_enrichment(const FoodEvent& e, const EnrichmentRecord& r);

class ClientRegistry {
public:
    ClientRegistry(std::vector<std::shared_ptr<NutritionClient>> clients, std::shared_ptr<EnrichmentCache> cache,
                   Clock clock = system_clock());

    void set_taste_catalog(std::shared_ptr<const TasteCatalog> catalog) { taste_ = std::move(catalog); }
    void set_context_client(std::shared_ptr<ContextClient> client) { context_ = std::move(client); }

    /// First resolving client wins (priority order); cache is consulted
    /// before any client is called. Throws UnresolvedFood, InvalidArgument.
    EnrichmentRecord enrich(const FoodEvent& e) const;

    const std::vector<std::shared_ptr<NutritionClient>>& clients() const { return clients_; }
    const TasteCatalog* taste_catalog() const { return taste_.get(); }

private:
    std::vector<std::shared_ptr<NutritionClient>> clients_;
    std::shared_ptr<EnrichmentCache> cache_;
    Clock clock_;
    std::shared_ptr<const TasteCatalog> taste_;
    std::shared_ptr<ContextClient> context_;
};

struct RegistryOptions {
    std::filesystem::path data_dir;
    std::vector<std::string> priority = {"fixture", "remote"};
    int cache_ttl_days = 30;
    std::string remote_base_url;
    std::optional<std::string> api_key;  // from PFM_NUTRITION_API_KEY; absent = offline
    std::shared_ptr<Transport> transport;
    Clock clock = system_clock();
    double taste_trim = 0.0;
};

/// Fixture client always; remote client only with an API key and transport.
ClientRegistry make_registry(const RegistryOptions& options);

}  // namespace pfm
