#include <doctest.h>

#include "harness.hpp"

#include "pfm/enrichment.hpp"
#include "pfm/error.hpp"
#include "pfm/rng.hpp"

#include <unordered_map>

using namespace pfm;

namespace {

// Counts calls and answers from a table; "down" makes every call fail.
class FakeTransport final : public Transport {
public:
    std::map<std::string, std::string> bodies;
    bool down = false;
    int calls = 0;
    std::map<std::string, std::string> last_headers;

    std::optional<std::string> get(const std::string& url, const std::map<std::string, std::string>& headers) override {
        ++calls;
        last_headers = headers;
        if (down) fail(ErrorCode::ClientUnavailable, "down");
        auto it = bodies.find(url);
        if (it == bodies.end()) return std::nullopt;
        return it->second;
    }
};

FoodEvent food(const std::string& dish, const std::string& barcode = {}) {
    FoodEvent e;
    e.event_id = "e";
    e.user_id = "u";
    e.dish = dish;
    e.barcode = barcode;
    return e;
}

}  // namespace

TEST_CASE("barcode lookup retrieves every code exactly") {
    Rng rng(71);
    BarcodeDb db;
    std::unordered_map<std::string, std::string> oracle;
    while (db.size() < 1000) {
        std::string code;
        const std::size_t len = 8 + rng.index(7);
        for (std::size_t i = 0; i < len; ++i) code += static_cast<char>('0' + rng.index(10));
        const std::string item = "item" + std::to_string(db.size());
        if (db.emplace(code, item).second) oracle[code] = item;
    }
    for (const auto& [code, item] : oracle) CHECK(lookup_barcode(code, db) == item);

    auto code_of = [&](const std::string& c) {
        try {
            lookup_barcode(c, db);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code_of("123") == ErrorCode::MalformedBarcode);
    CHECK(code_of("12345678901234567") == ErrorCode::MalformedBarcode);
    CHECK(code_of("12ab5678") == ErrorCode::MalformedBarcode);
    CHECK(code_of("00000000") == ErrorCode::NotFound);
}

TEST_CASE("fixture client resolves names and barcodes") {
    const auto dir = harness::source_path("data/fixtures");
    auto client = FixtureNutritionClient::load(dir / "nutrition.jsonl", dir / "barcodes.jsonl");
    const auto cola = client->resolve(FoodQuery{"", "5449000000996"});
    REQUIRE(cola);
    CHECK(cola->item_id == "cola");
    CHECK(client->resolve(FoodQuery{"diet cola", ""})->item_id == "diet_cola");
    CHECK_FALSE(client->resolve(FoodQuery{"grandma's stew", ""}));
}

TEST_CASE("registry: priority, cache and offline behaviour") {
    auto transport = std::make_shared<FakeTransport>();
    transport->bodies["http://api.test/v1/nutrition?query=mystery%20stew"] =
        R"({"item_id":"mystery_stew","per_100g":{"kcal":120,"carb_g":10,"protein_g":8,"fat_g":5},"serving_g":300})";
    auto remote = std::make_shared<RemoteNutritionClient>("http://api.test", "k3y", transport);
    TimestampMs now = 1000;
    ClientRegistry reg({remote}, std::make_shared<EnrichmentCache>(), [&] { return now; });

    const auto r = reg.enrich(food("Mystery  Stew"));
    CHECK(r.item_id == "mystery_stew");
    CHECK(r.client == "remote");
    CHECK(r.nutrition.kcal == doctest::Approx(360.0));
    CHECK(transport->last_headers.size() == 1);
    const int calls = transport->calls;

    // Served from cache while the remote is down.
    transport->down = true;
    CHECK(reg.enrich(food("mystery stew")).item_id == "mystery_stew");
    CHECK(transport->calls == calls);

    // Past the TTL the cache no longer answers and the outage surfaces as unresolved.
    now += 31LL * 86400000;
    try {
        reg.enrich(food("mystery stew"));
        FAIL("expected UnresolvedFood");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnresolvedFood);
    }
}

TEST_CASE("enrichment records round-trip and apply with derived provenance") {
    RegistryOptions o;
    o.clock = [] { return TimestampMs{42}; };
    harness::TempDir tmp("unit-enrich");
    harness::seed_data_dir(tmp.path());
    o.data_dir = tmp.path();
    const auto reg = make_registry(o);
    FoodEvent e = food("ramen");
    e.start_ms = 1772450040000;
    e.logged_ms = e.start_ms;
    e.place = "home";
    const auto rec = reg.enrich(e);
    CHECK(rec.fetched_at == 42);
    CHECK(rec.taste.has_value());
    CHECK(enrichment_record_from_json(to_json(rec)) == rec);
    const auto enriched = apply_enrichment(e, rec);
    REQUIRE(enriched.nutrition);
    CHECK(enriched.provenance.at("why.nutrition").kind == ProvenanceKind::Derived);
    const auto problems = validate(enriched);
    CHECK_MESSAGE(problems.empty(), (problems.empty() ? std::string() : problems.front()));
}
