#include <doctest.h>

#include "harness.hpp"

#include "pfm/service.hpp"

#include <httplib.h>

#include <thread>

using namespace pfm;

namespace {

struct Server {
    harness::TempDir dir{"unit-http"};
    std::unique_ptr<Service> service;
    std::thread thread;
    int port = 0;

    explicit Server(bool background = false, std::string token = {}) {
        harness::seed_data_dir(dir.path());
        if (!token.empty()) {
            Json cfg = harness::read_json(dir.path() / "config/pfm.json");
            cfg["api_token"] = token;
            std::ofstream(dir.path() / "config/pfm.json") << cfg.dump();
        }
        ServiceOptions o;
        o.engine.data_dir = dir.path();
        o.port = 0;
        o.background_enrichment = background;
        service = std::make_unique<Service>(o);
        port = service->bind();
        thread = std::thread([this] { service->serve(); });
    }
    ~Server() {
        service->stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

const char* kMeal =
    R"({"schema_version":1,"event_id":"m1","type":"food","what":{"dish":"Ramen"},"when":{"start_ms":1772450040000,"logged_ms":1772450040000,"tz_offset_min":60}})";

}  // namespace

TEST_CASE("posting an event is idempotent and conflicts are reported") {
    Server s;
    auto c = s.client();
    auto r = c.Post("/v1/users/alice/events", kMeal, "application/json");
    REQUIRE(r);
    CHECK(r->status == 201);
    r = c.Post("/v1/users/alice/events", kMeal, "application/json");
    CHECK(r->status == 200);
    CHECK(Json::parse(r->body)["status"] == "replayed");

    Json changed = Json::parse(kMeal);
    changed["what"]["dish"] = "pizza";
    r = c.Post("/v1/users/alice/events", changed.dump(), "application/json");
    CHECK(r->status == 409);
    CHECK(Json::parse(r->body)["error"]["code"] == "Conflict");

    r = c.Post("/v1/users/alice/events", "{not json", "application/json");
    CHECK(r->status == 400);
    r = c.Post("/v1/users/alice/events", R"({"schema_version":1,"event_id":"x","type":"food"})", "application/json");
    CHECK(r->status == 400);
}

TEST_CASE("reads have no side effects and unknown things are 404") {
    Server s;
    auto c = s.client();
    REQUIRE(c.Post("/v1/users/alice/events", kMeal, "application/json")->status == 201);
    const auto before = harness::read_text(s.dir.path() / "users/alice/chronicle.jsonl");
    const auto a = c.Get("/v1/users/alice/chronicle");
    const auto b = c.Get("/v1/users/alice/chronicle?stream=food&from=2026-03-01&to=2026-03-05");
    REQUIRE(a);
    CHECK(a->status == 200);
    CHECK(a->body == b->body);
    CHECK(Json::parse(a->body)["events"].size() == 1);
    CHECK(c.Get("/v1/users/alice/chronicle?stream=sleep")->body.find("m1") == std::string::npos);
    CHECK(harness::read_text(s.dir.path() / "users/alice/chronicle.jsonl") == before);
    CHECK_FALSE(std::filesystem::exists(s.dir.path() / "users/alice/enrichment.jsonl"));

    CHECK(c.Get("/v1/users/alice/model/full")->status == 404);
    CHECK(c.Get("/v1/users/alice/heatmap?streamA=food")->status == 400);
    CHECK(c.Get("/v1/users/..bad/chronicle")->status != 200);
    CHECK(c.Get("/healthz")->status == 200);
}

TEST_CASE("a barcode-only event is enriched from the fixtures") {
    Server s(true);
    auto c = s.client();
    const char* body =
        R"({"schema_version":1,"event_id":"b1","type":"food","how":"barcode","what":{"barcode":"5449000000996"},"when":{"start_ms":1772450040000,"logged_ms":1772450040000}})";
    REQUIRE(c.Post("/v1/users/bob/events", body, "application/json")->status == 201);
    s.service->drain_enrichment();
    const Json events = Json::parse(c.Get("/v1/users/bob/chronicle")->body)["events"];
    REQUIRE(events.size() == 1);
    REQUIRE(events[0]["why"].contains("nutrition"));
    CHECK(events[0]["why"]["nutrition"]["sugar_g"].get<double>() > 0.0);
}

TEST_CASE("enrich=now enriches inline") {
    Server s;
    auto c = s.client();
    const auto r = c.Post("/v1/users/carol/events?enrich=now", kMeal, "application/json");
    REQUIRE(r->status == 201);
    CHECK(Json::parse(r->body)["event"]["why"].contains("nutrition"));
}

TEST_CASE("model build, async status and bearer tokens") {
    Server s(false, "sekret");
    auto c = s.client();
    CHECK(c.Get("/v1/users/demo/model")->status == 401);
    c.set_bearer_token_auth("sekret");
    for (const auto& line : harness::read_lines(harness::source_path("data/scenario/chronicle.jsonl"))) {
        REQUIRE(c.Post("/v1/users/demo/events", line, "application/json")->status == 201);
    }
    CHECK(c.Post("/v1/users/demo/enrich", "", "application/json")->status == 200);
    auto r = c.Post("/v1/users/demo/model/build?async=true", "", "application/json");
    REQUIRE(r->status == 202);
    s.service->wait_for_build("demo");
    const Json status = Json::parse(c.Get("/v1/users/demo/model")->body);
    CHECK(status["status"] == "done");
    CHECK(c.Get("/v1/users/demo/model/full")->status == 200);

    REQUIRE(c.Put("/v1/users/demo/profile", harness::read_text(harness::source_path("data/scenario/profile.json")),
                  "application/json")->status == 200);
    r = c.Post("/v1/users/demo/recommendations", harness::read_text(harness::source_path("data/scenario/request.json")),
               "application/json");
    REQUIRE(r->status == 200);
    const Json rec = Json::parse(r->body);
    for (const auto& item : rec["ranked"]) CHECK(item["dish_id"] != "peanut_satay");
    r = c.Post("/v1/users/demo/substitutes", harness::read_text(harness::source_path("data/scenario/substitutes.json")),
               "application/json");
    CHECK(Json::parse(r->body)["ranked"][0]["item_id"] == "diet_cola");
}

TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status(ErrorCode::ParseError) == 400);
    CHECK(http_status(ErrorCode::NotFound) == 404);
    CHECK(http_status(ErrorCode::NoModel) == 404);
    CHECK(http_status(ErrorCode::Conflict) == 409);
    CHECK(http_status(ErrorCode::ClientUnavailable) == 503);
    CHECK(http_status(ErrorCode::InsufficientData) == 422);
}
