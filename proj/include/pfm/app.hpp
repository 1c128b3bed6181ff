#pragma once

// Operations shared by the CLI and the HTTP service. Both call the same
// functions on the same store and print the same canonical JSON.

#include "pfm/chronicle.hpp"
#include "pfm/config.hpp"
#include "pfm/enrichment.hpp"
#include "pfm/heatmap.hpp"
#include "pfm/model.hpp"
#include "pfm/recommender.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pfm {

/// [A-Za-z0-9_.-]{1,64}, not starting with '.'.
bool valid_user_id(const std::string& id);

// users/<id>/chronicle.jsonl   append-only raw events
// users/<id>/enrichment.jsonl  append-only enrichment records
// users/<id>/model.json        last built model (replaced atomically)
// users/<id>/profile.json      {"constraints": [...]}
class Store {
public:
    explicit Store(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path user_dir(const std::string& user) const;
    std::vector<std::string> users() const;

    /// Raw events. A torn last line (no newline, not parseable) is ignored.
    Chronicle load_chronicle(const std::string& user) const;
    std::vector<EnrichmentRecord> load_enrichment(const std::string& user) const;
    /// Raw events with the latest enrichment record applied to food events
    /// that carry no nutrition of their own.
    Chronicle load_enriched(const std::string& user) const;

    enum class AppendResult { Created, Replayed };
    /// Throws Conflict if an event with the same id but different content exists.
    AppendResult append(const std::string& user, const Event& e);
    void append_enrichment(const std::string& user, const EnrichmentRecord& r);

    std::optional<PersonalFoodModel> load_model(const std::string& user) const;
    void save_model(const std::string& user, const PersonalFoodModel& m);

    std::vector<StaticConstraint> load_constraints(const std::string& user) const;
    void save_constraints(const std::string& user, const std::vector<StaticConstraint>& c);

    /// Serializes writers of one user.
    std::mutex& user_mutex(const std::string& user);

private:
    std::filesystem::path root_;
    std::mutex map_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> user_mutexes_;
};

/// Writes to a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct EngineOptions {
    std::filesystem::path data_dir = "data";
    std::optional<std::string> config_path;  // default: <data_dir>/config/pfm.json if present
    std::optional<std::uint64_t> seed;       // overrides config (and PFM_SEED)
    std::optional<std::string> api_key;
    std::shared_ptr<Transport> transport;
    Clock clock = system_clock();
};

class Engine {
public:
    explicit Engine(EngineOptions options);

    const EngineConfig& config() const { return config_; }
    Store& store() { return store_; }
    const ClientRegistry& registry();

    /// Appends every event; identical replays are skipped.
    Json import_chronicle(const Chronicle& c);
    /// Returns {status: "created" | "replayed", event}. `enrich_now` enriches inline.
    Json add_event(const std::string& user, Json body, bool enrich_now, bool* created = nullptr);
    /// Enriches food events without nutrition and without an enrichment record.
    Json enrich(const std::string& user);
    /// One food event; returns the record or throws UnresolvedFood.
    EnrichmentRecord enrich_event(const std::string& user, const std::string& event_id);

    Json chronicle_query(const std::string& user, std::optional<TimestampMs> from, std::optional<TimestampMs> to,
                         const std::vector<std::string>& streams) const;
    Json export_user(const std::string& user) const;
    CooccurrenceMatrix heatmap_matrix(const std::string& user, const std::string& a, const std::string& b,
                                      std::int64_t window_minutes) const;
    Json heatmap(const std::string& user, const std::string& a, const std::string& b, std::int64_t window_minutes,
                 std::uint64_t min_support) const;
    Json verify(const std::string& user, const Json& hypothesis) const;
    Json build_model(const std::string& user);
    Json show_model(const std::string& user) const;
    Json recommend(const std::string& user, const Json& request);
    Json substitutes(const std::string& user, const Json& request);
    /// {constraints, user_id}
    Json profile(const std::string& user) const;
    Json set_profile(const std::string& user, const Json& body);

    /// Fills region, nutrition and ingredients of candidates from fixtures.
    void complete_candidates(RecommendationRequest& r);

private:
    EngineOptions options_;
    EngineConfig config_;
    Store store_;
    std::mutex registry_mutex_;
    std::unique_ptr<ClientRegistry> registry_;
};

/// Seed precedence: explicit option, then PFM_SEED, then config.
EngineConfig resolve_config(const EngineOptions& options);

}  // namespace pfm
