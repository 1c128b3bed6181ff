#pragma once

#include "pfm/json.hpp"
#include "pfm/taste.hpp"
#include "pfm/verify.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pfm {

struct EngineConfig {
    std::uint64_t seed = 42;

    // verification
    double alpha = 0.05;
    std::size_t n_permutations = 1000;
    std::size_t n_bootstrap = 500;
    double min_effect = 1.0;

    // model
    int min_days = 28;
    std::map<std::string, double> caps{{"sleep_quality", 15.0}, {"sleep_latency", 10.0}, {"bedtime_minutes", 60.0}};
    double default_cap = 10.0;
    double prior_fraction = 0.25;
    std::map<std::string, Json> rule_params;  // rule id -> parameter overrides

    // preferences
    int rating_threshold = 4;
    ClusterOptions clusters;
    double taste_trim = 0.0;

    // recommendation
    double soft_penalty = 0.2;
    double w_pref = 0.5;
    double w_health = 0.5;

    // enrichment
    std::vector<std::string> client_priority{"fixture", "remote"};
    int cache_ttl_days = 30;
    std::string remote_base_url;

    // service
    std::string api_token;  // empty = no auth

    double cap_for(const std::string& metric) const;
    VerifyOptions verify_options() const;
};

std::vector<std::string> validate(const EngineConfig& c);
EngineConfig config_from_json(const Json& j);
Json to_json(const EngineConfig& c);

/// Reads a config file. Throws IoError if it cannot be read, SchemaError if invalid.
EngineConfig load_config(const std::string& path);

}  // namespace pfm
