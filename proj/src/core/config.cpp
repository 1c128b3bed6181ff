#include "pfm/config.hpp"

#include "pfm/error.hpp"

#include <fstream>

namespace pfm {

double EngineConfig::cap_for(const std::string& metric) const {
    auto it = caps.find(metric);
    return it == caps.end() ? default_cap : it->second;
}

VerifyOptions EngineConfig::verify_options() const {
    return VerifyOptions{alpha, n_permutations, n_bootstrap, min_effect, seed};
}

std::vector<std::string> validate(const EngineConfig& c) {
    std::vector<std::string> out;
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) out.emplace_back("alpha must be in (0, 1)");
    if (c.n_permutations < 200) out.emplace_back("n_permutations must be >= 200");
    if (c.n_bootstrap < 1) out.emplace_back("n_bootstrap must be >= 1");
    if (!(c.min_effect >= 0.0)) out.emplace_back("min_effect must be >= 0");
    if (c.min_days < 1) out.emplace_back("min_days must be >= 1");
    if (!(c.default_cap > 0.0)) out.emplace_back("default_cap must be > 0");
    for (const auto& [m, cap] : c.caps) {
        if (!(cap > 0.0)) out.push_back("cap of " + m + " must be > 0");
    }
    if (!(c.prior_fraction >= 0.0 && c.prior_fraction <= 1.0)) out.emplace_back("prior_fraction must be in [0, 1]");
    if (c.rating_threshold < 1 || c.rating_threshold > 5) out.emplace_back("rating_threshold must be in [1, 5]");
    if (c.clusters.clusters_max < 1) out.emplace_back("clusters_max must be >= 1");
    if (!(c.soft_penalty >= 0.0 && c.soft_penalty <= 1.0)) out.emplace_back("soft_penalty must be in [0, 1]");
    if (!(c.w_pref >= 0.0 && c.w_health >= 0.0) || std::abs(c.w_pref + c.w_health - 1.0) > 1e-9) {
        out.emplace_back("w_pref and w_health must be >= 0 and sum to 1");
    }
    if (c.cache_ttl_days < 0) out.emplace_back("cache_ttl_days must be >= 0");
    return out;
}

EngineConfig config_from_json(const Json& j) {
    EngineConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.alpha = j.value("alpha", c.alpha);
        c.n_permutations = j.value("n_permutations", c.n_permutations);
        c.n_bootstrap = j.value("n_bootstrap", c.n_bootstrap);
        c.min_effect = j.value("min_effect", c.min_effect);
        c.min_days = j.value("min_days", c.min_days);
        if (j.contains("caps")) c.caps = j["caps"].get<std::map<std::string, double>>();
        c.default_cap = j.value("default_cap", c.default_cap);
        c.prior_fraction = j.value("prior_fraction", c.prior_fraction);
        if (j.contains("rule_params")) {
            for (const auto& [k, v] : j["rule_params"].items()) c.rule_params[k] = v;
        }
        c.rating_threshold = j.value("rating_threshold", c.rating_threshold);
        c.clusters.cutoff = j.value("cluster_cutoff", c.clusters.cutoff);
        c.clusters.clusters_max = j.value("clusters_max", c.clusters.clusters_max);
        c.taste_trim = j.value("taste_trim", c.taste_trim);
        c.soft_penalty = j.value("soft_penalty", c.soft_penalty);
        c.w_pref = j.value("w_pref", c.w_pref);
        c.w_health = j.value("w_health", c.w_health);
        if (j.contains("client_priority")) c.client_priority = j["client_priority"].get<std::vector<std::string>>();
        c.cache_ttl_days = j.value("cache_ttl_days", c.cache_ttl_days);
        c.remote_base_url = j.value("remote_base_url", c.remote_base_url);
        c.api_token = j.value("api_token", c.api_token);
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("config: ") + e.what());
    }
    if (auto problems = validate(c); !problems.empty()) fail(ErrorCode::SchemaError, "config: " + problems.front());
    return c;
}

Json to_json(const EngineConfig& c) {
    Json caps = Json::object();
    for (const auto& [k, v] : c.caps) caps[k] = num(v);
    Json params = Json::object();
    for (const auto& [k, v] : c.rule_params) params[k] = v;
    return Json{{"alpha", num(c.alpha)},
                {"api_token", c.api_token},
                {"cache_ttl_days", c.cache_ttl_days},
                {"caps", caps},
                {"client_priority", c.client_priority},
                {"cluster_cutoff", num(c.clusters.cutoff)},
                {"clusters_max", c.clusters.clusters_max},
                {"default_cap", num(c.default_cap)},
                {"min_days", c.min_days},
                {"min_effect", num(c.min_effect)},
                {"n_bootstrap", c.n_bootstrap},
                {"n_permutations", c.n_permutations},
                {"prior_fraction", num(c.prior_fraction)},
                {"rating_threshold", c.rating_threshold},
                {"remote_base_url", c.remote_base_url},
                {"rule_params", params},
                {"seed", c.seed},
                {"soft_penalty", num(c.soft_penalty)},
                {"taste_trim", num(c.taste_trim)},
                {"w_health", num(c.w_health)},
                {"w_pref", num(c.w_pref)}};
}

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read config " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, "config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace pfm
