#include "pfm/taste.hpp"

#include "pfm/error.hpp"
#include "pfm/kernels.hpp"
#include "pfm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace pfm {

namespace {

kernels::Box to_box(const TasteRegion& r) {
    kernels::Box b;
    b.lo = r.lo;
    b.hi = r.hi;
    return b;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

TasteRegion item_region(std::span<const TasteVector> samples, double trim_fraction) {
    if (samples.empty()) fail(ErrorCode::EmptySamples, "item_region needs at least one sample");
    if (!(trim_fraction >= 0.0 && trim_fraction <= 0.25)) {
        fail(ErrorCode::InvalidArgument, "trim_fraction must be in [0, 0.25]");
    }
    TasteRegion r;
    r.sample_count = samples.size();
    std::vector<double> values(samples.size());
    for (std::size_t c = 0; c < kChannels; ++c) {
        for (std::size_t i = 0; i < samples.size(); ++i) values[i] = samples[i][c];
        std::sort(values.begin(), values.end());
        r.lo[c] = stats::quantile_sorted(values, trim_fraction);
        r.hi[c] = stats::quantile_sorted(values, 1.0 - trim_fraction);
        double sum = 0.0;
        std::size_t n = 0;
        for (double v : values) {
            if (v >= r.lo[c] && v <= r.hi[c]) {
                sum += v;
                ++n;
            }
        }
        // With interpolated bounds the interval can fall strictly between
        // two order statistics; the midpoint is the only sensible centroid.
        r.centroid[c] = n > 0 ? std::clamp(sum / static_cast<double>(n), r.lo[c], r.hi[c])
                              : 0.5 * (r.lo[c] + r.hi[c]);
    }
    return r;
}

TasteRegion item_region(std::span<const TasteSample> samples, double trim_fraction) {
    std::vector<TasteVector> vs;
    vs.reserve(samples.size());
    for (const auto& s : samples) vs.push_back(s.vector);
    return item_region(std::span<const TasteVector>(vs), trim_fraction);
}

TasteRegion dish_region(std::span<const RecipeComponent> recipe,
                        const std::map<std::string, TasteRegion>& item_regions) {
    if (recipe.empty()) fail(ErrorCode::BadProportions, "recipe has no ingredients");
    double total = 0.0;
    for (const auto& part : recipe) {
        if (!(part.proportion > 0.0)) {
            fail(ErrorCode::BadProportions, "proportion of '" + part.item_id + "' must be > 0");
        }
        total += part.proportion;
    }
    if (std::fabs(total - 1.0) > 1e-9) fail(ErrorCode::BadProportions, "proportions must sum to 1");

    TasteRegion r;
    r.lo.fill(0.0);
    r.hi.fill(0.0);
    r.centroid = TasteVector{};
    r.sample_count = 0;
    for (const auto& part : recipe) {
        auto it = item_regions.find(part.item_id);
        if (it == item_regions.end()) fail(ErrorCode::UnknownIngredient, "no taste region for '" + part.item_id + "'");
        const TasteRegion& ing = it->second;
        for (std::size_t c = 0; c < kChannels; ++c) {
            r.lo[c] += part.proportion * ing.lo[c];
            r.hi[c] += part.proportion * ing.hi[c];
            r.centroid[c] += part.proportion * ing.centroid[c];
        }
        r.sample_count += ing.sample_count;
    }
    for (std::size_t c = 0; c < kChannels; ++c) {
        r.lo[c] = clamp01(r.lo[c]);
        r.hi[c] = clamp01(r.hi[c]);
        r.centroid[c] = std::clamp(r.centroid[c], r.lo[c], r.hi[c]);
    }
    return r;
}

PreferenceProfile preference_profile(std::span<const std::pair<TasteVector, int>> rated, int rating_threshold,
                                     const ClusterOptions& options, std::string user_id) {
    if (options.clusters_max == 0) fail(ErrorCode::InvalidArgument, "clusters_max must be >= 1");
    struct Cluster {
        std::vector<TasteVector> members;
        TasteVector centroid;
        double mass = 0.0;
    };
    std::vector<Cluster> clusters;
    for (const auto& [v, rating] : rated) {
        if (rating < rating_threshold) continue;
        clusters.push_back(Cluster{{v}, v, static_cast<double>(rating - rating_threshold + 1)});
    }
    if (clusters.empty()) {
        fail(ErrorCode::NoRatedEvents, "no rated events at or above threshold " + std::to_string(rating_threshold));
    }
    const std::size_t built_from = clusters.size();

    const double cutoff_sq = options.cutoff * options.cutoff;
    kernels::PointBatch batch;
    std::vector<double> dist;
    while (clusters.size() > 1) {
        batch = kernels::PointBatch{};
        for (const auto& c : clusters) batch.push(c.centroid.v);
        double best = INFINITY;
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i + 1 < clusters.size(); ++i) {
            dist.assign(clusters.size(), 0.0);
            kernels::weighted_sq_distance(clusters[i].centroid.v, batch, kUnitWeights, dist);
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                if (dist[j] < best) {
                    best = dist[j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best > cutoff_sq && clusters.size() <= options.clusters_max) break;
        Cluster& a = clusters[bi];
        Cluster& b = clusters[bj];
        a.members.insert(a.members.end(), b.members.begin(), b.members.end());
        a.mass += b.mass;
        for (std::size_t c = 0; c < kChannels; ++c) {
            double s = 0.0;
            for (const auto& m : a.members) s += m[c];
            a.centroid[c] = s / static_cast<double>(a.members.size());
        }
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    double total_mass = 0.0;
    for (const auto& c : clusters) total_mass += c.mass;

    PreferenceProfile profile;
    profile.user_id = std::move(user_id);
    profile.built_from = built_from;
    profile.min_rating_threshold = rating_threshold;
    for (const auto& c : clusters) {
        profile.regions.push_back(WeightedRegion{item_region(std::span<const TasteVector>(c.members), 0.0),
                                                 c.mass / total_mass});
    }
    std::stable_sort(profile.regions.begin(), profile.regions.end(), [](const auto& x, const auto& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        return x.region.centroid.v < y.region.centroid.v;
    });
    return profile;
}

PreferenceProfile preference_profile(const Chronicle& chronicle, int rating_threshold, const ClusterOptions& options) {
    std::vector<std::pair<TasteVector, int>> rated;
    for (const auto& e : chronicle.events()) {
        const auto* f = std::get_if<FoodEvent>(&e);
        if (f && f->rating && f->taste) rated.emplace_back(f->taste->centroid, *f->rating);
    }
    if (rated.empty()) fail(ErrorCode::NoRatedEvents, "chronicle has no rated food events with a taste region");
    return preference_profile(rated, rating_threshold, options, chronicle.user_id());
}

double box_overlap(const TasteRegion& a, const TasteRegion& b, double eps) {
    kernels::BoxBatch batch;
    batch.push(b.lo, b.hi);
    double out = 0.0;
    kernels::box_overlap(to_box(a), batch, eps, std::span<double>(&out, 1));
    return out;
}

double preference_score(const PreferenceProfile& profile, const TasteRegion& region) {
    if (profile.regions.empty()) return 0.0;
    kernels::BoxBatch batch;
    for (const auto& wr : profile.regions) batch.push(wr.region.lo, wr.region.hi);
    std::vector<double> overlap(batch.size());
    kernels::box_overlap(to_box(region), batch, kOverlapEpsilon, overlap);
    std::vector<double> terms(overlap.size());
    for (std::size_t k = 0; k < terms.size(); ++k) terms[k] = profile.regions[k].weight * overlap[k];
    // Summing in sorted order makes the score independent of region order.
    std::sort(terms.begin(), terms.end());
    return clamp01(std::accumulate(terms.begin(), terms.end(), 0.0));
}

double taste_distance(const TasteVector& a, const TasteVector& b, const ChannelWeights& w) {
    double s = 0.0;
    for (std::size_t c = 0; c < kChannels; ++c) {
        if (w[c] < 0.0) fail(ErrorCode::InvalidArgument, "channel weights must be >= 0");
        const double d = a[c] - b[c];
        s += w[c] * d * d;
    }
    return std::sqrt(s);
}

std::vector<RankedSubstitute> substitute_search(const FoodCandidate& target, std::span<const FoodCandidate> candidates,
                                                const PreferenceProfile& profile, const std::string& health_key,
                                                std::size_t k) {
    if (candidates.empty()) fail(ErrorCode::NoCandidates, "no substitute candidates");
    if (!is_nutrition_field(health_key) && !target.nutrition.field(health_key)) {
        bool any = false;
        for (const auto& c : candidates) any = any || c.nutrition.field(health_key).has_value();
        if (!any) fail(ErrorCode::InvalidArgument, "unknown health key '" + health_key + "'");
    }
    const double line = preference_score(profile, target.region) - kSubstituteSlack;

    std::vector<RankedSubstitute> kept;
    for (const auto& c : candidates) {
        if (c.item_id == target.item_id) continue;
        const double score = preference_score(profile, c.region);
        if (score < line) continue;
        kept.push_back(RankedSubstitute{c.item_id, score, c.nutrition.field(health_key).value_or(INFINITY),
                                        taste_distance(c.region.centroid, target.region.centroid)});
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.health_value != b.health_value) return a.health_value < b.health_value;
        if (a.taste_distance != b.taste_distance) return a.taste_distance < b.taste_distance;
        return a.item_id < b.item_id;
    });
    if (kept.size() > k) kept.resize(k);
    return kept;
}

double TasteCalibration::spicy_from_scoville(double scoville) const {
    if (scoville <= 0.0) return 0.0;
    return clamp01(std::log10(1.0 + scoville) / std::log10(1.0 + scoville_max));
}

std::optional<double> TasteCalibration::anchor(const std::string& channel, const std::string& label) const {
    auto it = anchors.find(channel);
    if (it == anchors.end()) return std::nullopt;
    auto jt = it->second.find(label);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

TasteCalibration taste_calibration_from_json(const Json& j) {
    TasteCalibration cal;
    if (j.contains("spicy") && j["spicy"].contains("scoville_max")) cal.scoville_max = j["spicy"]["scoville_max"].get<double>();
    if (!(cal.scoville_max > 0.0)) fail(ErrorCode::SchemaError, "scoville_max must be > 0");
    if (j.contains("anchors")) {
        for (const auto& [channel, ladder] : j["anchors"].items()) {
            if (!channel_index(channel)) fail(ErrorCode::SchemaError, "unknown taste channel '" + channel + "'");
            for (const auto& step : ladder) {
                cal.anchors[channel][step.at("reference").get<std::string>()] = step.at("value").get<double>();
            }
        }
    }
    return cal;
}

TasteCalibration load_taste_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};
    try {
        return taste_calibration_from_json(Json::parse(in));
    } catch (const Json::exception& e) {
        fail(ErrorCode::SchemaError, path + ": " + e.what());
    }
}

TasteCatalog::TasteCatalog(std::vector<TasteSample> samples, std::map<std::string, std::vector<RecipeComponent>> recipes,
                           double trim_fraction)
    : recipes_(std::move(recipes)) {
    std::map<std::string, std::vector<TasteVector>> by_item;
    for (auto& s : samples) by_item[s.item_id].push_back(s.vector);
    for (const auto& [item, vs] : by_item) {
        item_regions_[item] = item_region(std::span<const TasteVector>(vs), trim_fraction);
    }
}

TasteCatalog TasteCatalog::load(const std::string& samples_path, const std::string& recipes_path,
                                const TasteCalibration& calibration, double trim_fraction) {
    std::vector<TasteSample> samples;
    std::map<std::string, std::vector<RecipeComponent>> recipes;
    std::string line;
    std::size_t n = 0;
    if (std::ifstream in(samples_path); in) {
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const Json j = Json::parse(line);
                TasteSample s;
                s.item_id = j.at("item_id").get<std::string>();
                s.source = j.value("source", std::string{});
                s.rater = j.value("rater", std::string{});
                const Json& t = j.at("taste");
                for (std::size_t c = 0; c < kChannels; ++c) {
                    const std::string name(kChannelNames[c]);
                    const Json& v = t.at(name);
                    if (v.is_string()) {
                        auto a = calibration.anchor(name, v.get<std::string>());
                        if (!a) fail(ErrorCode::SchemaError, "unknown " + name + " anchor '" + v.get<std::string>() + "'");
                        s.vector[c] = *a;
                    } else {
                        s.vector[c] = v.get<double>();
                    }
                }
                if (j.contains("scoville")) s.vector[Channel::Spicy] = calibration.spicy_from_scoville(j["scoville"].get<double>());
                if (!s.vector.valid()) fail(ErrorCode::SchemaError, "taste channels must be in [0, 1]");
                samples.push_back(std::move(s));
            } catch (const Json::exception& e) {
                fail(ErrorCode::ParseError, samples_path + " line " + std::to_string(n) + ": " + e.what());
            } catch (const Error& e) {
                fail(e.code(), samples_path + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    }
    n = 0;
    if (std::ifstream in(recipes_path); in) {
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const Json j = Json::parse(line);
                auto& parts = recipes[j.at("dish_id").get<std::string>()];
                for (const auto& ing : j.at("ingredients")) {
                    parts.push_back(RecipeComponent{ing.at("item_id").get<std::string>(), ing.at("proportion").get<double>()});
                }
            } catch (const Json::exception& e) {
                fail(ErrorCode::ParseError, recipes_path + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    }
    return TasteCatalog(std::move(samples), std::move(recipes), trim_fraction);
}

std::optional<TasteRegion> TasteCatalog::region_for(const std::string& id) const {
    if (auto it = item_regions_.find(id); it != item_regions_.end()) return it->second;
    if (auto it = recipes_.find(id); it != recipes_.end()) {
        try {
            return dish_region(it->second, item_regions_);
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

Json to_json(const PreferenceProfile& p) {
    Json regions = Json::array();
    for (const auto& wr : p.regions) regions.push_back(Json{{"region", to_json(wr.region)}, {"weight", num(wr.weight)}});
    return Json{{"built_from", p.built_from},
                {"min_rating_threshold", p.min_rating_threshold},
                {"regions", regions},
                {"user_id", p.user_id}};
}

PreferenceProfile preference_profile_from_json(const Json& j) {
    PreferenceProfile p;
    p.user_id = j.value("user_id", std::string{});
    p.built_from = j.value("built_from", std::size_t{0});
    p.min_rating_threshold = j.value("min_rating_threshold", 4);
    for (const auto& r : j.at("regions")) {
        p.regions.push_back(WeightedRegion{taste_region_from_json(r.at("region")), r.at("weight").get<double>()});
    }
    return p;
}

Json to_json(const RankedSubstitute& r) {
    return Json{{"health_value", std::isfinite(r.health_value) ? num(r.health_value) : Json(nullptr)},
                {"item_id", r.item_id},
                {"preference_score", num(r.preference_score)},
                {"taste_distance", num(r.taste_distance)}};
}

}  // namespace pfm
