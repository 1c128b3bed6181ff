#pragma once

#include "pfm/json.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace pfm {

enum class Channel : std::size_t { Umami = 0, Salty, Sweet, Spicy, Sour, Bitter };

inline constexpr std::size_t kChannels = 6;
inline constexpr std::array<std::string_view, kChannels> kChannelNames = {
    "umami", "salty", "sweet", "spicy", "sour", "bitter"};

std::optional<std::size_t> channel_index(std::string_view name);

struct TasteVector {
    std::array<double, kChannels> v{};

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    double& operator[](Channel c) { return v[static_cast<std::size_t>(c)]; }
    double operator[](Channel c) const { return v[static_cast<std::size_t>(c)]; }

    bool valid() const;
    bool operator==(const TasteVector&) const = default;
};

// Axis-aligned box in taste space.
struct TasteRegion {
    std::array<double, kChannels> lo{};
    std::array<double, kChannels> hi{};
    std::size_t sample_count = 1;
    TasteVector centroid;

    static TasteRegion point(const TasteVector& v);

    bool contains(const TasteVector& p, double tol = 0.0) const;
    double volume() const;
    bool valid() const;
    bool operator==(const TasteRegion&) const = default;
};

Json to_json(const TasteVector& v);
TasteVector taste_vector_from_json(const Json& j);
Json to_json(const TasteRegion& r);
TasteRegion taste_region_from_json(const Json& j);

}  // namespace pfm
