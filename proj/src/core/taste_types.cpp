#include "pfm/taste_types.hpp"

#include "pfm/error.hpp"

namespace pfm {

std::optional<std::size_t> channel_index(std::string_view name) {
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (kChannelNames[i] == name) return i;
    }
    return std::nullopt;
}

bool TasteVector::valid() const {
    for (double x : v) {
        if (!(x >= 0.0 && x <= 1.0)) return false;
    }
    return true;
}

TasteRegion TasteRegion::point(const TasteVector& v) {
    TasteRegion r;
    r.lo = v.v;
    r.hi = v.v;
    r.sample_count = 1;
    r.centroid = v;
    return r;
}

bool TasteRegion::contains(const TasteVector& p, double tol) const {
    for (std::size_t c = 0; c < kChannels; ++c) {
        if (p[c] < lo[c] - tol || p[c] > hi[c] + tol) return false;
    }
    return true;
}

double TasteRegion::volume() const {
    double v = 1.0;
    for (std::size_t c = 0; c < kChannels; ++c) v *= hi[c] - lo[c];
    return v;
}

bool TasteRegion::valid() const {
    for (std::size_t c = 0; c < kChannels; ++c) {
        if (!(lo[c] <= hi[c]) || lo[c] < 0.0 || hi[c] > 1.0) return false;
    }
    return sample_count >= 1 && contains(centroid, 1e-12);
}

Json to_json(const TasteVector& v) {
    Json j = Json::object();
    for (std::size_t c = 0; c < kChannels; ++c) j[std::string(kChannelNames[c])] = num(v[c]);
    return j;
}

TasteVector taste_vector_from_json(const Json& j) {
    if (!j.is_object()) fail(ErrorCode::ParseError, "taste vector must be an object");
    TasteVector v;
    for (std::size_t c = 0; c < kChannels; ++c) {
        const std::string name(kChannelNames[c]);
        if (!j.contains(name) || !j[name].is_number()) {
            fail(ErrorCode::ParseError, "taste vector missing channel '" + name + "'");
        }
        v[c] = j[name].get<double>();
    }
    return v;
}

Json to_json(const TasteRegion& r) {
    Json channels = Json::object();
    for (std::size_t c = 0; c < kChannels; ++c) {
        channels[std::string(kChannelNames[c])] = Json::array({num(r.lo[c]), num(r.hi[c])});
    }
    return Json{{"centroid", to_json(r.centroid)},
                {"channels", channels},
                {"sample_count", r.sample_count}};
}

TasteRegion taste_region_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("channels") || !j["channels"].is_object()) {
        fail(ErrorCode::ParseError, "taste region needs a 'channels' object");
    }
    TasteRegion r;
    const Json& ch = j["channels"];
    for (std::size_t c = 0; c < kChannels; ++c) {
        const std::string name(kChannelNames[c]);
        if (!ch.contains(name) || !ch[name].is_array() || ch[name].size() != 2) {
            fail(ErrorCode::ParseError, "taste region channel '" + name + "' must be [lo, hi]");
        }
        r.lo[c] = ch[name][0].get<double>();
        r.hi[c] = ch[name][1].get<double>();
    }
    r.sample_count = j.value("sample_count", std::size_t{1});
    if (j.contains("centroid")) {
        r.centroid = taste_vector_from_json(j["centroid"]);
    } else {
        for (std::size_t c = 0; c < kChannels; ++c) r.centroid[c] = 0.5 * (r.lo[c] + r.hi[c]);
    }
    return r;
}

}  // namespace pfm
