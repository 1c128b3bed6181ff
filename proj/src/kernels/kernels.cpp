#include "kernels_impl.hpp"

#include "pfm/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace pfm::kernels {

namespace {

constexpr Table kScalar{scalar::dot, scalar::gather_sum, scalar::weighted_sq_distance, scalar::box_overlap};
#if defined(PFM_HAVE_AVX2)
constexpr Table kAvx2{avx2::dot, avx2::gather_sum, avx2::weighted_sq_distance, avx2::box_overlap};
#endif

Isa detect() {
    if (const char* env = std::getenv("PFM_SIMD")) {
        const std::string v = env;
        if (v == "scalar") return Isa::Scalar;
        if (v == "avx2" && supported(Isa::Avx2)) return Isa::Avx2;
    }
    return supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "scalar";
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(PFM_HAVE_AVX2)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!supported(isa)) fail(ErrorCode::InvalidArgument, "ISA " + std::string(to_string(isa)) + " not supported");
    active().store(isa, std::memory_order_relaxed);
}

const Table& table(Isa isa) {
#if defined(PFM_HAVE_AVX2)
    if (isa == Isa::Avx2) return kAvx2;
#endif
    (void)isa;
    return kScalar;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorCode::InvalidArgument, "dot: length mismatch");
    return table(active_isa()).dot(a.data(), b.data(), a.size());
}

double gather_sum(std::span<const double> values, std::span<const std::uint32_t> idx) {
    return table(active_isa()).gather_sum(values.data(), idx.data(), idx.size());
}

void weighted_sq_distance(const std::array<double, kDims>& q, const PointBatch& points,
                          const std::array<double, kDims>& w, std::span<double> out) {
    if (out.size() != points.size()) fail(ErrorCode::InvalidArgument, "weighted_sq_distance: output size");
    const double* cols[kDims];
    for (std::size_t c = 0; c < kDims; ++c) cols[c] = points.x[c].data();
    table(active_isa()).weighted_sq_distance(q.data(), cols, w.data(), points.size(), out.data());
}

void box_overlap(const Box& q, const BoxBatch& boxes, double eps, std::span<double> out) {
    if (out.size() != boxes.size()) fail(ErrorCode::InvalidArgument, "box_overlap: output size");
    const double* lo[kDims];
    const double* hi[kDims];
    for (std::size_t c = 0; c < kDims; ++c) {
        lo[c] = boxes.lo[c].data();
        hi[c] = boxes.hi[c].data();
    }
    table(active_isa()).box_overlap(q.lo.data(), q.hi.data(), lo, hi, boxes.size(), eps, out.data());
}

}  // namespace pfm::kernels
