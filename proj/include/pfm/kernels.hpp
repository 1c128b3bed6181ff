#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference and, where
// the target allows it, an AVX2 variant; the active variant is picked once
// at runtime from CPUID (override with PFM_SIMD=scalar|avx2).
//
// box_overlap and weighted_sq_distance evaluate the same operation sequence
// per lane as the scalar loop, so both variants agree bit for bit. dot and
// gather_sum reassociate the sum and agree to rounding.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace pfm::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool supported(Isa isa);
Isa active_isa();
/// Throws Error(InvalidArgument) if the ISA is not supported on this CPU.
void set_active_isa(Isa isa);

inline constexpr std::size_t kDims = 6;

// Structure-of-arrays batch of axis-aligned boxes.
struct BoxBatch {
    std::array<std::vector<double>, kDims> lo;
    std::array<std::vector<double>, kDims> hi;

    std::size_t size() const { return lo[0].size(); }
    void push(const std::array<double, kDims>& l, const std::array<double, kDims>& h) {
        for (std::size_t c = 0; c < kDims; ++c) {
            lo[c].push_back(l[c]);
            hi[c].push_back(h[c]);
        }
    }
};

// Structure-of-arrays batch of points.
struct PointBatch {
    std::array<std::vector<double>, kDims> x;

    std::size_t size() const { return x[0].size(); }
    void push(const std::array<double, kDims>& p) {
        for (std::size_t c = 0; c < kDims; ++c) x[c].push_back(p[c]);
    }
};

struct Box {
    std::array<double, kDims> lo{};
    std::array<double, kDims> hi{};
};

double dot(std::span<const double> a, std::span<const double> b);

/// Sum of values[idx[i]].
double gather_sum(std::span<const double> values, std::span<const std::uint32_t> idx);

/// out[i] = sum_c w[c] * (q[c] - points[c][i])^2
void weighted_sq_distance(const std::array<double, kDims>& q, const PointBatch& points,
                          const std::array<double, kDims>& w, std::span<double> out);

/// out[i] = vol(q ∩ box_i) / min(vol(q), vol(box_i)), with every channel
/// narrower than eps widened symmetrically to eps first.
void box_overlap(const Box& q, const BoxBatch& boxes, double eps, std::span<double> out);

// Per-ISA entry points, exposed for equivalence tests.
struct Table {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*gather_sum)(const double* v, const std::uint32_t* idx, std::size_t n);
    void (*weighted_sq_distance)(const double* q, const double* const* cols, const double* w,
                                 std::size_t n, double* out);
    void (*box_overlap)(const double* qlo, const double* qhi, const double* const* lo,
                        const double* const* hi, std::size_t n, double eps, double* out);
};

const Table& table(Isa isa);

}  // namespace pfm::kernels
