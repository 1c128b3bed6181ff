#include <doctest.h>

#include "pfm/kernels.hpp"
#include "pfm/rng.hpp"

#include <cmath>
#include <vector>

using namespace pfm;
using namespace pfm::kernels;

TEST_CASE("AVX2 kernels agree with the scalar reference") {
    if (!supported(Isa::Avx2)) {
        MESSAGE("AVX2 not available; skipping");
        return;
    }
    const Table& s = table(Isa::Scalar);
    const Table& v = table(Isa::Avx2);
    Rng rng(51);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng.index(70);  // covers tails shorter than a vector
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = rng.uniform(-1, 1);
        }
        const double ds = s.dot(a.data(), b.data(), n);
        CHECK(std::abs(ds - v.dot(a.data(), b.data(), n)) <= 1e-12 * (1 + std::abs(ds)));

        std::vector<std::uint32_t> idx(n);
        for (auto& i : idx) i = static_cast<std::uint32_t>(rng.index(std::max<std::size_t>(n, 1)));
        if (n > 0) {
            const double gs = s.gather_sum(a.data(), idx.data(), n);
            CHECK(std::abs(gs - v.gather_sum(a.data(), idx.data(), n)) <= 1e-12 * (1 + std::abs(gs)));
        }

        std::array<std::vector<double>, kDims> lo, hi, pts;
        double q[kDims], qlo[kDims], qhi[kDims], w[kDims];
        for (std::size_t c = 0; c < kDims; ++c) {
            lo[c].resize(n);
            hi[c].resize(n);
            pts[c].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                lo[c][i] = rng.uniform(0, 0.9);
                hi[c][i] = lo[c][i] + (rng.bernoulli(0.3) ? rng.uniform(0, 0.005) : rng.uniform(0, 0.4));
                pts[c][i] = rng.uniform();
            }
            q[c] = rng.uniform();
            qlo[c] = rng.uniform(0, 0.8);
            qhi[c] = qlo[c] + rng.uniform(0, 0.3);
            w[c] = rng.uniform(0, 2);
        }
        const double* lop[kDims];
        const double* hip[kDims];
        const double* ptp[kDims];
        for (std::size_t c = 0; c < kDims; ++c) {
            lop[c] = lo[c].data();
            hip[c] = hi[c].data();
            ptp[c] = pts[c].data();
        }
        std::vector<double> os(n), ov(n);
        s.box_overlap(qlo, qhi, lop, hip, n, 0.01, os.data());
        v.box_overlap(qlo, qhi, lop, hip, n, 0.01, ov.data());
        CHECK(os == ov);  // bit-identical by construction
        s.weighted_sq_distance(q, ptp, w, n, os.data());
        v.weighted_sq_distance(q, ptp, w, n, ov.data());
        CHECK(os == ov);
    }
}

TEST_CASE("active ISA can be forced") {
    const Isa before = active_isa();
    set_active_isa(Isa::Scalar);
    CHECK(active_isa() == Isa::Scalar);
    if (supported(before)) set_active_isa(before);
    CHECK(to_string(Isa::Scalar) == "scalar");
}
