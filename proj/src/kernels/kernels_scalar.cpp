#include "kernels_impl.hpp"

#include <algorithm>

namespace pfm::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double gather_sum(const double* v, const std::uint32_t* idx, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[idx[i]];
    return s;
}

void weighted_sq_distance(const double* q, const double* const* cols, const double* w,
                          std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < kDims; ++c) {
            const double d = q[c] - cols[c][i];
            s = s + w[c] * (d * d);
        }
        out[i] = s;
    }
}

void box_overlap(const double* qlo, const double* qhi, const double* const* lo,
                 const double* const* hi, std::size_t n, double eps, double* out) {
    const double half = 0.5 * eps;
    double ql[kDims];
    double qh[kDims];
    double qvol = 1.0;
    for (std::size_t c = 0; c < kDims; ++c) {
        ql[c] = qlo[c];
        qh[c] = qhi[c];
        if (qh[c] - ql[c] < eps) {
            const double mid = (ql[c] + qh[c]) * 0.5;
            ql[c] = mid - half;
            qh[c] = mid + half;
        }
        qvol = qvol * (qh[c] - ql[c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double inter = 1.0;
        double bvol = 1.0;
        for (std::size_t c = 0; c < kDims; ++c) {
            double l = lo[c][i];
            double h = hi[c][i];
            if (h - l < eps) {
                const double mid = (l + h) * 0.5;
                l = mid - half;
                h = mid + half;
            }
            bvol = bvol * (h - l);
            const double w = std::min(qh[c], h) - std::max(ql[c], l);
            inter = inter * (w > 0.0 ? w : 0.0);
        }
        out[i] = inter / std::min(qvol, bvol);
    }
}

}  // namespace pfm::kernels::scalar
