// Compiled with -mavx2 only; no FMA, so per-lane arithmetic matches the
// scalar reference exactly.
#include "kernels_impl.hpp"

#include <immintrin.h>

#include <algorithm>

namespace pfm::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double gather_sum(const double* v, const std::uint32_t* idx, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
        acc = _mm256_add_pd(acc, _mm256_i32gather_pd(v, vi, 8));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += v[idx[i]];
    return s;
}

void weighted_sq_distance(const double* q, const double* const* cols, const double* w,
                          std::size_t n, double* out) {
    __m256d qv[kDims];
    __m256d wv[kDims];
    for (std::size_t c = 0; c < kDims; ++c) {
        qv[c] = _mm256_set1_pd(q[c]);
        wv[c] = _mm256_set1_pd(w[c]);
    }
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d s = _mm256_setzero_pd();
        for (std::size_t c = 0; c < kDims; ++c) {
            const __m256d d = _mm256_sub_pd(qv[c], _mm256_loadu_pd(cols[c] + i));
            s = _mm256_add_pd(s, _mm256_mul_pd(wv[c], _mm256_mul_pd(d, d)));
        }
        _mm256_storeu_pd(out + i, s);
    }
    if (i < n) {
        const double* shifted[kDims];
        for (std::size_t c = 0; c < kDims; ++c) shifted[c] = cols[c] + i;
        scalar::weighted_sq_distance(q, shifted, w, n - i, out + i);
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
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d halfv = _mm256_set1_pd(half);
    const __m256d pointfive = _mm256_set1_pd(0.5);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d qvolv = _mm256_set1_pd(qvol);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d inter = _mm256_set1_pd(1.0);
        __m256d bvol = _mm256_set1_pd(1.0);
        for (std::size_t c = 0; c < kDims; ++c) {
            __m256d l = _mm256_loadu_pd(lo[c] + i);
            __m256d h = _mm256_loadu_pd(hi[c] + i);
            const __m256d narrow = _mm256_cmp_pd(_mm256_sub_pd(h, l), epsv, _CMP_LT_OQ);
            const __m256d mid = _mm256_mul_pd(_mm256_add_pd(l, h), pointfive);
            l = _mm256_blendv_pd(l, _mm256_sub_pd(mid, halfv), narrow);
            h = _mm256_blendv_pd(h, _mm256_add_pd(mid, halfv), narrow);
            bvol = _mm256_mul_pd(bvol, _mm256_sub_pd(h, l));
            const __m256d w = _mm256_sub_pd(_mm256_min_pd(_mm256_set1_pd(qh[c]), h),
                                            _mm256_max_pd(_mm256_set1_pd(ql[c]), l));
            const __m256d positive = _mm256_cmp_pd(w, zero, _CMP_GT_OQ);
            inter = _mm256_mul_pd(inter, _mm256_and_pd(w, positive));
        }
        _mm256_storeu_pd(out + i, _mm256_div_pd(inter, _mm256_min_pd(qvolv, bvol)));
    }
    if (i < n) {
        const double* slo[kDims];
        const double* shi[kDims];
        for (std::size_t c = 0; c < kDims; ++c) {
            slo[c] = lo[c] + i;
            shi[c] = hi[c] + i;
        }
        scalar::box_overlap(qlo, qhi, slo, shi, n - i, eps, out + i);
    }
}

}  // namespace pfm::kernels::avx2
