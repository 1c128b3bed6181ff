#pragma once

#include "pfm/kernels.hpp"

namespace pfm::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double gather_sum(const double* v, const std::uint32_t* idx, std::size_t n);
void weighted_sq_distance(const double* q, const double* const* cols, const double* w,
                          std::size_t n, double* out);
void box_overlap(const double* qlo, const double* qhi, const double* const* lo,
                 const double* const* hi, std::size_t n, double eps, double* out);
}  // namespace scalar

#if defined(PFM_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double gather_sum(const double* v, const std::uint32_t* idx, std::size_t n);
void weighted_sq_distance(const double* q, const double* const* cols, const double* w,
                          std::size_t n, double* out);
void box_overlap(const double* qlo, const double* qhi, const double* const* lo,
                 const double* const* hi, std::size_t n, double eps, double* out);
}  // namespace avx2
#endif

}  // namespace pfm::kernels
