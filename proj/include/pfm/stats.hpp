#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pfm::stats {

/// Empirical quantile of ascending-sorted data with linear interpolation
/// between order statistics: h = (n-1)p, x[floor h] + frac(h)(x[floor h+1] - x[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> xs);

/// Benjamini-Hochberg step-up adjusted p-values, same order as the input.
std::vector<double> benjamini_hochberg(std::span<const double> p);

struct PermutationResult {
    double observed = 0.0;  // mean(treated) - mean(control)
    double p_value = 1.0;   // two-sided, (1 + #{|perm| >= |obs|}) / (1 + n)
};

/// Label-permutation test on the difference in means.
PermutationResult permutation_test(std::span<const double> treated, std::span<const double> control,
                                   std::size_t n_permutations, std::uint64_t seed);

/// Effect of each bootstrap resample (treated and control resampled
/// independently with replacement).
std::vector<double> bootstrap_effects(std::span<const double> treated, std::span<const double> control,
                                      std::size_t n_resamples, std::uint64_t seed);

}  // namespace pfm::stats
