#include "pfm/stats.hpp"

#include "pfm/error.hpp"
#include "pfm/kernels.hpp"
#include "pfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pfm::stats {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of empty data");
    if (p <= 0.0) return sorted.front();
    if (p >= 1.0) return sorted.back();
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(i);
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<double> benjamini_hochberg(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adjusted(m, 1.0);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double scaled = p[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, scaled);
        adjusted[order[r]] = std::min(1.0, running);
    }
    return adjusted;
}

PermutationResult permutation_test(std::span<const double> treated, std::span<const double> control,
                                   std::size_t n_permutations, std::uint64_t seed) {
    const std::size_t nt = treated.size();
    const std::size_t nc = control.size();
    if (nt == 0 || nc == 0) fail(ErrorCode::InvalidArgument, "permutation test needs both arms");

    std::vector<double> pooled;
    pooled.reserve(nt + nc);
    pooled.insert(pooled.end(), treated.begin(), treated.end());
    pooled.insert(pooled.end(), control.begin(), control.end());
    const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);

    PermutationResult out;
    out.observed = mean(treated) - mean(control);
    const double obs = std::fabs(out.observed);
    // Ties against the observed statistic are counted as at least as extreme.
    const double tol = 1e-9 * std::max(1.0, obs);

    std::vector<double> mask(nt + nc, 0.0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(nt), 1.0);
    Rng rng(seed);
    std::size_t extreme = 0;
    for (std::size_t k = 0; k < n_permutations; ++k) {
        rng.shuffle(mask.begin(), mask.end());
        const double st = kernels::dot(pooled, mask);
        const double diff = st / static_cast<double>(nt) - (total - st) / static_cast<double>(nc);
        if (std::fabs(diff) >= obs - tol) ++extreme;
    }
    out.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + n_permutations);
    return out;
}

std::vector<double> bootstrap_effects(std::span<const double> treated, std::span<const double> control,
                                      std::size_t n_resamples, std::uint64_t seed) {
    const std::size_t nt = treated.size();
    const std::size_t nc = control.size();
    if (nt == 0 || nc == 0) fail(ErrorCode::InvalidArgument, "bootstrap needs both arms");
    Rng rng(seed);
    std::vector<std::uint32_t> it(nt);
    std::vector<std::uint32_t> ic(nc);
    std::vector<double> out;
    out.reserve(n_resamples);
    for (std::size_t k = 0; k < n_resamples; ++k) {
        for (auto& i : it) i = static_cast<std::uint32_t>(rng.index(nt));
        for (auto& i : ic) i = static_cast<std::uint32_t>(rng.index(nc));
        const double mt = kernels::gather_sum(treated, it) / static_cast<double>(nt);
        const double mc = kernels::gather_sum(control, ic) / static_cast<double>(nc);
        out.push_back(mt - mc);
    }
    return out;
}

}  // namespace pfm::stats
