#include <algorithm>
#include <cmath>
#include <numeric>

#include "picsrl/bench.hpp"

namespace picsrl {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double permutation_test(const std::vector<double>& a, const std::vector<double>& b, int resamples, std::uint64_t seed) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("permutation test needs at least two values per sample");
    if (resamples < 1000) throw std::invalid_argument("permutation test needs at least 1000 resamples");

    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
    if (*lo == *hi) return 1.0;

    const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    const auto diff_of = [&](double sum_a) { return std::abs(sum_a / na - (total - sum_a) / nb); };
    const double observed = diff_of(std::accumulate(a.begin(), a.end(), 0.0));
    // Relative slack so permutations that reproduce the observed split count as ties.
    const double slack = 1e-12 * std::max(1.0, std::abs(*hi) + std::abs(*lo));

    Rng rng(seed);
    long extreme = 0;
    for (int r = 0; r < resamples; ++r) {
        // Partial Fisher-Yates: only the first |a| slots are needed.
        double sum_a = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::size_t j = i + uniform_index(rng, pooled.size() - i);
            std::swap(pooled[i], pooled[j]);
            sum_a += pooled[i];
        }
        if (diff_of(sum_a) >= observed - slack) ++extreme;
    }
    return static_cast<double>(1 + extreme) / static_cast<double>(resamples + 1);
}

}  // namespace picsrl
