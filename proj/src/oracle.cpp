#include <limits>
#include <numeric>

#include "picsrl/agents.hpp"

namespace picsrl {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
        if (result > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(result);
}

OracleResult exhaustive_oracle(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget,
                               std::uint64_t cap) {
    const Eigen::Index n = scene.station_count();
    if (budget < 1 || budget > n) throw std::invalid_argument("budget must lie in [1, N]");
    if (belief.mu.size() != n) throw std::invalid_argument("belief size differs from station count");
    const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(budget));
    if (total > cap)
        throw InfeasibleError("exhaustive search over C(" + std::to_string(n) + "," + std::to_string(budget) +
                              ") = " + std::to_string(total) + " subsets exceeds the cap of " + std::to_string(cap));

    const auto& coords = scene.field.station_coords;
    const auto& truth = scene.field.truth;
    std::vector<Eigen::Index> subset(static_cast<std::size_t>(budget));
    std::iota(subset.begin(), subset.end(), Eigen::Index{0});
    Eigen::VectorXd obs(budget);

    OracleResult best;
    best.best_rmse = std::numeric_limits<double>::infinity();
    while (true) {
        for (Eigen::Index j = 0; j < budget; ++j) obs(j) = truth(subset[static_cast<std::size_t>(j)]);
        const double err = rmse(reconstruct_field(coords, belief.mu, subset, obs), truth);
        ++best.evaluated_count;
        if (err < best.best_rmse) {
            best.best_rmse = err;
            best.best_subset = subset;
        }
        // Next combination in lexicographic order.
        Eigen::Index i = budget - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - budget + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (Eigen::Index j = i + 1; j < budget; ++j)
            subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

}  // namespace picsrl
