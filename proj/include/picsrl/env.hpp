#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picsrl/belief.hpp"
#include "picsrl/spectra.hpp"

namespace picsrl {

/// Coefficients of r = alpha*r_info + beta*r_uncert + gamma*r_spatial.
struct RewardWeights {
    double alpha = 1.0;
    double beta = 0.5;
    double gamma = 0.25;

    void validate() const;
    friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct RewardBreakdown {
    double info = 0.0;     // -|truth - mu|
    double uncert = 0.0;   // sigma
    double spatial = 0.0;  // min distance to earlier picks (scene diameter first)
    double total = 0.0;
};

/// RL state: belief mean/uncertainty, visited mask and step counter.
struct BeliefState {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
    std::vector<bool> visited;
    std::vector<Eigen::Index> selected;  // in pick order
    Eigen::Index step = 0;
    Eigen::Index budget = 0;

    [[nodiscard]] Eigen::Index size() const { return mu.size(); }
    [[nodiscard]] bool done() const { return step >= budget; }
    [[nodiscard]] bool has_unvisited() const;
    /// [mu | sigma | mask], length 3N.
    [[nodiscard]] Eigen::VectorXd encode() const;
};

struct StepResult {
    BeliefState next;
    RewardBreakdown reward;
    bool done = false;
};

/// Throws std::invalid_argument if the budget exceeds the station count.
BeliefState reset(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget);
BeliefState reset(const Scene& scene, const BeliefEnsemble& ensemble, Eigen::Index budget);

RewardBreakdown reward_of(const BeliefState& state, Eigen::Index action, const Scene& scene,
                          const RewardWeights& weights);
/// Throws std::invalid_argument on a visited action or exhausted budget.
StepResult step(const BeliefState& state, Eigen::Index action, const Scene& scene, const RewardWeights& weights);

/// Residual-corrected field: mu(i) + sum_k lambda_k(i) (obs_k - mu(s_k)), with
/// inverse-distance-squared weights normalized to one. Visited stations
/// return their observation exactly.
template <typename CoordsDerived, typename MuDerived>
Eigen::VectorXd reconstruct_field(const Eigen::MatrixBase<CoordsDerived>& coords, const Eigen::MatrixBase<MuDerived>& mu,
                                  const std::vector<Eigen::Index>& sites, const Eigen::VectorXd& observations) {
    const Eigen::Index n = mu.size();
    const auto k = static_cast<Eigen::Index>(sites.size());
    if (observations.size() != k) throw std::invalid_argument("one observation per visited site is required");
    Eigen::VectorXd estimate = mu;
    if (k == 0) return estimate;

    Eigen::VectorXd residual(k);
    for (Eigen::Index j = 0; j < k; ++j) residual(j) = observations(j) - mu(sites[static_cast<std::size_t>(j)]);

    Eigen::VectorXd lambda(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index exact = -1;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double d2 = (coords.row(i) - coords.row(sites[static_cast<std::size_t>(j)])).squaredNorm();
            if (d2 == 0.0) {
                exact = j;
                break;
            }
            lambda(j) = 1.0 / d2;
        }
        if (exact >= 0) {
            estimate(i) = observations(exact);
            continue;
        }
        estimate(i) += lambda.dot(residual) / lambda.sum();
    }
    return estimate;
}

/// Reconstruction from the state's visited stations, observing scene truth there.
Eigen::VectorXd reconstruct(const BeliefState& state, const Scene& scene);

double rmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

struct EpisodeReport {
    std::vector<Eigen::Index> actions;
    std::vector<RewardBreakdown> rewards;
    double reconstruction_rmse = 0.0;
    bool bloom_present = false;
    bool bloom_detected = false;

    [[nodiscard]] double episode_return() const;
};

EpisodeReport episode_metrics(const BeliefState& final_state, const Scene& scene,
                              std::vector<RewardBreakdown> rewards);

using Selector = std::function<Eigen::Index(const BeliefState&)>;

/// Runs reset + `budget` steps driven by `select`.
EpisodeReport run_episode(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget,
                          const RewardWeights& weights, const Selector& select);

/// CSV trace rows: seed,policy,step,action,r_info,r_uncert,r_spatial,reward
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, std::uint64_t seed, const std::string& policy, const EpisodeReport& report);

}  // namespace picsrl
