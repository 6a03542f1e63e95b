#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picsrl/env.hpp"
#include "picsrl/nn.hpp"

namespace picsrl {

// ---------------------------------------------------------------------------
// Heuristic policies. All break ties toward the lowest station index and
// throw std::invalid_argument when every station is already visited.

enum class BaselineKind { random, stratified };
enum class GreedyVariant { intensity, risk, spatial };

/// Lloyd's k-means with k-means++ seeding; returns a cluster label per row.
std::vector<int> kmeans_labels(const Eigen::MatrixX2d& coords, int k, std::uint64_t seed, int max_iterations = 100);

/// random: uniform over unvisited. stratified: k-means (k = budget) on the
/// station coordinates, then a uniform pick inside cluster (step mod k),
/// moving round-robin past exhausted clusters.
Eigen::Index baseline_select(const BeliefState& state, BaselineKind kind, const Eigen::MatrixX2d& coords, Rng& rng,
                             std::uint64_t kmeans_seed = 0);

/// P(value >= threshold) under Normal(mu, sigma); an indicator when sigma is 0.
double exceedance_probability(double mu, double sigma, double threshold);

/// intensity: argmax mu. risk: argmax exceedance probability. spatial:
/// farthest point from the visited set (first pick nearest the centroid).
Eigen::Index greedy_select(const BeliefState& state, GreedyVariant variant, const Eigen::MatrixX2d& coords,
                           double threshold);

/// argmax over unvisited of mu + exploration_beta * sigma.
Eigen::Index ucb_select(const BeliefState& state, double exploration_beta);

/// argmax over unvisited entries of `scores`.
Eigen::Index masked_argmax(const Eigen::VectorXd& scores, const std::vector<bool>& visited);

// ---------------------------------------------------------------------------
// Deep Q-learning with action masking.

struct DqnHyper {
    int episodes = 3000;
    double discount = 0.99;
    std::size_t replay_capacity = 10000;
    Eigen::Index batch_size = 64;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay_fraction = 0.5;  // share of episodes spent annealing
    int target_sync_interval = 500;       // gradient updates between syncs
    std::vector<Eigen::Index> hidden{64, 64};
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    double learning_rate = 5e-4;
    bool dueling = false;

    void validate() const;
};

struct EnvConfig {
    Eigen::Index budget = 3;
    RewardWeights weights{};
};

struct QPolicy {
    nn::Network q_net;
    nn::Network target_net;
    Eigen::Index stations = 0;
    DqnHyper hyper;
    long updates = 0;
};

/// Q-values for every station (dueling heads already combined).
Eigen::MatrixXd q_values(const nn::Network& net, const Eigen::MatrixXd& encoded_states, bool dueling);
Eigen::VectorXd q_values(const QPolicy& policy, const BeliefState& state);

/// Untrained policy: 3N -> hidden -> N (or N+1 with dueling heads).
QPolicy make_q_policy(Eigen::Index stations, const DqnHyper& hyper, std::uint64_t seed);

using SceneGenerator = std::function<Scene(std::uint64_t seed)>;
using BeliefModel = std::function<BeliefPrediction(const Scene&)>;

/// Epsilon-greedy over masked Q-values, uniform replay, TD targets from a
/// periodically synced target network with visited actions excluded from the
/// bootstrap max. Episode e simulates the scene `generate(derive_seed(seed, e))`.
/// Throws NumericalError (naming the episode) on a non-finite TD loss.
QPolicy dqn_train(const SceneGenerator& generate, const BeliefModel& belief, const EnvConfig& env,
                  const DqnHyper& hyper, std::uint64_t seed);

Eigen::Index dqn_select(const QPolicy& policy, const BeliefState& state);

// Policy file: both networks embedded in a JSON manifest with the hyperparameters.
std::string policy_to_json(const QPolicy& policy);
QPolicy policy_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Exhaustive oracle

struct OracleResult {
    std::vector<Eigen::Index> best_subset;
    double best_rmse = 0.0;
    std::uint64_t evaluated_count = 0;
};

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Reconstruction RMSE of every k-subset in lexicographic order; the first
/// (lexicographically smallest) minimizer wins. Throws InfeasibleError when
/// C(N, k) exceeds `cap`.
OracleResult exhaustive_oracle(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget,
                               std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace picsrl
