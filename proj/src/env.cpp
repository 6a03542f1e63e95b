#include "picsrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace picsrl {

void RewardWeights::validate() const {
    if (!(std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma)))
        throw std::invalid_argument("reward weights must be finite");
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0)
        throw std::invalid_argument("at least one reward weight must be non-zero");
}

bool BeliefState::has_unvisited() const {
    return std::find(visited.begin(), visited.end(), false) != visited.end();
}

Eigen::VectorXd BeliefState::encode() const {
    const Eigen::Index n = size();
    Eigen::VectorXd v(3 * n);
    v.head(n) = mu;
    v.segment(n, n) = sigma;
    for (Eigen::Index i = 0; i < n; ++i) v(2 * n + i) = visited[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    return v;
}

BeliefState reset(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget) {
    const Eigen::Index n = scene.station_count();
    if (belief.mu.size() != n || belief.sigma.size() != n)
        throw std::invalid_argument("belief size differs from station count");
    if (budget < 1 || budget > n)
        throw std::invalid_argument("budget " + std::to_string(budget) + " must lie in [1, " + std::to_string(n) + "]");
    BeliefState s;
    s.mu = belief.mu;
    s.sigma = belief.sigma;
    s.visited.assign(static_cast<std::size_t>(n), false);
    s.budget = budget;
    return s;
}

BeliefState reset(const Scene& scene, const BeliefEnsemble& ensemble, Eigen::Index budget) {
    return reset(scene, belief_predict(ensemble, scene), budget);
}

RewardBreakdown reward_of(const BeliefState& state, Eigen::Index action, const Scene& scene,
                          const RewardWeights& weights) {
    const auto& coords = scene.field.station_coords;
    RewardBreakdown r;
    r.info = -std::abs(scene.field.truth(action) - state.mu(action));
    r.uncert = state.sigma(action);
    if (state.selected.empty()) {
        r.spatial = scene.field.diameter();
    } else {
        double nearest = std::numeric_limits<double>::infinity();
        for (const Eigen::Index s : state.selected)
            nearest = std::min(nearest, (coords.row(action) - coords.row(s)).norm());
        r.spatial = nearest;
    }
    r.total = weights.alpha * r.info + weights.beta * r.uncert + weights.gamma * r.spatial;
    return r;
}

StepResult step(const BeliefState& state, Eigen::Index action, const Scene& scene, const RewardWeights& weights) {
    if (state.done()) throw std::invalid_argument("sampling budget exhausted");
    if (action < 0 || action >= state.size()) throw std::invalid_argument("action out of range");
    if (state.visited[static_cast<std::size_t>(action)])
        throw std::invalid_argument("station " + std::to_string(action) + " already visited");

    StepResult out;
    out.reward = reward_of(state, action, scene, weights);
    out.next = state;
    out.next.visited[static_cast<std::size_t>(action)] = true;
    out.next.selected.push_back(action);
    ++out.next.step;
    out.done = out.next.done();
    return out;
}

Eigen::VectorXd reconstruct(const BeliefState& state, const Scene& scene) {
    Eigen::VectorXd obs(static_cast<Eigen::Index>(state.selected.size()));
    for (std::size_t k = 0; k < state.selected.size(); ++k)
        obs(static_cast<Eigen::Index>(k)) = scene.field.truth(state.selected[k]);
    return reconstruct_field(scene.field.station_coords, state.mu, state.selected, obs);
}

double rmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
    return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double EpisodeReport::episode_return() const {
    double total = 0.0;
    for (const auto& r : rewards) total += r.total;
    return total;
}

EpisodeReport episode_metrics(const BeliefState& final_state, const Scene& scene,
                              std::vector<RewardBreakdown> rewards) {
    const auto& truth = scene.field.truth;
    const double threshold = scene.field.bloom_threshold;
    EpisodeReport report;
    report.actions = final_state.selected;
    report.rewards = std::move(rewards);
    report.reconstruction_rmse = rmse(reconstruct(final_state, scene), truth);
    report.bloom_present = (truth.array() >= threshold).any();
    report.bloom_detected =
        report.bloom_present && std::any_of(report.actions.begin(), report.actions.end(),
                                            [&](Eigen::Index a) { return truth(a) >= threshold; });
    return report;
}

EpisodeReport run_episode(const Scene& scene, const BeliefPrediction& belief, Eigen::Index budget,
                          const RewardWeights& weights, const Selector& select) {
    BeliefState state = reset(scene, belief, budget);
    std::vector<RewardBreakdown> rewards;
    while (!state.done()) {
        StepResult r = step(state, select(state), scene, weights);
        rewards.push_back(r.reward);
        state = std::move(r.next);
    }
    return episode_metrics(state, scene, std::move(rewards));
}

void write_trace_header(std::ostream& out) {
    out << "seed,policy,step,action,r_info,r_uncert,r_spatial,reward\n";
}

void write_trace_rows(std::ostream& out, std::uint64_t seed, const std::string& policy, const EpisodeReport& report) {
    char buf[256];
    for (std::size_t t = 0; t < report.actions.size(); ++t) {
        const auto& r = report.rewards[t];
        std::snprintf(buf, sizeof buf, "%llu,%s,%zu,%lld,%.10g,%.10g,%.10g,%.10g\n",
                      static_cast<unsigned long long>(seed), policy.c_str(), t,
                      static_cast<long long>(report.actions[t]), r.info, r.uncert, r.spatial, r.total);
        out << buf;
    }
}

}  // namespace picsrl
