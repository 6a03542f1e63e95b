#include "picsrl/agents.hpp"

#include <cmath>
#include <limits>

namespace picsrl {

namespace {

void require_unvisited(const BeliefState& state) {
    if (!state.has_unvisited()) throw std::invalid_argument("every station has already been visited");
}

}  // namespace

Eigen::Index masked_argmax(const Eigen::VectorXd& scores, const std::vector<bool>& visited) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (visited[static_cast<std::size_t>(i)]) continue;
        // NaN scores never win over a finite one.
        if (best < 0 || scores(i) > scores(best) || (std::isnan(scores(best)) && !std::isnan(scores(i)))) best = i;
    }
    if (best < 0) throw std::invalid_argument("every station has already been visited");
    return best;
}

std::vector<int> kmeans_labels(const Eigen::MatrixX2d& coords, int k, std::uint64_t seed, int max_iterations) {
    const Eigen::Index n = coords.rows();
    if (k < 1 || k > n) throw std::invalid_argument("k-means needs 1 <= k <= number of points");
    Rng rng(seed);

    // k-means++ seeding
    Eigen::MatrixX2d centers(k, 2);
    centers.row(0) = coords.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
    Eigen::VectorXd d2(n);
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, (coords.row(i) - centers.row(j)).squaredNorm());
            d2(i) = best;
        }
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick < n - 1; ++pick) {
                u -= d2(pick);
                if (u < 0.0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        }
        centers.row(c) = coords.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (coords.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (coords.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // Re-centre; an empty cluster takes the point farthest from its centre.
        Eigen::MatrixX2d sums = Eigen::MatrixX2d::Zero(k, 2);
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += coords.row(i);
            ++counts(labels[static_cast<std::size_t>(i)]);
        }
        for (int c = 0; c < k; ++c) {
            if (counts(c) > 0) {
                centers.row(c) = sums.row(c) / counts(c);
                continue;
            }
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int li = labels[static_cast<std::size_t>(i)];
                if (counts(li) < 2) continue;
                const double d = (coords.row(i) - centers.row(li)).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            --counts(labels[static_cast<std::size_t>(far)]);
            labels[static_cast<std::size_t>(far)] = c;
            counts(c) = 1;
            centers.row(c) = coords.row(far);
            changed = true;
        }
        if (!changed) break;
    }
    return labels;
}

Eigen::Index baseline_select(const BeliefState& state, BaselineKind kind, const Eigen::MatrixX2d& coords, Rng& rng,
                             std::uint64_t kmeans_seed) {
    require_unvisited(state);
    const Eigen::Index n = state.size();

    if (kind == BaselineKind::random) {
        std::vector<Eigen::Index> open;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!state.visited[static_cast<std::size_t>(i)]) open.push_back(i);
        return open[uniform_index(rng, open.size())];
    }

    if (coords.rows() != n) throw std::invalid_argument("coordinates differ from station count");
    const int k = static_cast<int>(std::clamp<Eigen::Index>(state.budget, 1, n));
    const std::vector<int> labels = kmeans_labels(coords, k, kmeans_seed);
    for (int offset = 0; offset < k; ++offset) {
        const int cluster = static_cast<int>((state.step + offset) % k);
        std::vector<Eigen::Index> open;
        for (Eigen::Index i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == cluster && !state.visited[static_cast<std::size_t>(i)])
                open.push_back(i);
        if (!open.empty()) return open[uniform_index(rng, open.size())];
    }
    throw std::logic_error("stratified selection found no open cluster");
}

double exceedance_probability(double mu, double sigma, double threshold) {
    if (sigma <= 0.0) return mu >= threshold ? 1.0 : 0.0;
    return 0.5 * std::erfc((threshold - mu) / (sigma * std::sqrt(2.0)));
}

Eigen::Index greedy_select(const BeliefState& state, GreedyVariant variant, const Eigen::MatrixX2d& coords,
                           double threshold) {
    require_unvisited(state);
    const Eigen::Index n = state.size();
    switch (variant) {
        case GreedyVariant::intensity: return masked_argmax(state.mu, state.visited);
        case GreedyVariant::risk: {
            // Rank by the standardized margin: monotone in the exceedance
            // probability, but it does not underflow to ties in the far tail.
            Eigen::VectorXd margin(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = state.sigma(i);
                if (s > 0.0)
                    margin(i) = (state.mu(i) - threshold) / s;
                else
                    margin(i) = state.mu(i) >= threshold ? std::numeric_limits<double>::infinity()
                                                         : -std::numeric_limits<double>::infinity();
            }
            return masked_argmax(margin, state.visited);
        }
        case GreedyVariant::spatial: {
            if (coords.rows() != n) throw std::invalid_argument("coordinates differ from station count");
            Eigen::VectorXd score(n);
            if (state.selected.empty()) {
                const Eigen::RowVector2d centroid = coords.colwise().mean();
                for (Eigen::Index i = 0; i < n; ++i) score(i) = -(coords.row(i) - centroid).norm();
            } else {
                for (Eigen::Index i = 0; i < n; ++i) {
                    double nearest = std::numeric_limits<double>::infinity();
                    for (const Eigen::Index s : state.selected)
                        nearest = std::min(nearest, (coords.row(i) - coords.row(s)).norm());
                    score(i) = nearest;
                }
            }
            return masked_argmax(score, state.visited);
        }
    }
    throw std::logic_error("unknown greedy variant");
}

Eigen::Index ucb_select(const BeliefState& state, double exploration_beta) {
    require_unvisited(state);
    return masked_argmax(state.mu + exploration_beta * state.sigma, state.visited);
}

}  // namespace picsrl
