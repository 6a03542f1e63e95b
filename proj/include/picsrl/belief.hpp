#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picsrl/nn.hpp"
#include "picsrl/spectra.hpp"

namespace picsrl {

enum class FeatureKind { physics, raw, combined };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// physics: the ten indices; raw: every grid band; combined: both, physics first.
Eigen::MatrixXd extract_features(const WavelengthGrid& grid, const Eigen::MatrixXd& spectra, FeatureKind kind);

/// Column z-scoring with statistics frozen at fit time. Constant columns
/// keep unit scale so they map to zero rather than NaN.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x);
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// ---------------------------------------------------------------------------
// Ridge teacher

struct RidgeModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double reg_strength = 1.0;

    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

/// Closed form on centred data; the intercept is not penalized:
///   w = (Xc^T Xc + reg I)^-1 Xc^T (y - ybar),  b = ybar - xbar^T w
RidgeModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double reg_strength);

/// k-fold CV over `reg_grid`; returns the value with the lowest mean
/// validation MSE, ties going to the larger regularization.
double ridge_cv(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const std::vector<double>& reg_grid,
                int folds, std::uint64_t seed);

double r_squared(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

// ---------------------------------------------------------------------------
// Pseudo labels and the student

struct PseudoLabeledSet {
    Eigen::MatrixXd features;
    Eigen::VectorXd labels;
    double low = 0.0;
    double high = 0.0;
    double sample_weight = 1.0;
};

/// Teacher predictions on the pool, clamped to [min, max] of the training targets.
PseudoLabeledSet pseudo_label(const RidgeModel& teacher, const Eigen::MatrixXd& pool_features,
                              const Eigen::VectorXd& train_targets);

struct StudentConfig {
    std::vector<Eigen::Index> hidden{64, 32};
    bool batch_norm = true;
    double dropout_rate = 0.3;
    double labeled_weight = 10.0;
    nn::TrainHyper hyper{};
};

/// Labeled rows keep their own weights; pseudo rows get `pseudo.sample_weight`.
nn::WeightedDataset combine_student_data(const nn::WeightedDataset& labeled, const PseudoLabeledSet& pseudo);
nn::WeightedDataset labeled_dataset(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double weight);

nn::Network train_student(const nn::WeightedDataset& labeled, const PseudoLabeledSet& pseudo,
                          const StudentConfig& config);

// ---------------------------------------------------------------------------
// Bootstrap belief ensemble

struct EnsembleConfig {
    int members = 10;
    Eigen::Index hidden = 32;
    nn::TrainHyper hyper{};
    bool bootstrap = true;
    /// Test hook: every member gets the same initialization and shuffle seed.
    bool shared_seed = false;
};

struct BeliefEnsemble {
    std::vector<nn::Network> members;
    FeatureKind feature_kind = FeatureKind::physics;
    Standardizer standardizer;

    [[nodiscard]] Eigen::Index input_width() const { return members.front().input_width(); }
};

struct BeliefPrediction {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
};

/// Members are fit on independent bootstrap resamples of the (standardized)
/// features; `features` are raw and the standardizer is stored on the result.
BeliefEnsemble fit_ensemble(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                            const EnsembleConfig& config, std::uint64_t seed,
                            FeatureKind kind = FeatureKind::physics);

/// Member mean and population (divide-by-M) standard deviation per row of
/// `member_outputs` (rows = inputs, columns = members).
template <typename Derived>
BeliefPrediction ensemble_moments(const Eigen::MatrixBase<Derived>& member_outputs) {
    const Eigen::Index n = member_outputs.rows();
    const double m = static_cast<double>(member_outputs.cols());
    BeliefPrediction out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = member_outputs.row(i);
        if (row.minCoeff() == row.maxCoeff()) {
            out.mu(i) = row(0);
            out.sigma(i) = 0.0;
            continue;
        }
        out.mu(i) = row.sum() / m;
        out.sigma(i) = std::sqrt((row.array() - out.mu(i)).square().sum() / m);
    }
    return out;
}

/// Raw member outputs (rows = inputs, columns = members).
Eigen::MatrixXd member_predictions(const BeliefEnsemble& ensemble, const Eigen::MatrixXd& features);
BeliefPrediction belief_predict(const BeliefEnsemble& ensemble, const Eigen::MatrixXd& features);
/// Features extracted from station spectra with the ensemble's feature kind.
BeliefPrediction belief_predict(const BeliefEnsemble& ensemble, const Scene& scene);

// Model files: network checkpoints embedded in a JSON manifest.
std::string ensemble_to_json(const BeliefEnsemble& ensemble);
BeliefEnsemble ensemble_from_json(const std::string& text);

}  // namespace picsrl
