#include "picsrl/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "picsrl/indices.hpp"

namespace picsrl {

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::physics: return "physics";
        case FeatureKind::raw: return "raw";
        case FeatureKind::combined: return "combined";
    }
    return "physics";
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "physics") return FeatureKind::physics;
    if (name == "raw") return FeatureKind::raw;
    if (name == "combined") return FeatureKind::combined;
    throw std::invalid_argument("unknown feature kind '" + name + "'");
}

Eigen::MatrixXd extract_features(const WavelengthGrid& grid, const Eigen::MatrixXd& spectra, FeatureKind kind) {
    switch (kind) {
        case FeatureKind::physics: return compute_indices_batch(grid, spectra);
        case FeatureKind::raw: return spectra;
        case FeatureKind::combined: {
            Eigen::MatrixXd out(spectra.rows(), kIndexCount + spectra.cols());
            out << compute_indices_batch(grid, spectra), spectra;
            return out;
        }
    }
    throw std::logic_error("unreachable feature kind");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    if (x.rows() < 1) throw std::invalid_argument("cannot standardize an empty matrix");
    Standardizer s;
    s.mean = x.colwise().mean();
    s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (!(s.scale(j) > 1e-15)) s.scale(j) = 1.0;
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) throw std::invalid_argument("standardizer width mismatch");
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

// ---------------------------------------------------------------------------

Eigen::VectorXd RidgeModel::predict(const Eigen::MatrixXd& features) const {
    if (features.cols() != weights.size()) throw std::invalid_argument("ridge feature width mismatch");
    return (features * weights).array() + intercept;
}

RidgeModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double reg_strength) {
    if (features.rows() < 2) throw std::invalid_argument("ridge needs at least two rows");
    if (targets.size() != features.rows()) throw std::invalid_argument("ridge targets and features differ in length");
    if (!(reg_strength > 0.0)) throw std::invalid_argument("ridge regularization must be positive");

    const Eigen::RowVectorXd x_mean = features.colwise().mean();
    const double y_mean = targets.mean();
    const Eigen::MatrixXd xc = features.rowwise() - x_mean;
    const Eigen::VectorXd yc = targets.array() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += reg_strength;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge system is singular");

    RidgeModel model;
    model.weights = llt.solve(xc.transpose() * yc);
    model.intercept = y_mean - x_mean.dot(model.weights);
    model.reg_strength = reg_strength;
    return model;
}

double ridge_cv(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const std::vector<double>& reg_grid,
                int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("ridge_cv needs at least two folds");
    if (reg_grid.empty()) throw std::invalid_argument("ridge_cv needs a non-empty grid");
    const Eigen::Index n = features.rows();
    if (n < folds) throw std::invalid_argument("ridge_cv: fewer rows than folds");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // Fold f holds positions [f*n/folds, (f+1)*n/folds) of the shuffled order.
    std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> train_sets, valid_sets;
    for (int f = 0; f < folds; ++f) {
        const Eigen::Index lo = f * n / folds;
        const Eigen::Index hi = (f + 1) * n / folds;
        Eigen::MatrixXd xt(n - (hi - lo), features.cols()), xv(hi - lo, features.cols());
        Eigen::VectorXd yt(n - (hi - lo)), yv(hi - lo);
        Eigen::Index it = 0, iv = 0;
        for (Eigen::Index p = 0; p < n; ++p) {
            const Eigen::Index row = order[static_cast<std::size_t>(p)];
            if (p >= lo && p < hi) {
                xv.row(iv) = features.row(row);
                yv(iv++) = targets(row);
            } else {
                xt.row(it) = features.row(row);
                yt(it++) = targets(row);
            }
        }
        train_sets.emplace_back(std::move(xt), std::move(yt));
        valid_sets.emplace_back(std::move(xv), std::move(yv));
    }

    double best_reg = reg_grid.front();
    double best_mse = std::numeric_limits<double>::infinity();
    for (const double reg : reg_grid) {
        double total = 0.0;
        for (int f = 0; f < folds; ++f) {
            const auto& [xt, yt] = train_sets[static_cast<std::size_t>(f)];
            const auto& [xv, yv] = valid_sets[static_cast<std::size_t>(f)];
            const RidgeModel m = fit_ridge(xt, yt, reg);
            total += (m.predict(xv) - yv).squaredNorm() / static_cast<double>(yv.size());
        }
        const double mse = total / folds;
        if (!std::isfinite(best_mse)) {
            best_mse = mse;
            best_reg = reg;
            continue;
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(best_mse));
        if (mse < best_mse - tol || (std::abs(mse - best_mse) <= tol && reg > best_reg)) {
            best_mse = mse;
            best_reg = reg;
        }
    }
    return best_reg;
}

double r_squared(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
    const double ss_res = (targets - predictions).squaredNorm();
    const double ss_tot = (targets.array() - targets.mean()).square().sum();
    if (!(ss_tot > 0.0)) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------

PseudoLabeledSet pseudo_label(const RidgeModel& teacher, const Eigen::MatrixXd& pool_features,
                              const Eigen::VectorXd& train_targets) {
    if (pool_features.rows() == 0) throw std::invalid_argument("pseudo-labeling needs a non-empty pool");
    if (train_targets.size() == 0) throw std::invalid_argument("pseudo-labeling needs training targets");
    PseudoLabeledSet out;
    out.low = train_targets.minCoeff();
    out.high = train_targets.maxCoeff();
    out.features = pool_features;
    out.labels = teacher.predict(pool_features).cwiseMax(out.low).cwiseMin(out.high);
    return out;
}

nn::WeightedDataset labeled_dataset(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double weight) {
    return {features, targets, Eigen::VectorXd::Constant(targets.size(), weight)};
}

nn::WeightedDataset combine_student_data(const nn::WeightedDataset& labeled, const PseudoLabeledSet& pseudo) {
    labeled.validate();
    const Eigen::Index n_l = labeled.size();
    const Eigen::Index n_p = pseudo.features.rows();
    if (n_p > 0 && pseudo.features.cols() != labeled.inputs.cols())
        throw std::invalid_argument("pseudo features and labeled features differ in width");

    nn::WeightedDataset out;
    out.inputs.resize(n_l + n_p, labeled.inputs.cols());
    out.targets.resize(n_l + n_p);
    out.weights.resize(n_l + n_p);
    out.inputs.topRows(n_l) = labeled.inputs;
    out.targets.head(n_l) = labeled.targets;
    out.weights.head(n_l) = labeled.weights;
    if (n_p > 0) {
        out.inputs.bottomRows(n_p) = pseudo.features;
        out.targets.tail(n_p) = pseudo.labels;
        out.weights.tail(n_p).setConstant(pseudo.sample_weight);
    }
    return out;
}

nn::Network train_student(const nn::WeightedDataset& labeled, const PseudoLabeledSet& pseudo,
                          const StudentConfig& config) {
    const nn::WeightedDataset data = combine_student_data(labeled, pseudo);
    std::vector<Eigen::Index> widths{data.inputs.cols()};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(1);
    nn::Network net(nn::mlp_specs(widths, config.batch_norm, config.dropout_rate),
                    derive_seed(config.hyper.seed, stream::member));
    nn::train(net, data, config.hyper);
    return net;
}

// ---------------------------------------------------------------------------

BeliefEnsemble fit_ensemble(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                            const EnsembleConfig& config, std::uint64_t seed, FeatureKind kind) {
    if (config.members < 1) throw std::invalid_argument("ensemble needs at least one member");
    if (features.rows() != targets.size() || features.rows() == 0)
        throw std::invalid_argument("ensemble features and targets must be non-empty and aligned");

    BeliefEnsemble ensemble;
    ensemble.feature_kind = kind;
    ensemble.standardizer = Standardizer::fit(features);
    const Eigen::MatrixXd x = ensemble.standardizer.apply(features);
    const Eigen::Index n = x.rows();

    for (int m = 0; m < config.members; ++m) {
        const std::uint64_t member_seed = config.shared_seed ? seed : derive_seed(seed, static_cast<std::uint64_t>(m));
        nn::WeightedDataset data;
        if (config.bootstrap) {
            Rng rng(derive_seed(member_seed, stream::bootstrap));
            data.inputs.resize(n, x.cols());
            data.targets.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto row = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
                data.inputs.row(i) = x.row(row);
                data.targets(i) = targets(row);
            }
            data.weights = Eigen::VectorXd::Ones(n);
        } else {
            data = nn::WeightedDataset::uniform(x, targets);
        }
        nn::Network net(nn::mlp_specs({x.cols(), config.hidden, 1}), derive_seed(member_seed, stream::member));
        nn::TrainHyper hyper = config.hyper;
        hyper.seed = derive_seed(member_seed, stream::training);
        nn::train(net, data, hyper);
        ensemble.members.push_back(std::move(net));
    }
    return ensemble;
}

Eigen::MatrixXd member_predictions(const BeliefEnsemble& ensemble, const Eigen::MatrixXd& features) {
    if (ensemble.members.empty()) throw std::invalid_argument("empty ensemble");
    if (features.cols() != ensemble.standardizer.mean.size())
        throw std::invalid_argument("feature width " + std::to_string(features.cols()) +
                                    " does not match ensemble width " +
                                    std::to_string(ensemble.standardizer.mean.size()));
    const Eigen::MatrixXd x = ensemble.standardizer.apply(features);
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(ensemble.members.size()));
    for (std::size_t m = 0; m < ensemble.members.size(); ++m)
        out.col(static_cast<Eigen::Index>(m)) = ensemble.members[m].predict(x);
    return out;
}

BeliefPrediction belief_predict(const BeliefEnsemble& ensemble, const Eigen::MatrixXd& features) {
    return ensemble_moments(member_predictions(ensemble, features));
}

BeliefPrediction belief_predict(const BeliefEnsemble& ensemble, const Scene& scene) {
    return belief_predict(ensemble, extract_features(scene.grid, scene.spectra, ensemble.feature_kind));
}

// ---------------------------------------------------------------------------

std::string ensemble_to_json(const BeliefEnsemble& ensemble) {
    using nlohmann::json;
    json root;
    root["format"] = "picsrl.ensemble";
    root["version"] = 1;
    root["feature_kind"] = to_string(ensemble.feature_kind);
    const auto& s = ensemble.standardizer;
    root["standardizer"] = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
    json members = json::array();
    for (const auto& net : ensemble.members) members.push_back(json::parse(nn::to_json(net)));
    root["members"] = std::move(members);
    return root.dump(1);
}

BeliefEnsemble ensemble_from_json(const std::string& text) {
    using nlohmann::json;
    const json root = json::parse(text);
    if (root.at("format") != "picsrl.ensemble" || root.at("version") != 1)
        throw std::runtime_error("not a version-1 ensemble file");
    BeliefEnsemble e;
    e.feature_kind = feature_kind_from_string(root.at("feature_kind").get<std::string>());
    const auto mean = root.at("standardizer").at("mean").get<std::vector<double>>();
    const auto scale = root.at("standardizer").at("scale").get<std::vector<double>>();
    if (mean.size() != scale.size()) throw std::runtime_error("standardizer mean/scale differ in length");
    e.standardizer.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    e.standardizer.scale = Eigen::Map<const Eigen::RowVectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    for (const auto& jm : root.at("members")) e.members.push_back(nn::network_from_json(jm.dump()));
    if (e.members.empty()) throw std::runtime_error("ensemble file has no members");
    return e;
}

}  // namespace picsrl
