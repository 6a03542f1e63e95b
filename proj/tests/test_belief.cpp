#include <doctest.h>

#include "picsrl/belief.hpp"
#include "picsrl/indices.hpp"

using namespace picsrl;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    return m;
}

// Unpenalized intercept through the augmented normal equations, solved by full-pivot LU.
Eigen::VectorXd ridge_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double reg) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Eigen::MatrixXd a(n, d + 1);
    a << x, Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd lhs = a.transpose() * a;
    lhs.topLeftCorner(d, d).diagonal().array() += reg;
    return lhs.fullPivLu().solve(a.transpose() * y);
}

EnsembleConfig small_ensemble(int members) {
    EnsembleConfig c;
    c.members = members;
    c.hidden = 8;
    c.hyper.epochs = 40;
    return c;
}

}  // namespace

TEST_CASE("ridge closed form") {
    Rng rng(1);
    const Eigen::MatrixXd x = gaussian(30, 4, rng);
    const RidgeModel flat = fit_ridge(x, Eigen::VectorXd::Constant(30, 2.5), 1.0);
    CHECK(flat.weights.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(flat.intercept == doctest::Approx(2.5).epsilon(1e-12));

    const Eigen::Vector3d line(0.0, 1.0, 2.0);
    const RidgeModel exact = fit_ridge(line, line, 1e-10);
    CHECK(exact.weights(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(exact.intercept) < 1e-8);

    for (const double reg : {1e-3, 1.0, 50.0}) {
        const Eigen::MatrixXd xx = gaussian(98, 10, rng);
        const Eigen::VectorXd y = xx * Eigen::VectorXd::LinSpaced(10, -1.0, 1.0) + gaussian(98, 1, rng) + Eigen::VectorXd::Constant(98, 3.0);
        const RidgeModel m = fit_ridge(xx, y, reg);
        const Eigen::VectorXd o = ridge_oracle(xx, y, reg);
        CHECK((m.weights - o.head(10)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(m.intercept - o(10)) < 1e-8);
    }
    CHECK_THROWS_AS(fit_ridge(x, Eigen::VectorXd::Zero(30), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_ridge(x.topRows(1), Eigen::VectorXd::Zero(1), 1.0), std::invalid_argument);
}

TEST_CASE("ridge cross-validation") {
    Rng rng(2);
    const Eigen::MatrixXd x = gaussian(40, 3, rng);
    const Eigen::VectorXd y = x * Eigen::Vector3d(1.0, -2.0, 0.5);
    CHECK(ridge_cv(x, y, {1.0}, 5, 1) == 1.0);
    CHECK(ridge_cv(x, y, {1e-6, 1e3}, 5, 1) == 1e-6);
    CHECK_THROWS_AS(ridge_cv(x.topRows(3), y.head(3), {1.0}, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(ridge_cv(x, y, {}, 5, 1), std::invalid_argument);

    int largest = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng r(100 + s);
        const Eigen::MatrixXd xn = gaussian(40, 5, r);
        const Eigen::VectorXd yn = gaussian(40, 1, r);
        largest += ridge_cv(xn, yn, {1e-3, 1e-1, 10.0, 1e3}, 5, s) == 1e3;
    }
    CHECK(largest >= 40);
}

TEST_CASE("r squared") {
    const Eigen::Vector4d y(1, 2, 3, 4);
    CHECK(r_squared(y, y) == 1.0);
    CHECK(r_squared(Eigen::Vector4d::Constant(2.5), y) == doctest::Approx(0.0));
}

TEST_CASE("pseudo labels are clamped") {
    RidgeModel teacher;
    teacher.weights = Eigen::VectorXd::Ones(1);
    teacher.intercept = 0.0;
    const Eigen::Vector3d train(0.0, 1.0, 2.0);
    const PseudoLabeledSet hi = pseudo_label(teacher, Eigen::MatrixXd::Constant(1, 1, 10.0), train);
    CHECK(hi.labels(0) == 2.0);
    CHECK(pseudo_label(teacher, Eigen::MatrixXd::Constant(1, 1, 1.25), train).labels(0) == 1.25);
    CHECK(hi.sample_weight == 1.0);

    Rng rng(4);
    const Eigen::MatrixXd pool = 3.0 * gaussian(1000, 1, rng);
    const PseudoLabeledSet p = pseudo_label(teacher, pool, train);
    CHECK(p.labels.size() == 1000);
    CHECK(p.low == 0.0);
    CHECK(p.high == 2.0);
    CHECK((p.labels.array() >= 0.0).all());
    CHECK((p.labels.array() <= 2.0).all());
    CHECK((p.labels.array() == 0.0).any());
    CHECK((p.labels.array() == 2.0).any());
}

TEST_CASE("student data assembly") {
    Rng rng(5);
    const nn::WeightedDataset labeled = labeled_dataset(gaussian(98, 10, rng), gaussian(98, 1, rng), 10.0);
    PseudoLabeledSet pseudo{gaussian(9902, 10, rng), Eigen::VectorXd::Zero(9902), 0.0, 1.0, 1.0};
    const nn::WeightedDataset all = combine_student_data(labeled, pseudo);
    CHECK(all.size() == 10000);
    const double labeled_mass = all.weights.head(98).sum() / all.weights.sum();
    CHECK(labeled_mass == doctest::Approx(980.0 / (980.0 + 9902.0)).epsilon(1e-12));

    const PseudoLabeledSet empty{Eigen::MatrixXd(0, 10), Eigen::VectorXd(0), 0.0, 1.0, 1.0};
    CHECK(combine_student_data(labeled, empty).size() == 98);
    StudentConfig cfg;
    cfg.hidden = {8, 4};
    cfg.hyper.epochs = 5;
    const nn::Network net = train_student(labeled, empty, cfg);
    CHECK(net.input_width() == 10);
    CHECK(net.all_finite());
}

TEST_CASE("heavier labeled weight fits the labeled rows better") {
    Rng rng(6);
    const Eigen::MatrixXd xl = gaussian(20, 3, rng);
    const Eigen::VectorXd yl = xl.col(0) + xl.col(1).cwiseAbs();
    const Eigen::MatrixXd xp = gaussian(200, 3, rng);
    const PseudoLabeledSet pseudo{xp, -xp.col(0), -5.0, 5.0, 1.0};
    StudentConfig cfg;
    cfg.hidden = {16, 8};
    cfg.dropout_rate = 0.0;
    cfg.hyper.epochs = 40;
    cfg.hyper.seed = 3;
    const auto labeled_mse = [&](double w) {
        const nn::Network net = train_student(labeled_dataset(xl, yl, w), pseudo, cfg);
        return (net.predict(xl) - yl).squaredNorm() / 20.0;
    };
    CHECK(labeled_mse(10.0) < labeled_mse(1.0));
}

TEST_CASE("ensemble moments") {
    const Eigen::RowVector2d two(1.0, 3.0);
    const BeliefPrediction p = ensemble_moments(two);
    CHECK(p.mu(0) == 2.0);
    CHECK(p.sigma(0) == 1.0);

    Rng rng(7);
    const Eigen::MatrixXd out = gaussian(50, 7, rng);
    const BeliefPrediction q = ensemble_moments(out);
    for (Eigen::Index i = 0; i < 50; ++i) {
        double mean = 0.0;
        for (Eigen::Index m = 0; m < 7; ++m) mean += out(i, m);
        mean /= 7.0;
        double var = 0.0;
        for (Eigen::Index m = 0; m < 7; ++m) var += (out(i, m) - mean) * (out(i, m) - mean);
        CHECK(std::abs(q.mu(i) - mean) < 1e-12);
        CHECK(std::abs(q.sigma(i) - std::sqrt(var / 7.0)) < 1e-12);
    }
    const BeliefPrediction same = ensemble_moments(Eigen::MatrixXd::Constant(3, 4, 0.1));
    CHECK(same.sigma.isZero(0.0));
    CHECK(same.mu(0) == 0.1);
}

TEST_CASE("feature kinds and standardizer") {
    const WavelengthGrid g = WavelengthGrid::uniform();
    Eigen::MatrixXd spectra(4, g.size());
    for (int i = 0; i < 4; ++i) spectra.row(i) = reflectance_of(0.3 * (i + 1), 1e-4, i, g).reflectance.transpose();
    CHECK(extract_features(g, spectra, FeatureKind::physics).cols() == 10);
    CHECK(extract_features(g, spectra, FeatureKind::raw).cols() == 117);
    const Eigen::MatrixXd comb = extract_features(g, spectra, FeatureKind::combined);
    CHECK(comb.cols() == 127);
    CHECK(comb.leftCols(10) == compute_indices_batch(g, spectra));
    CHECK(comb.rightCols(117) == spectra);
    CHECK(feature_kind_from_string("raw") == FeatureKind::raw);
    CHECK_THROWS_AS(feature_kind_from_string("bands"), std::invalid_argument);

    Eigen::MatrixXd x(3, 2);
    x << 1, 5, 2, 5, 3, 5;
    const Standardizer z = Standardizer::fit(x);
    const Eigen::MatrixXd zx = z.apply(x);
    CHECK(zx.col(1).isZero(0.0));
    CHECK(std::abs(zx.col(0).mean()) < 1e-15);
}

TEST_CASE("ensemble uncertainty") {
    Rng rng(8);
    const Eigen::MatrixXd x = gaussian(40, 3, rng);
    const Eigen::VectorXd y = x.col(0) + 0.3 * gaussian(40, 1, rng);

    const BeliefEnsemble one = fit_ensemble(x, y, small_ensemble(1), 1);
    CHECK(belief_predict(one, gaussian(10, 3, rng)).sigma.isZero(0.0));

    EnsembleConfig clones = small_ensemble(10);
    clones.bootstrap = false;
    clones.shared_seed = true;
    const BeliefEnsemble same = fit_ensemble(x, y, clones, 1);
    CHECK(belief_predict(same, gaussian(10, 3, rng)).sigma.isZero(0.0));

    const BeliefEnsemble e = fit_ensemble(x, y, small_ensemble(10), 1);
    const Eigen::MatrixXd probe = gaussian(10, 3, rng);
    const BeliefPrediction bp = belief_predict(e, probe);
    CHECK((bp.sigma.array() > 0.0).all());
    const BeliefPrediction again = belief_predict(e, probe);
    CHECK(again.mu == bp.mu);
    CHECK(again.sigma == bp.sigma);
    const BeliefPrediction manual = ensemble_moments(member_predictions(e, probe));
    CHECK(manual.mu == bp.mu);
    CHECK_THROWS_AS(belief_predict(e, gaussian(2, 4, rng)), std::invalid_argument);

    const BeliefEnsemble back = ensemble_from_json(ensemble_to_json(e));
    CHECK(belief_predict(back, probe).mu == bp.mu);
    CHECK(belief_predict(back, probe).sigma == bp.sigma);
}

TEST_CASE("held-out points are more uncertain than training points") {
    int wins = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(500 + s);
        const Eigen::MatrixXd x = gaussian(30, 2, rng);
        const Eigen::VectorXd y = x.col(0).array().sin().matrix() + 0.5 * gaussian(30, 1, rng);
        const BeliefEnsemble e = fit_ensemble(x, y, EnsembleConfig{}, s);
        const double train_sigma = belief_predict(e, x).sigma.mean();
        const double held_sigma = belief_predict(e, gaussian(200, 2, rng)).sigma.mean();
        wins += held_sigma > train_sigma;
    }
    MESSAGE("held-out sigma exceeded training sigma in ", wins, " of 20 seeds");
    CHECK(wins >= 14);
}
