#include <cmath>
#include <numeric>

#include <doctest.h>

#include "picsrl/nn.hpp"

using namespace picsrl;
using namespace picsrl::nn;

namespace {

// Reference loss recomputed by hand from the forward pass.
double mse_oracle(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::VectorXd p = net.predict(x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += (y(i) - p(i)) * (y(i) - p(i));
    return s / static_cast<double>(y.size());
}

Network random_net(Rng& rng, std::uint64_t seed) {
    const int depth = 1 + static_cast<int>(uniform_index(rng, 3));
    std::vector<LayerSpec> specs;
    Eigen::Index in = 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
    for (int l = 0; l < depth; ++l) {
        const bool last = l == depth - 1;
        const Eigen::Index out = last ? 1 : 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
        specs.push_back({in, out, last ? Activation::identity : Activation::relu, false, 0.0});
        in = out;
    }
    return Network(specs, seed);
}

}  // namespace

TEST_CASE("initialization is deterministic and chained") {
    const Network a({{1, 1, Activation::identity}}, 7);
    const Network b({{1, 1, Activation::identity}}, 7);
    CHECK(a.parameters() == b.parameters());
    CHECK(a == b);

    const Network student(mlp_specs({10, 64, 32, 1}), 1);
    CHECK(student.parameter_count() == 10 * 64 + 64 + 64 * 32 + 32 + 32 * 1 + 1);
    CHECK(student.parameter_count() == 2817);

    CHECK_THROWS_AS(Network({{10, 64}, {32, 1}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Network({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Network({{2, 2, Activation::relu, false, 1.0}}, 1), std::invalid_argument);
}

TEST_CASE("glorot bounds") {
    const Network net(mlp_specs({20, 30, 1}), 3);
    const double limit = std::sqrt(6.0 / 50.0);
    CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= limit);
    CHECK(net.layers()[0].bias.isZero());
}

TEST_CASE("forward basics") {
    Network net({{1, 1, Activation::identity}}, 1);
    net.layers()[0].weight(0, 0) = 2.0;
    net.layers()[0].bias(0) = 1.0;
    CHECK(net.predict(Eigen::MatrixXd::Constant(1, 1, 3.0))(0) == 7.0);

    Network zero(mlp_specs({4, 5, 1}), 2);
    zero.set_parameters(Eigen::VectorXd::Zero(zero.parameter_count()));
    CHECK(zero.predict(Eigen::MatrixXd::Random(6, 4)).isZero());

    const Network deep(mlp_specs({4, 8, 8, 1}, true, 0.3), 5);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 4);
    CHECK(deep.forward(x, Mode::infer) == deep.forward(x, Mode::infer));
    CHECK_THROWS_AS((void)deep.forward(Eigen::MatrixXd::Random(2, 3), Mode::infer), std::invalid_argument);
    CHECK_THROWS_AS((void)deep.forward(x, Mode::train), std::invalid_argument);
}

TEST_CASE("inverted dropout keeps the expected activation") {
    Network net({{1, 400, Activation::identity, false, 0.5}}, 4);
    net.layers()[0].weight.setOnes();
    net.layers()[0].bias.setZero();
    Rng rng(11);
    const Eigen::MatrixXd out = net.forward(Eigen::MatrixXd::Ones(1, 1), Mode::train, &rng);
    const auto zeros = (out.array() == 0.0).count();
    CHECK(zeros > 120);
    CHECK(zeros < 280);
    CHECK(((out.array() == 0.0) || (out.array() == 2.0)).all());
}

TEST_CASE("weighted loss") {
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
    const Eigen::VectorXd p = y.array() + 0.25;
    CHECK(weighted_mse(p, y, Eigen::VectorXd::Ones(5)) == doctest::Approx(0.0625).epsilon(1e-12));

    // A weight-10 residual contributes ten times a weight-1 residual of the same size.
    Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
    const Eigen::Vector2d t(0.0, 0.0), q(1.0, 0.0), r(0.0, 1.0);
    w(0) = 10.0;
    CHECK(weighted_mse(q, t, w) == doctest::Approx(10.0 * weighted_mse(r, t, w)));

    const Network net(mlp_specs({3, 4, 1}), 9);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(12, 3);
    const Eigen::VectorXd yy = Eigen::VectorXd::Random(12);
    const WeightedDataset d = WeightedDataset::uniform(x, yy);
    CHECK(std::abs(weighted_loss(net, d) - mse_oracle(net, x, yy)) < 1e-12);

    // Row permutation leaves the loss unchanged.
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(12);
    perm.setIdentity();
    std::reverse(perm.indices().data(), perm.indices().data() + 12);
    const WeightedDataset shuffled = WeightedDataset::uniform(perm * x, perm * yy);
    CHECK(std::abs(weighted_loss(net, d) - weighted_loss(net, shuffled)) < 1e-12);
}

TEST_CASE("gradient check on random nets") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const Network net = random_net(rng, 100 + trial);
        GradientSample s;
        s.input = Eigen::VectorXd::Random(net.input_width());
        s.target = standard_normal(rng);
        s.weight = 0.5 + trial;
        CHECK(gradient_check(net, s, 1e-5) < 1e-4);
    }
    const Network zero = [] {
        Network n(mlp_specs({3, 4, 1}), 1);
        n.set_parameters(Eigen::VectorXd::Zero(n.parameter_count()));
        return n;
    }();
    CHECK(gradient_check(zero, GradientSample{Eigen::VectorXd::Zero(3), 0.0, 1.0}, 1e-5) < 1e-4);
}

TEST_CASE("gradient check with batch norm over a batch") {
    const Network net(mlp_specs({4, 6, 5, 1}, true), 8);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 4);
    const WeightedDataset d{x, Eigen::VectorXd::Random(10), Eigen::VectorXd::Constant(10, 2.0)};
    CHECK(gradient_check(net, d, 1e-5, Mode::train) < 1e-4);
    CHECK(gradient_check(net, d, 1e-5, Mode::infer) < 1e-4);

    const Network dropped(mlp_specs({4, 6, 1}, false, 0.3), 8);
    CHECK_THROWS_AS(gradient_check(dropped, d, 1e-5, Mode::train), std::invalid_argument);
    CHECK(gradient_check(dropped, d, 1e-5, Mode::infer) < 1e-4);
    CHECK_THROWS_AS(gradient_check(net, d, 0.1), std::invalid_argument);
}

TEST_CASE("training reduces loss and is deterministic") {
    Network net(mlp_specs({2, 8, 1}), 3);
    const WeightedDataset one = WeightedDataset::uniform(Eigen::MatrixXd::Constant(1, 2, 0.5), Eigen::VectorXd::Constant(1, 2.0));
    TrainHyper h;
    h.epochs = 2000;
    h.batch_size = 1;
    h.learning_rate = 1e-2;
    const TrainSummary s = train(net, one, h);
    CHECK(s.final_loss < 1e-3 * s.initial_loss);

    Rng rng(5);
    Eigen::MatrixXd x(64, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const Eigen::VectorXd y = x.col(0) - 0.5 * x.col(1) + x.col(2).cwiseAbs();
    const WeightedDataset d = WeightedDataset::uniform(x, y);
    for (const auto opt : {OptimizerKind::sgd_momentum, OptimizerKind::adam}) {
        Network a(mlp_specs({3, 16, 8, 1}, true, 0.2), 12);
        Network b = a;
        TrainHyper th;
        th.optimizer = opt;
        th.seed = 77;
        th.epochs = 50;
        const TrainSummary sa = train(a, d, th);
        train(b, d, th);
        CHECK(sa.final_loss <= sa.initial_loss);
        CHECK(a == b);
        CHECK(a.all_finite());
    }
}

TEST_CASE("divergence is reported with the epoch") {
    Network net(mlp_specs({1, 4, 1}), 1);
    const WeightedDataset d = WeightedDataset::uniform(Eigen::MatrixXd::Constant(4, 1, 1e3), Eigen::VectorXd::Constant(4, 1e3));
    TrainHyper h;
    h.learning_rate = 1e6;
    try {
        train(net, d, h);
        FAIL("expected divergence");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip is exact") {
    Network net(mlp_specs({5, 7, 3, 2}, true, 0.1), 99);
    const WeightedDataset d = WeightedDataset::uniform(Eigen::MatrixXd::Random(20, 5), Eigen::VectorXd::Random(20));
    Network single(mlp_specs({5, 7, 3, 1}, true, 0.1), 99);
    TrainHyper h;
    h.epochs = 3;
    train(single, d, h);
    for (const Network* n : {&net, &single}) {
        const Network back = network_from_json(to_json(*n));
        CHECK(back == *n);
        const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 5);
        CHECK(back.forward(x, Mode::infer) == n->forward(x, Mode::infer));
    }
    CHECK_THROWS(network_from_json(R"({"format":"other"})"));
}
