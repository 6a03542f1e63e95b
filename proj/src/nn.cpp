#include "picsrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace picsrl::nn {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

}  // namespace

Network::Network(std::vector<LayerSpec> specs, std::uint64_t seed) : seed_(seed) {
    if (specs.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.input_width < 1 || s.output_width < 1)
            throw std::invalid_argument("layer " + std::to_string(i) + ": widths must be >= 1");
        if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
            throw std::invalid_argument("layer " + std::to_string(i) + ": dropout rate outside [0,1)");
        if (i > 0 && specs[i - 1].output_width != s.input_width)
            throw std::invalid_argument("layer " + std::to_string(i) + ": input width " +
                                        std::to_string(s.input_width) + " does not match previous output " +
                                        std::to_string(specs[i - 1].output_width));
    }

    Rng rng(seed);
    layers_.reserve(specs.size());
    for (const auto& s : specs) {
        Layer layer;
        layer.spec = s;
        const double limit = std::sqrt(6.0 / static_cast<double>(s.input_width + s.output_width));
        std::uniform_real_distribution<double> dist(-limit, limit);
        layer.weight.resize(s.input_width, s.output_width);
        // Row-major fill so the draw order matches the checkpoint layout.
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(s.output_width);
        if (s.batch_norm) {
            layer.gamma = Eigen::VectorXd::Ones(s.output_width);
            layer.beta = Eigen::VectorXd::Zero(s.output_width);
            layer.running_mean = Eigen::VectorXd::Zero(s.output_width);
            layer.running_var = Eigen::VectorXd::Ones(s.output_width);
        }
        layers_.push_back(std::move(layer));
    }
}

Network init_network(std::vector<LayerSpec> specs, std::uint64_t seed) {
    return Network(std::move(specs), seed);
}

std::vector<LayerSpec> mlp_specs(const std::vector<Eigen::Index>& widths, bool batch_norm,
                                 double dropout_rate) {
    if (widths.size() < 2) throw std::invalid_argument("mlp_specs needs input and output widths");
    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool hidden = i + 2 < widths.size();
        specs.push_back(LayerSpec{widths[i], widths[i + 1],
                                  hidden ? Activation::relu : Activation::identity,
                                  hidden && batch_norm, hidden ? dropout_rate : 0.0});
    }
    return specs;
}

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

Eigen::Index Network::input_width() const { return layers_.front().spec.input_width; }
Eigen::Index Network::output_width() const { return layers_.back().spec.output_width; }

bool Network::has_dropout() const {
    return std::any_of(layers_.begin(), layers_.end(),
                       [](const Layer& l) { return l.spec.dropout_rate > 0.0; });
}

bool Network::has_batch_norm() const {
    return std::any_of(layers_.begin(), layers_.end(), [](const Layer& l) { return l.spec.batch_norm; });
}

Eigen::Index Network::parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) {
        n += l.weight.size() + l.bias.size();
        if (l.spec.batch_norm) n += l.gamma.size() + l.beta.size();
    }
    return n;
}

Eigen::VectorXd Network::parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            flat.segment(at, l.weight.cols()) = l.weight.row(r).transpose();
            at += l.weight.cols();
        }
        flat.segment(at, l.bias.size()) = l.bias;
        at += l.bias.size();
        if (l.spec.batch_norm) {
            flat.segment(at, l.gamma.size()) = l.gamma;
            at += l.gamma.size();
            flat.segment(at, l.beta.size()) = l.beta;
            at += l.beta.size();
        }
    }
    return flat;
}

void Network::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count())
        throw std::invalid_argument("parameter vector has wrong length");
    Eigen::Index at = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            l.weight.row(r) = flat.segment(at, l.weight.cols()).transpose();
            at += l.weight.cols();
        }
        l.bias = flat.segment(at, l.bias.size());
        at += l.bias.size();
        if (l.spec.batch_norm) {
            l.gamma = flat.segment(at, l.gamma.size());
            at += l.gamma.size();
            l.beta = flat.segment(at, l.beta.size());
            at += l.beta.size();
        }
    }
}

bool Network::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        if (l.spec.batch_norm &&
            !(l.gamma.allFinite() && l.beta.allFinite() && l.running_mean.allFinite() &&
              l.running_var.allFinite()))
            return false;
    }
    return true;
}

void Network::check_batch(const Eigen::MatrixXd& batch) const {
    if (layers_.empty()) throw std::logic_error("forward on an empty network");
    if (batch.cols() != input_width())
        throw std::invalid_argument("batch has " + std::to_string(batch.cols()) +
                                    " columns, network expects " + std::to_string(input_width()));
}

ForwardTrace Network::forward_trace(const Eigen::MatrixXd& batch, Mode mode, Rng* rng) const {
    check_batch(batch);
    if (mode == Mode::train && has_dropout() && rng == nullptr)
        throw std::invalid_argument("train-mode forward with dropout needs an rng");

    const std::size_t n_layers = layers_.size();
    ForwardTrace t;
    t.mode = mode;
    t.inputs.resize(n_layers);
    t.normalized.resize(n_layers);
    t.batch_mean.resize(n_layers);
    t.batch_var.resize(n_layers);
    t.pre_activation.resize(n_layers);
    t.dropout_mask.resize(n_layers);

    Eigen::MatrixXd x = batch;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const Layer& l = layers_[i];
        t.inputs[i] = x;
        Eigen::MatrixXd z = x * l.weight;
        z.rowwise() += l.bias.transpose();

        if (l.spec.batch_norm) {
            Eigen::RowVectorXd mean;
            Eigen::RowVectorXd var;
            if (mode == Mode::train) {
                mean = z.colwise().mean();
                var = (z.rowwise() - mean).array().square().colwise().mean();
            } else {
                mean = l.running_mean.transpose();
                var = l.running_var.transpose();
            }
            const Eigen::RowVectorXd inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
            Eigen::MatrixXd xhat = (z.rowwise() - mean).array().rowwise() * inv_std.array();
            z = (xhat.array().rowwise() * l.gamma.transpose().array()).matrix();
            z.rowwise() += l.beta.transpose();
            t.normalized[i] = std::move(xhat);
            t.batch_mean[i] = mean;
            t.batch_var[i] = var;
        }
        t.pre_activation[i] = z;

        x = l.spec.activation == Activation::relu ? relu(z) : z;

        if (mode == Mode::train && l.spec.dropout_rate > 0.0) {
            const double keep = 1.0 - l.spec.dropout_rate;
            std::bernoulli_distribution coin(keep);
            Eigen::MatrixXd mask(x.rows(), x.cols());
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c) mask(r, c) = coin(*rng) ? 1.0 / keep : 0.0;
            x = x.cwiseProduct(mask);
            t.dropout_mask[i] = std::move(mask);
        }
    }
    t.output = std::move(x);
    return t;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& batch, Mode mode, Rng* rng) const {
    return forward_trace(batch, mode, rng).output;
}

Eigen::VectorXd Network::predict(const Eigen::MatrixXd& batch) const {
    return forward(batch, Mode::infer).col(0);
}

Eigen::VectorXd Network::backward(const ForwardTrace& t, const Eigen::MatrixXd& output_grad) const {
    if (output_grad.rows() != t.output.rows() || output_grad.cols() != t.output.cols())
        throw std::invalid_argument("output gradient shape does not match forward output");

    // Gradients are written layer by layer, then packed in the flat order.
    const std::size_t n_layers = layers_.size();
    std::vector<Eigen::MatrixXd> d_weight(n_layers);
    std::vector<Eigen::VectorXd> d_bias(n_layers), d_gamma(n_layers), d_beta(n_layers);

    Eigen::MatrixXd g = output_grad;
    for (std::size_t k = n_layers; k-- > 0;) {
        const Layer& l = layers_[k];
        if (t.dropout_mask[k].size() > 0) g = g.cwiseProduct(t.dropout_mask[k]);
        if (l.spec.activation == Activation::relu)
            g = (t.pre_activation[k].array() > 0.0).select(g, 0.0);

        Eigen::MatrixXd dz;
        if (l.spec.batch_norm) {
            const Eigen::MatrixXd& xhat = t.normalized[k];
            d_gamma[k] = (g.cwiseProduct(xhat)).colwise().sum().transpose();
            d_beta[k] = g.colwise().sum().transpose();
            const Eigen::MatrixXd dxhat = g.array().rowwise() * l.gamma.transpose().array();
            const Eigen::RowVectorXd inv_std = (t.batch_var[k].array() + kBatchNormEpsilon).rsqrt();
            if (t.mode == Mode::train) {
                const double b = static_cast<double>(g.rows());
                const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
                const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();
                Eigen::MatrixXd centered = (b * dxhat).rowwise() - sum_dxhat;
                centered -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
                dz = (centered.array().rowwise() * (inv_std.array() / b)).matrix();
            } else {
                dz = dxhat.array().rowwise() * inv_std.array();
            }
        } else {
            dz = std::move(g);
        }

        d_weight[k] = t.inputs[k].transpose() * dz;
        d_bias[k] = dz.colwise().sum().transpose();
        if (k > 0) g = dz * l.weight.transpose();
    }

    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < n_layers; ++k) {
        const auto& dw = d_weight[k];
        for (Eigen::Index r = 0; r < dw.rows(); ++r) {
            flat.segment(at, dw.cols()) = dw.row(r).transpose();
            at += dw.cols();
        }
        flat.segment(at, d_bias[k].size()) = d_bias[k];
        at += d_bias[k].size();
        if (layers_[k].spec.batch_norm) {
            flat.segment(at, d_gamma[k].size()) = d_gamma[k];
            at += d_gamma[k].size();
            flat.segment(at, d_beta[k].size()) = d_beta[k];
            at += d_beta[k].size();
        }
    }
    return flat;
}

void Network::update_running_stats(const ForwardTrace& t, double decay) {
    if (t.mode != Mode::train) return;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        auto& l = layers_[k];
        if (!l.spec.batch_norm) continue;
        l.running_mean = decay * l.running_mean + (1.0 - decay) * t.batch_mean[k].transpose();
        l.running_var = decay * l.running_var + (1.0 - decay) * t.batch_var[k].transpose();
    }
}

bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size() || a.seed_ != b.seed_) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        const auto& x = a.layers_[i];
        const auto& y = b.layers_[i];
        if (x.spec.input_width != y.spec.input_width || x.spec.output_width != y.spec.output_width ||
            x.spec.activation != y.spec.activation || x.spec.batch_norm != y.spec.batch_norm ||
            x.spec.dropout_rate != y.spec.dropout_rate)
            return false;
        if (x.weight != y.weight || x.bias != y.bias) return false;
        if (x.spec.batch_norm && (x.gamma != y.gamma || x.beta != y.beta ||
                                  x.running_mean != y.running_mean || x.running_var != y.running_var))
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

void WeightedDataset::validate() const {
    if (inputs.rows() == 0) throw std::invalid_argument("dataset is empty");
    if (targets.size() != inputs.rows() || weights.size() != inputs.rows())
        throw std::invalid_argument("dataset inputs, targets and weights differ in length");
    if ((weights.array() <= 0.0).any() || !weights.allFinite())
        throw std::invalid_argument("sample weights must be positive and finite");
}

WeightedDataset WeightedDataset::uniform(Eigen::MatrixXd inputs, Eigen::VectorXd targets) {
    const Eigen::Index n = inputs.rows();
    return {std::move(inputs), std::move(targets), Eigen::VectorXd::Ones(n)};
}

double weighted_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                    const Eigen::VectorXd& weights) {
    const Eigen::ArrayXd r = targets - predictions;
    return (weights.array() * r.square()).sum() / static_cast<double>(targets.size());
}

double weighted_loss(const Network& net, const WeightedDataset& data) {
    return weighted_mse(net.predict(data.inputs), data.targets, data.weights);
}

Optimizer::Optimizer(const TrainHyper& hyper, Eigen::Index parameter_count)
    : hyper_(hyper),
      first_(Eigen::VectorXd::Zero(parameter_count)),
      second_(Eigen::VectorXd::Zero(parameter_count)) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++steps_;
    if (hyper_.optimizer == OptimizerKind::sgd_momentum) {
        first_ = hyper_.momentum * first_ - hyper_.learning_rate * grad;
        params += first_;
        return;
    }
    first_ = hyper_.adam_beta1 * first_ + (1.0 - hyper_.adam_beta1) * grad;
    second_ = hyper_.adam_beta2 * second_ + (1.0 - hyper_.adam_beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(hyper_.adam_beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(hyper_.adam_beta2, static_cast<double>(steps_));
    params.array() -= hyper_.learning_rate * (first_.array() / c1) /
                      ((second_.array() / c2).sqrt() + hyper_.adam_epsilon);
}

TrainSummary train(Network& net, const WeightedDataset& data, const TrainHyper& hyper) {
    data.validate();
    if (data.inputs.cols() != net.input_width())
        throw std::invalid_argument("dataset width does not match network input");
    if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.learning_rate > 0.0))
        throw std::invalid_argument("invalid training hyperparameters");

    TrainSummary summary;
    summary.initial_loss = weighted_loss(net, data);

    const Eigen::Index n = data.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng shuffle_rng(derive_seed(hyper.seed, 0));
    Rng dropout_rng(derive_seed(hyper.seed, 1));

    Optimizer opt(hyper, net.parameter_count());
    Eigen::VectorXd params = net.parameters();
    const bool bn = net.has_batch_norm();

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (Eigen::Index start = 0; start < n; start += hyper.batch_size) {
            Eigen::Index stop = std::min(n, start + hyper.batch_size);
            // A lone trailing sample would give a degenerate batch-norm batch; fold it in.
            if (bn && n - stop == 1) stop = n;
            const Eigen::Index m = stop - start;

            Eigen::MatrixXd x(m, data.inputs.cols());
            Eigen::VectorXd y(m), w(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index row = order[static_cast<std::size_t>(start + i)];
                x.row(i) = data.inputs.row(row);
                y(i) = data.targets(row);
                w(i) = data.weights(row);
            }

            const ForwardTrace trace = net.forward_trace(x, Mode::train, &dropout_rng);
            const Eigen::VectorXd yhat = trace.output.col(0);
            const double loss = weighted_mse(yhat, y, w);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));

            Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(m, net.output_width());
            d_out.col(0) = (-2.0 / static_cast<double>(m)) * (w.array() * (y - yhat).array()).matrix();
            const Eigen::VectorXd grad = net.backward(trace, d_out);
            opt.step(params, grad);
            net.set_parameters(params);
            net.update_running_stats(trace);
            if (!net.all_finite())
                throw NumericalError("non-finite parameters at epoch " + std::to_string(epoch));
            if (stop == n) break;
        }
        ++summary.epochs;
    }
    summary.final_loss = weighted_loss(net, data);
    if (!std::isfinite(summary.final_loss))
        throw NumericalError("non-finite loss after training");
    return summary;
}

double gradient_check(const Network& net, const GradientSample& sample, double epsilon, Mode mode) {
    WeightedDataset data;
    data.inputs = sample.input.transpose();
    data.targets = Eigen::VectorXd::Constant(1, sample.target);
    data.weights = Eigen::VectorXd::Constant(1, sample.weight);
    return gradient_check(net, data, epsilon, mode);
}

double gradient_check(const Network& net, const WeightedDataset& data, double epsilon, Mode mode) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw std::invalid_argument("epsilon must lie in (0, 1e-2]");
    if (mode == Mode::train && net.has_dropout())
        throw std::invalid_argument("gradient check in train mode with active dropout is invalid");
    if (data.inputs.cols() != net.input_width())
        throw std::invalid_argument("sample width does not match network input");

    const auto loss_at = [&](const Network& n) {
        const Eigen::VectorXd yhat = n.forward(data.inputs, mode).col(0);
        return weighted_mse(yhat, data.targets, data.weights);
    };

    const ForwardTrace trace = net.forward_trace(data.inputs, mode);
    const Eigen::Index m = data.inputs.rows();
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(m, net.output_width());
    d_out.col(0) = (-2.0 / static_cast<double>(m)) *
                   (data.weights.array() * (data.targets - trace.output.col(0)).array()).matrix();
    const Eigen::VectorXd analytic = net.backward(trace, d_out);

    Network probe = net;
    const Eigen::VectorXd base = net.parameters();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        Eigen::VectorXd p = base;
        p(i) = base(i) + epsilon;
        probe.set_parameters(p);
        const double up = loss_at(probe);
        p(i) = base(i) - epsilon;
        probe.set_parameters(p);
        const double down = loss_at(probe);
        const double numeric = (up - down) / (2.0 * epsilon);
        // Absolute floor keeps exactly-zero gradients (dead units) from dividing by zero.
        const double scale = std::max(std::abs(analytic(i)) + std::abs(numeric), 1e-6);
        worst = std::max(worst, std::abs(analytic(i) - numeric) / scale);
    }
    return worst;
}

}  // namespace picsrl::nn
