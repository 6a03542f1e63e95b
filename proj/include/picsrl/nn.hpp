#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picsrl/common.hpp"

namespace picsrl::nn {

enum class Activation { relu, identity };
enum class Mode { train, infer };
enum class OptimizerKind { sgd_momentum, adam };

struct LayerSpec {
    Eigen::Index input_width = 1;
    Eigen::Index output_width = 1;
    Activation activation = Activation::relu;
    bool batch_norm = false;
    double dropout_rate = 0.0;
};

/// Dense layer: affine, then optional batch norm, activation, dropout.
/// `weight` is input_width x output_width so a batch (rows = samples)
/// maps as `X * weight + bias^T`.
struct Layer {
    LayerSpec spec;
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormDecay = 0.99;

/// Intermediate activations of one forward pass, kept for backprop.
struct ForwardTrace {
    Mode mode = Mode::infer;
    std::vector<Eigen::MatrixXd> inputs;      // input to each layer
    std::vector<Eigen::MatrixXd> normalized;  // x-hat (batch norm layers)
    std::vector<Eigen::RowVectorXd> batch_mean;
    std::vector<Eigen::RowVectorXd> batch_var;
    std::vector<Eigen::MatrixXd> pre_activation;  // after affine/bn
    std::vector<Eigen::MatrixXd> dropout_mask;    // empty when unused
    Eigen::MatrixXd output;
};

class Network {
public:
    Network() = default;
    /// Glorot-uniform weights, zero biases, unit gamma. Throws
    /// std::invalid_argument when widths do not chain.
    Network(std::vector<LayerSpec> specs, std::uint64_t seed);

    [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
    [[nodiscard]] std::vector<Layer>& layers() { return layers_; }
    [[nodiscard]] std::vector<LayerSpec> specs() const;
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] Eigen::Index input_width() const;
    [[nodiscard]] Eigen::Index output_width() const;
    [[nodiscard]] bool has_dropout() const;
    [[nodiscard]] bool has_batch_norm() const;

    /// Trainable parameters only (weights, biases, gamma, beta).
    [[nodiscard]] Eigen::Index parameter_count() const;
    [[nodiscard]] Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    [[nodiscard]] bool all_finite() const;

    /// Infer mode is a pure function of (network, batch). Train mode uses
    /// batch statistics and draws dropout masks from `rng` (required when
    /// any layer drops).
    [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& batch, Mode mode,
                                          Rng* rng = nullptr) const;
    [[nodiscard]] ForwardTrace forward_trace(const Eigen::MatrixXd& batch, Mode mode,
                                             Rng* rng = nullptr) const;
    /// Gradient of a loss w.r.t. the flat parameter vector, given dLoss/dOutput.
    [[nodiscard]] Eigen::VectorXd backward(const ForwardTrace& trace,
                                           const Eigen::MatrixXd& output_grad) const;
    void update_running_stats(const ForwardTrace& trace, double decay = kBatchNormDecay);

    /// Single-output convenience: first output column as a vector.
    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& batch) const;

    friend bool operator==(const Network&, const Network&);

private:
    void check_batch(const Eigen::MatrixXd& batch) const;

    std::vector<Layer> layers_;
    std::uint64_t seed_ = 0;
};

bool operator==(const Network& a, const Network& b);

/// Same as the Network constructor; named for symmetry with train().
Network init_network(std::vector<LayerSpec> specs, std::uint64_t seed);

/// Plain MLP: widths {in, h1, ..., out}, ReLU hidden layers, identity output.
std::vector<LayerSpec> mlp_specs(const std::vector<Eigen::Index>& widths, bool batch_norm = false,
                                 double dropout_rate = 0.0);

struct WeightedDataset {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;
    Eigen::VectorXd weights;

    [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
    void validate() const;
    static WeightedDataset uniform(Eigen::MatrixXd inputs, Eigen::VectorXd targets);
};

/// L = (1/N) sum_i w_i (y_i - yhat_i)^2
double weighted_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets,
                    const Eigen::VectorXd& weights);
/// Weighted loss of the network in infer mode over the whole dataset.
double weighted_loss(const Network& net, const WeightedDataset& data);

struct TrainHyper {
    int epochs = 200;
    Eigen::Index batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

struct TrainSummary {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
};

/// First-order optimizer over a flat parameter vector.
class Optimizer {
public:
    Optimizer(const TrainHyper& hyper, Eigen::Index parameter_count);
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

private:
    TrainHyper hyper_;
    Eigen::VectorXd first_;
    Eigen::VectorXd second_;
    long steps_ = 0;
};

/// Minibatch training on the weighted loss. Mutates `net` in place. Throws
/// NumericalError naming the epoch if the loss turns non-finite.
TrainSummary train(Network& net, const WeightedDataset& data, const TrainHyper& hyper);

struct GradientSample {
    Eigen::VectorXd input;
    double target = 0.0;
    double weight = 1.0;
};

/// Max relative error between backprop and central differences of the
/// weighted loss over every trainable parameter. Infer mode by default; train
/// mode is rejected when any layer uses dropout (the mask would change between
/// perturbations).
double gradient_check(const Network& net, const GradientSample& sample, double epsilon,
                      Mode mode = Mode::infer);
double gradient_check(const Network& net, const WeightedDataset& data, double epsilon,
                      Mode mode = Mode::infer);

// Checkpoints: JSON text, row-major flattened parameters. Round trip is
// exact for finite doubles.
std::string to_json(const Network& net);
Network network_from_json(const std::string& text);
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace picsrl::nn
