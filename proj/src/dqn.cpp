#include <cmath>
#include <limits>

#include <json.hpp>

#include "picsrl/agents.hpp"

namespace picsrl {

namespace {

// Fixed-capacity ring of transitions; states stored already encoded.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, Eigen::Index state_width)
        : states_(static_cast<Eigen::Index>(capacity), state_width),
          next_states_(static_cast<Eigen::Index>(capacity), state_width),
          actions_(capacity),
          rewards_(capacity),
          dones_(capacity) {}

    void push(const Eigen::VectorXd& s, Eigen::Index a, double r, const Eigen::VectorXd& next, bool done) {
        const auto row = static_cast<Eigen::Index>(head_);
        states_.row(row) = s.transpose();
        next_states_.row(row) = next.transpose();
        actions_[head_] = a;
        rewards_[head_] = r;
        dones_[head_] = done;
        head_ = (head_ + 1) % actions_.size();
        size_ = std::min(size_ + 1, actions_.size());
    }

    [[nodiscard]] std::size_t size() const { return size_; }

    struct Batch {
        Eigen::MatrixXd states;
        Eigen::MatrixXd next_states;
        std::vector<Eigen::Index> actions;
        Eigen::VectorXd rewards;
        std::vector<bool> dones;
    };

    Batch sample(Eigen::Index count, Rng& rng) const {
        Batch b;
        b.states.resize(count, states_.cols());
        b.next_states.resize(count, states_.cols());
        b.rewards.resize(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            const std::size_t j = uniform_index(rng, size_);
            b.states.row(i) = states_.row(static_cast<Eigen::Index>(j));
            b.next_states.row(i) = next_states_.row(static_cast<Eigen::Index>(j));
            b.actions.push_back(actions_[j]);
            b.rewards(i) = rewards_[j];
            b.dones.push_back(dones_[j]);
        }
        return b;
    }

private:
    Eigen::MatrixXd states_;
    Eigen::MatrixXd next_states_;
    std::vector<Eigen::Index> actions_;
    std::vector<double> rewards_;
    std::vector<bool> dones_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

// Dueling heads: column 0 is V, columns 1..N are advantages;
// Q_a = V + A_a - mean(A).
Eigen::MatrixXd combine_dueling(const Eigen::MatrixXd& out) {
    const Eigen::Index n = out.cols() - 1;
    const Eigen::MatrixXd adv = out.rightCols(n);
    const Eigen::VectorXd mean_adv = adv.rowwise().mean();
    Eigen::MatrixXd q = adv;
    q.colwise() += out.col(0) - mean_adv;
    return q;
}

Eigen::MatrixXd dueling_output_grad(const Eigen::MatrixXd& dq) {
    const Eigen::Index n = dq.cols();
    Eigen::MatrixXd d_out(dq.rows(), n + 1);
    const Eigen::VectorXd total = dq.rowwise().sum();
    d_out.col(0) = total;
    d_out.rightCols(n) = dq;
    d_out.rightCols(n).colwise() -= total / static_cast<double>(n);
    return d_out;
}

// Mask lives in the last third of an encoded state.
bool encoded_visited(const Eigen::MatrixXd& states, Eigen::Index row, Eigen::Index stations, Eigen::Index a) {
    return states(row, 2 * stations + a) > 0.5;
}

}  // namespace

void DqnHyper::validate() const {
    if (episodes < 0) throw std::invalid_argument("episodes must be non-negative");
    if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in [0, 1]");
    if (replay_capacity < 1 || batch_size < 1) throw std::invalid_argument("replay capacity and batch must be >= 1");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
        throw std::invalid_argument("epsilon bounds must lie in [0, 1]");
    if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
        throw std::invalid_argument("epsilon decay fraction must lie in (0, 1]");
    if (target_sync_interval < 1) throw std::invalid_argument("target sync interval must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

Eigen::MatrixXd q_values(const nn::Network& net, const Eigen::MatrixXd& encoded_states, bool dueling) {
    const Eigen::MatrixXd out = net.forward(encoded_states, nn::Mode::infer);
    return dueling ? combine_dueling(out) : out;
}

Eigen::VectorXd q_values(const QPolicy& policy, const BeliefState& state) {
    if (state.size() != policy.stations) throw std::invalid_argument("state size differs from policy station count");
    return q_values(policy.q_net, state.encode().transpose(), policy.hyper.dueling).row(0).transpose();
}

QPolicy make_q_policy(Eigen::Index stations, const DqnHyper& hyper, std::uint64_t seed) {
    if (stations < 1) throw std::invalid_argument("policy needs at least one station");
    std::vector<Eigen::Index> widths{3 * stations};
    widths.insert(widths.end(), hyper.hidden.begin(), hyper.hidden.end());
    widths.push_back(hyper.dueling ? stations + 1 : stations);
    QPolicy p;
    p.q_net = nn::Network(nn::mlp_specs(widths), derive_seed(seed, stream::member));
    p.target_net = p.q_net;
    p.stations = stations;
    p.hyper = hyper;
    return p;
}

Eigen::Index dqn_select(const QPolicy& policy, const BeliefState& state) {
    if (!state.has_unvisited()) throw std::invalid_argument("every station has already been visited");
    return masked_argmax(q_values(policy, state), state.visited);
}

QPolicy dqn_train(const SceneGenerator& generate, const BeliefModel& belief, const EnvConfig& env,
                  const DqnHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    env.weights.validate();

    // The station count is fixed by the generator; probe it once.
    const Scene probe = generate(derive_seed(seed, 0));
    const Eigen::Index n = probe.station_count();
    if (env.budget < 1 || env.budget > n) throw std::invalid_argument("budget must lie in [1, N]");

    QPolicy policy = make_q_policy(n, hyper, seed);
    ReplayBuffer replay(hyper.replay_capacity, 3 * n);
    Rng rng(derive_seed(seed, stream::dqn));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    nn::TrainHyper opt_hyper;
    opt_hyper.optimizer = hyper.optimizer;
    opt_hyper.learning_rate = hyper.learning_rate;
    nn::Optimizer optimizer(opt_hyper, policy.q_net.parameter_count());
    Eigen::VectorXd params = policy.q_net.parameters();

    const double anneal_episodes = std::max(1.0, hyper.epsilon_decay_fraction * hyper.episodes);

    for (int episode = 0; episode < hyper.episodes; ++episode) {
        const double frac = std::min(1.0, episode / anneal_episodes);
        const double epsilon = hyper.epsilon_start + frac * (hyper.epsilon_end - hyper.epsilon_start);

        const Scene scene = episode == 0 ? probe : generate(derive_seed(seed, static_cast<std::uint64_t>(episode)));
        if (scene.station_count() != n) throw std::invalid_argument("scene generator changed the station count");
        BeliefState state = reset(scene, belief(scene), env.budget);

        while (!state.done()) {
            Eigen::Index action;
            if (unit(rng) < epsilon) {
                std::vector<Eigen::Index> open;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (!state.visited[static_cast<std::size_t>(i)]) open.push_back(i);
                action = open[uniform_index(rng, open.size())];
            } else {
                action = dqn_select(policy, state);
            }
            const Eigen::VectorXd encoded = state.encode();
            StepResult result = step(state, action, scene, env.weights);
            replay.push(encoded, action, result.reward.total, result.next.encode(), result.done);
            state = std::move(result.next);

            if (replay.size() < static_cast<std::size_t>(hyper.batch_size)) continue;

            const auto batch = replay.sample(hyper.batch_size, rng);
            const Eigen::Index b = hyper.batch_size;

            const Eigen::MatrixXd next_q = q_values(policy.target_net, batch.next_states, hyper.dueling);
            Eigen::VectorXd targets = batch.rewards;
            for (Eigen::Index i = 0; i < b; ++i) {
                if (batch.dones[static_cast<std::size_t>(i)]) continue;
                double best = -std::numeric_limits<double>::infinity();
                for (Eigen::Index a = 0; a < n; ++a)
                    if (!encoded_visited(batch.next_states, i, n, a)) best = std::max(best, next_q(i, a));
                if (std::isfinite(best)) targets(i) += hyper.discount * best;
            }

            const nn::ForwardTrace trace = policy.q_net.forward_trace(batch.states, nn::Mode::train);
            const Eigen::MatrixXd q = hyper.dueling ? combine_dueling(trace.output) : trace.output;
            Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(b, n);
            double loss = 0.0;
            for (Eigen::Index i = 0; i < b; ++i) {
                const Eigen::Index a = batch.actions[static_cast<std::size_t>(i)];
                const double err = targets(i) - q(i, a);
                loss += err * err;
                dq(i, a) = -2.0 * err / static_cast<double>(b);
            }
            loss /= static_cast<double>(b);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite TD loss in episode " + std::to_string(episode));

            const Eigen::MatrixXd d_out = hyper.dueling ? dueling_output_grad(dq) : dq;
            optimizer.step(params, policy.q_net.backward(trace, d_out));
            policy.q_net.set_parameters(params);
            if (!policy.q_net.all_finite())
                throw NumericalError("non-finite Q-network parameters in episode " + std::to_string(episode));

            if (++policy.updates % hyper.target_sync_interval == 0) policy.target_net = policy.q_net;
        }
    }
    return policy;
}

// ---------------------------------------------------------------------------

std::string policy_to_json(const QPolicy& policy) {
    using nlohmann::json;
    const auto& h = policy.hyper;
    json root;
    root["format"] = "picsrl.qpolicy";
    root["version"] = 1;
    root["stations"] = policy.stations;
    root["updates"] = policy.updates;
    root["hyper"] = {{"episodes", h.episodes},
                     {"discount", h.discount},
                     {"replay_capacity", h.replay_capacity},
                     {"batch_size", h.batch_size},
                     {"epsilon_start", h.epsilon_start},
                     {"epsilon_end", h.epsilon_end},
                     {"epsilon_decay_fraction", h.epsilon_decay_fraction},
                     {"target_sync_interval", h.target_sync_interval},
                     {"hidden", h.hidden},
                     {"optimizer", h.optimizer == nn::OptimizerKind::adam ? "adam" : "sgd_momentum"},
                     {"learning_rate", h.learning_rate},
                     {"dueling", h.dueling}};
    root["q_net"] = json::parse(nn::to_json(policy.q_net));
    root["target_net"] = json::parse(nn::to_json(policy.target_net));
    return root.dump(1);
}

QPolicy policy_from_json(const std::string& text) {
    using nlohmann::json;
    const json root = json::parse(text);
    if (root.at("format") != "picsrl.qpolicy" || root.at("version") != 1)
        throw std::runtime_error("not a version-1 policy file");
    QPolicy p;
    p.stations = root.at("stations").get<Eigen::Index>();
    p.updates = root.at("updates").get<long>();
    const auto& h = root.at("hyper");
    p.hyper.episodes = h.at("episodes").get<int>();
    p.hyper.discount = h.at("discount").get<double>();
    p.hyper.replay_capacity = h.at("replay_capacity").get<std::size_t>();
    p.hyper.batch_size = h.at("batch_size").get<Eigen::Index>();
    p.hyper.epsilon_start = h.at("epsilon_start").get<double>();
    p.hyper.epsilon_end = h.at("epsilon_end").get<double>();
    p.hyper.epsilon_decay_fraction = h.at("epsilon_decay_fraction").get<double>();
    p.hyper.target_sync_interval = h.at("target_sync_interval").get<int>();
    p.hyper.hidden = h.at("hidden").get<std::vector<Eigen::Index>>();
    p.hyper.optimizer =
        h.at("optimizer").get<std::string>() == "adam" ? nn::OptimizerKind::adam : nn::OptimizerKind::sgd_momentum;
    p.hyper.learning_rate = h.at("learning_rate").get<double>();
    p.hyper.dueling = h.at("dueling").get<bool>();
    p.q_net = nn::network_from_json(root.at("q_net").dump());
    p.target_net = nn::network_from_json(root.at("target_net").dump());
    const Eigen::Index expected_out = p.hyper.dueling ? p.stations + 1 : p.stations;
    if (p.q_net.input_width() != 3 * p.stations || p.q_net.output_width() != expected_out)
        throw std::runtime_error("policy network shape does not match its station count");
    return p;
}

}  // namespace picsrl
