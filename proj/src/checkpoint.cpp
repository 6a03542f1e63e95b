#include <fstream>
#include <sstream>

#include <json.hpp>

#include "picsrl/nn.hpp"

namespace picsrl::nn {

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j, Eigen::Index expected, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected)
        throw std::runtime_error(std::string("checkpoint field '") + what + "' has wrong length");
    return Eigen::Map<const Eigen::VectorXd>(values.data(), expected);
}

}  // namespace

std::string to_json(const Network& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) {
        json jl;
        jl["input_width"] = l.spec.input_width;
        jl["output_width"] = l.spec.output_width;
        jl["activation"] = l.spec.activation == Activation::relu ? "relu" : "identity";
        jl["batch_norm"] = l.spec.batch_norm;
        jl["dropout_rate"] = l.spec.dropout_rate;
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
        jl["weight"] = w;
        jl["bias"] = vec_json(l.bias);
        if (l.spec.batch_norm) {
            jl["gamma"] = vec_json(l.gamma);
            jl["beta"] = vec_json(l.beta);
            jl["running_mean"] = vec_json(l.running_mean);
            jl["running_var"] = vec_json(l.running_var);
        }
        layers.push_back(std::move(jl));
    }
    json root;
    root["format"] = "picsrl.network";
    root["version"] = 1;
    root["seed"] = net.seed();
    root["layers"] = std::move(layers);
    return root.dump(1);
}

Network network_from_json(const std::string& text) {
    const json root = json::parse(text);
    if (root.at("format") != "picsrl.network" || root.at("version") != 1)
        throw std::runtime_error("not a version-1 network checkpoint");

    std::vector<LayerSpec> specs;
    for (const auto& jl : root.at("layers")) {
        LayerSpec s;
        s.input_width = jl.at("input_width").get<Eigen::Index>();
        s.output_width = jl.at("output_width").get<Eigen::Index>();
        const auto act = jl.at("activation").get<std::string>();
        if (act == "relu")
            s.activation = Activation::relu;
        else if (act == "identity")
            s.activation = Activation::identity;
        else
            throw std::runtime_error("unknown activation '" + act + "'");
        s.batch_norm = jl.at("batch_norm").get<bool>();
        s.dropout_rate = jl.at("dropout_rate").get<double>();
        specs.push_back(s);
    }

    Network net(specs, root.at("seed").get<std::uint64_t>());
    auto& layers = net.layers();
    std::size_t i = 0;
    for (const auto& jl : root.at("layers")) {
        auto& l = layers[i++];
        const Eigen::VectorXd w = json_vec(jl.at("weight"), l.weight.size(), "weight");
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            l.weight.row(r) = w.segment(r * l.weight.cols(), l.weight.cols()).transpose();
        l.bias = json_vec(jl.at("bias"), l.bias.size(), "bias");
        if (l.spec.batch_norm) {
            l.gamma = json_vec(jl.at("gamma"), l.gamma.size(), "gamma");
            l.beta = json_vec(jl.at("beta"), l.beta.size(), "beta");
            l.running_mean = json_vec(jl.at("running_mean"), l.running_mean.size(), "running_mean");
            l.running_var = json_vec(jl.at("running_var"), l.running_var.size(), "running_var");
        }
    }
    return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << to_json(net) << '\n';
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return network_from_json(buffer.str());
}

}  // namespace picsrl::nn
