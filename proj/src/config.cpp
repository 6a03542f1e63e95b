#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "picsrl/bench.hpp"

namespace picsrl {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects whatever is left over.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where() + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    [[nodiscard]] std::string path_of(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + where() + "." + key + "'");
    }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

nn::OptimizerKind optimizer_from(const std::string& s) {
    if (s == "adam") return nn::OptimizerKind::adam;
    if (s == "sgd_momentum") return nn::OptimizerKind::sgd_momentum;
    throw ConfigError("unknown optimizer '" + s + "'");
}

std::string optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd_momentum"; }

void read_train(const json& j, const std::string& path, nn::TrainHyper& h) {
    Reader r(j, path);
    r.get("epochs", h.epochs);
    r.get("batch_size", h.batch_size);
    r.get("learning_rate", h.learning_rate);
    r.get("momentum", h.momentum);
    std::string opt = optimizer_name(h.optimizer);
    r.get("optimizer", opt);
    h.optimizer = optimizer_from(opt);
    r.finish();
}

json train_json(const nn::TrainHyper& h) {
    return {{"epochs", h.epochs},
            {"batch_size", h.batch_size},
            {"learning_rate", h.learning_rate},
            {"momentum", h.momentum},
            {"optimizer", optimizer_name(h.optimizer)}};
}

RewardWeights weights_from(const json& j, const std::string& path) {
    RewardWeights w;
    if (j.is_array()) {
        if (j.size() != 3) throw ConfigError(path + ": weight triple needs three values");
        w = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } else {
        Reader r(j, path);
        r.get("alpha", w.alpha);
        r.get("beta", w.beta);
        r.get("gamma", w.gamma);
        r.finish();
    }
    try {
        w.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return w;
}

json weights_json(const RewardWeights& w) { return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}}; }

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::ablation: return "ablation";
        case Scenario::policy_compare: return "policy_compare";
        case Scenario::scalability: return "scalability";
        case Scenario::sensitivity: return "sensitivity";
    }
    return "policy_compare";
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "ablation") return Scenario::ablation;
    if (name == "policy_compare") return Scenario::policy_compare;
    if (name == "scalability") return Scenario::scalability;
    if (name == "sensitivity") return Scenario::sensitivity;
    throw ConfigError("unknown scenario '" + name + "'");
}

ExperimentConfig ExperimentConfig::defaults_for(Scenario scenario) {
    ExperimentConfig c;
    c.scenario = scenario;
    switch (scenario) {
        case Scenario::policy_compare:
            break;
        case Scenario::scalability:
            c.stations = 50;
            c.budget = 5;
            c.episodes = 200;
            c.weights = {0.0, 1.0, 0.0};
            c.dqn.hidden = {128, 128};
            c.dqn.episodes = 10000;
            c.dqn.discount = 0.9;
            break;
        case Scenario::ablation:
            c.episodes = 1;
            c.seeds.clear();
            for (std::uint64_t s = 1; s <= 20; ++s) c.seeds.push_back(s);
            break;
        case Scenario::sensitivity:
            c.episodes = 200;
            c.dqn.episodes = 1500;
            break;
    }
    return c;
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (episodes < 1) fail("episodes must be >= 1");
    if (seeds.empty()) fail("seeds must be non-empty");
    if (stations < 2) fail("stations must be >= 2");
    if (budget < 1 || budget > stations) fail("budget must lie in [1, stations]");
    if (format != "csv" && format != "json") fail("format must be csv or json");
    if (permutation_resamples < 1000) fail("permutation_resamples must be >= 1000");
    if (!(scene.correlation_length > 0.0)) fail("scene.correlation_length must be positive");
    if (!(scene.field_scale > 0.0)) fail("scene.field_scale must be positive");
    if (!(scene.noise_sd >= 0.0)) fail("scene.noise_sd must be non-negative");
    if (scene.bands < 11 || scene.bands > 286) fail("scene.bands must lie in [11, 286]");
    if (scene.layout == StationLayout::preset8 && stations != 8) fail("preset8 layout requires 8 stations");
    if (belief.n_train < 2) fail("belief.n_train must be >= 2");
    if (belief.ensemble.members < 1) fail("belief.members must be >= 1");
    if (ablation.n_train < 2 || ablation.n_test < 2) fail("ablation sample sizes must be >= 2");
    if (!(ablation.reg > 0.0)) fail("ablation.reg must be positive");
    if (sensitivity.grid.empty()) fail("sensitivity.grid must be non-empty");
    try {
        weights.validate();
        dqn.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

ExperimentConfig parse_config(const std::string& text, std::optional<Scenario> scenario) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Reader r(root, "");
    int version = 0;
    r.get("schema_version", version);
    if (version != kConfigSchemaVersion)
        throw ConfigError("config schema_version must be " + std::to_string(kConfigSchemaVersion));

    std::string scenario_name = scenario ? to_string(*scenario) : "policy_compare";
    r.get("scenario", scenario_name);
    const Scenario sc = scenario_from_string(scenario_name);
    if (scenario && *scenario != sc)
        throw ConfigError("config scenario '" + scenario_name + "' does not match the command");

    ExperimentConfig c = ExperimentConfig::defaults_for(sc);
    r.get("stations", c.stations);
    r.get("budget", c.budget);
    r.get("episodes", c.episodes);
    r.get("seeds", c.seeds);
    if (const json* w = r.child("weights")) c.weights = weights_from(*w, "weights");
    std::string kind = to_string(c.feature_kind);
    r.get("feature_kind", kind);
    try {
        c.feature_kind = feature_kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    r.get("output_dir", c.output_dir);
    r.get("format", c.format);
    r.get("ucb_beta", c.ucb_beta);
    r.get("oracle_cap", c.oracle_cap);
    r.get("permutation_resamples", c.permutation_resamples);

    if (const json* j = r.child("scene")) {
        Reader s(*j, "scene");
        s.get("correlation_length", c.scene.correlation_length);
        s.get("field_scale", c.scene.field_scale);
        s.get("bloom_threshold", c.scene.bloom_threshold);
        std::string layout = c.scene.layout == StationLayout::preset8 ? "preset8" : "halton";
        s.get("layout", layout);
        if (layout == "halton")
            c.scene.layout = StationLayout::halton;
        else if (layout == "preset8")
            c.scene.layout = StationLayout::preset8;
        else
            throw ConfigError("unknown scene.layout '" + layout + "'");
        s.get("noise_sd", c.scene.noise_sd);
        s.get("bands", c.scene.bands);
        s.get("deploy_shift", c.scene.deploy_shift);
        s.finish();
    }
    if (const json* j = r.child("belief")) {
        Reader b(*j, "belief");
        b.get("n_train", c.belief.n_train);
        b.get("members", c.belief.ensemble.members);
        b.get("hidden", c.belief.ensemble.hidden);
        b.get("bootstrap", c.belief.ensemble.bootstrap);
        if (const json* t = b.child("train")) read_train(*t, b.path_of("train"), c.belief.ensemble.hyper);
        b.finish();
    }
    if (const json* j = r.child("dqn")) {
        Reader d(*j, "dqn");
        d.get("episodes", c.dqn.episodes);
        d.get("discount", c.dqn.discount);
        d.get("replay_capacity", c.dqn.replay_capacity);
        d.get("batch_size", c.dqn.batch_size);
        d.get("epsilon_start", c.dqn.epsilon_start);
        d.get("epsilon_end", c.dqn.epsilon_end);
        d.get("epsilon_decay_fraction", c.dqn.epsilon_decay_fraction);
        d.get("target_sync_interval", c.dqn.target_sync_interval);
        d.get("hidden", c.dqn.hidden);
        std::string opt = optimizer_name(c.dqn.optimizer);
        d.get("optimizer", opt);
        c.dqn.optimizer = optimizer_from(opt);
        d.get("learning_rate", c.dqn.learning_rate);
        d.get("dueling", c.dqn.dueling);
        d.finish();
    }
    if (const json* j = r.child("ablation")) {
        Reader a(*j, "ablation");
        a.get("n_train", c.ablation.n_train);
        a.get("n_test", c.ablation.n_test);
        a.get("shift", c.ablation.shift);
        a.get("unlabeled", c.ablation.unlabeled);
        a.get("reg", c.ablation.reg);
        a.get("ssl", c.ablation.ssl);
        if (const json* sj = a.child("student")) {
            Reader st(*sj, "ablation.student");
            st.get("hidden", c.ablation.student.hidden);
            st.get("batch_norm", c.ablation.student.batch_norm);
            st.get("dropout_rate", c.ablation.student.dropout_rate);
            st.get("labeled_weight", c.ablation.student.labeled_weight);
            if (const json* t = st.child("train")) read_train(*t, "ablation.student.train", c.ablation.student.hyper);
            st.finish();
        }
        a.finish();
    }
    if (const json* j = r.child("sensitivity")) {
        Reader s(*j, "sensitivity");
        if (const json* g = s.child("grid")) {
            if (!g->is_array()) throw ConfigError("sensitivity.grid must be an array");
            c.sensitivity.grid.clear();
            for (const auto& w : *g) c.sensitivity.grid.push_back(weights_from(w, "sensitivity.grid[]"));
        }
        s.get("policy", c.sensitivity.policy);
        s.finish();
    }
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<Scenario> scenario) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), scenario);
}

std::string config_to_json(const ExperimentConfig& c) {
    json grid = json::array();
    for (const auto& w : c.sensitivity.grid) grid.push_back({w.alpha, w.beta, w.gamma});
    json root = {
        {"schema_version", kConfigSchemaVersion},
        {"scenario", to_string(c.scenario)},
        {"stations", c.stations},
        {"budget", c.budget},
        {"episodes", c.episodes},
        {"seeds", c.seeds},
        {"weights", weights_json(c.weights)},
        {"feature_kind", to_string(c.feature_kind)},
        {"output_dir", c.output_dir},
        {"format", c.format},
        {"ucb_beta", c.ucb_beta},
        {"oracle_cap", c.oracle_cap},
        {"permutation_resamples", c.permutation_resamples},
        {"scene",
         {{"correlation_length", c.scene.correlation_length},
          {"field_scale", c.scene.field_scale},
          {"bloom_threshold", c.scene.bloom_threshold},
          {"layout", c.scene.layout == StationLayout::preset8 ? "preset8" : "halton"},
          {"noise_sd", c.scene.noise_sd},
          {"bands", c.scene.bands},
          {"deploy_shift", c.scene.deploy_shift}}},
        {"belief",
         {{"n_train", c.belief.n_train},
          {"members", c.belief.ensemble.members},
          {"hidden", c.belief.ensemble.hidden},
          {"bootstrap", c.belief.ensemble.bootstrap},
          {"train", train_json(c.belief.ensemble.hyper)}}},
        {"dqn",
         {{"episodes", c.dqn.episodes},
          {"discount", c.dqn.discount},
          {"replay_capacity", c.dqn.replay_capacity},
          {"batch_size", c.dqn.batch_size},
          {"epsilon_start", c.dqn.epsilon_start},
          {"epsilon_end", c.dqn.epsilon_end},
          {"epsilon_decay_fraction", c.dqn.epsilon_decay_fraction},
          {"target_sync_interval", c.dqn.target_sync_interval},
          {"hidden", c.dqn.hidden},
          {"optimizer", optimizer_name(c.dqn.optimizer)},
          {"learning_rate", c.dqn.learning_rate},
          {"dueling", c.dqn.dueling}}},
        {"ablation",
         {{"n_train", c.ablation.n_train},
          {"n_test", c.ablation.n_test},
          {"shift", c.ablation.shift},
          {"unlabeled", c.ablation.unlabeled},
          {"reg", c.ablation.reg},
          {"ssl", c.ablation.ssl},
          {"student",
           {{"hidden", c.ablation.student.hidden},
            {"batch_norm", c.ablation.student.batch_norm},
            {"dropout_rate", c.ablation.student.dropout_rate},
            {"labeled_weight", c.ablation.student.labeled_weight},
            {"train", train_json(c.ablation.student.hyper)}}}}},
        {"sensitivity", {{"grid", grid}, {"policy", c.sensitivity.policy}}},
    };
    return root.dump(2);
}

}  // namespace picsrl
