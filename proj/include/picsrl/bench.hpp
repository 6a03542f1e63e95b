#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picsrl/agents.hpp"
#include "picsrl/belief.hpp"
#include "picsrl/env.hpp"
#include "picsrl/spectra.hpp"

namespace picsrl {

enum class Scenario { ablation, policy_compare, scalability, sensitivity };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// Synthetic lake used by every scenario.
struct SceneConfig {
    double correlation_length = 0.3;
    double field_scale = 0.4;
    double bloom_threshold = 1.5;
    StationLayout layout = StationLayout::halton;
    double noise_sd = 2e-4;
    Eigen::Index bands = 117;
    /// Bloom-signature scale of deployment scenes relative to the training year.
    double deploy_shift = 1.0;
};

struct BeliefConfig {
    Eigen::Index n_train = 98;
    EnsembleConfig ensemble{};
};

struct AblationConfig {
    Eigen::Index n_train = 98;
    Eigen::Index n_test = 92;
    double shift = 1.15;
    Eigen::Index unlabeled = 10000;
    double reg = 1.0;
    bool ssl = true;
    StudentConfig student{};
};

struct SensitivityConfig {
    std::vector<RewardWeights> grid{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.5, 0.25}};
    /// "dqn" trains an agent per weight triple; any heuristic name evaluates it instead.
    std::string policy = "dqn";
};

struct ExperimentConfig {
    Scenario scenario = Scenario::policy_compare;
    Eigen::Index stations = 8;
    Eigen::Index budget = 3;
    int episodes = 500;
    std::vector<std::uint64_t> seeds{1};
    RewardWeights weights{};
    FeatureKind feature_kind = FeatureKind::physics;
    std::string output_dir = "out";
    std::string format = "csv";
    double ucb_beta = 1.0;
    std::uint64_t oracle_cap = kDefaultEnumerationCap;
    int permutation_resamples = 10000;

    SceneConfig scene{};
    BeliefConfig belief{};
    DqnHyper dqn{};
    AblationConfig ablation{};
    SensitivityConfig sensitivity{};

    void validate() const;
    /// Defaults for a scenario (N=8/K=3, N=50/K=5, ...).
    static ExperimentConfig defaults_for(Scenario scenario);
};

inline constexpr int kConfigSchemaVersion = 1;

/// JSON config with a `schema_version`; unknown keys raise ConfigError.
/// Missing keys keep the scenario defaults.
ExperimentConfig parse_config(const std::string& text, std::optional<Scenario> scenario = std::nullopt);
ExperimentConfig load_config(const std::string& path, std::optional<Scenario> scenario = std::nullopt);
std::string config_to_json(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Statistics

/// Two-sided permutation test on |mean(a) - mean(b)|:
///   p = (1 + #{|permuted diff| >= observed}) / (resamples + 1)
/// An all-equal pooled sample returns 1.
double permutation_test(const std::vector<double>& a, const std::vector<double>& b, int resamples, std::uint64_t seed);

double mean_of(const std::vector<double>& v);
/// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double>& v);

// ---------------------------------------------------------------------------
// Benchmark setup shared by the RL scenarios

struct Benchmark {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    BeliefEnsemble ensemble;
    SceneGenerator training_scenes;  // scenes the agent trains on
    SceneGenerator eval_scenes;      // held-out evaluation scenes
    BeliefModel belief;

    [[nodiscard]] EnvConfig env() const { return {config.budget, config.weights}; }
};

/// Renders one deployment scene for the given scene seed.
Scene make_scene(const ExperimentConfig& config, std::uint64_t scene_seed, double shift);
/// Labeled station-days pooled from training-year scenes.
void training_year(const ExperimentConfig& config, std::uint64_t seed, Eigen::Index rows, Eigen::MatrixXd& spectra,
                   Eigen::VectorXd& truth, WavelengthGrid& grid);

Benchmark build_benchmark(const ExperimentConfig& config, std::uint64_t seed);

inline const std::vector<std::string> kHeuristicPolicies{"random", "stratified", "greedy-intensity", "greedy-risk",
                                                         "greedy-spatial", "ucb"};

/// Selector for a heuristic by name; `rng` must outlive the selector.
Selector heuristic_selector(const std::string& name, const Scene& scene, const ExperimentConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Reports

struct PolicyRow {
    std::string policy;
    std::string status = "ok";
    int episodes = 0;
    double mean_rmse = 0.0;
    double rmse_sd = 0.0;
    double detection_rate = 0.0;
    int bloom_episodes = 0;
    double mean_return = 0.0;
    double mean_spread = 0.0;
    double p_rmse = 1.0;       // vs the reference policy (DQN)
    double p_detection = 1.0;  // vs the reference policy (DQN)
    std::vector<double> rmse_samples;
    std::vector<double> detection_samples;  // bloom episodes only, 0/1
    std::vector<double> return_samples;
};

struct ReportTable {
    std::string scenario;
    std::string reference = "dqn";
    std::vector<PolicyRow> rows;
    std::string note;

    [[nodiscard]] const PolicyRow& row(const std::string& policy) const;
};

void write_report_csv(std::ostream& out, const ReportTable& table);
void write_report_json(std::ostream& out, const ReportTable& table);

struct EpisodeRecord {
    std::uint64_t seed = 0;
    std::string policy;
    EpisodeReport report;
};

/// N/K policy comparison with the oracle row. `trace` (optional) receives
/// every episode for the CSV trace export.
ReportTable run_policy_compare(const ExperimentConfig& config, std::vector<EpisodeRecord>* trace = nullptr);
/// Same policy set minus the oracle, which is reported as infeasible when
/// C(N, K) exceeds the enumeration cap.
ReportTable run_scalability(const ExperimentConfig& config, std::vector<EpisodeRecord>* trace = nullptr);

struct AblationRow {
    std::uint64_t seed = 0;
    std::string model;  // physics | raw | combined | teacher | student
    Eigen::Index dimension = 0;
    double train_r2 = 0.0;
    double test_r2 = 0.0;
};

std::vector<AblationRow> run_hdlss_ablation(const ExperimentConfig& config);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_ablation_json(std::ostream& out, const std::vector<AblationRow>& rows);

struct SensitivityRow {
    RewardWeights weights;
    double mean_rmse = 0.0;
    double detection_rate = 0.0;
    double mean_return = 0.0;
    double mean_spread = 0.0;
};

std::vector<SensitivityRow> sensitivity_scan(const ExperimentConfig& config, const std::vector<RewardWeights>& grid);
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);
void write_sensitivity_json(std::ostream& out, const std::vector<SensitivityRow>& rows);

/// Mean pairwise distance between the selected stations.
double selection_spread(const Eigen::MatrixX2d& coords, const std::vector<Eigen::Index>& actions);

}  // namespace picsrl
