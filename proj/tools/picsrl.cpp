// picsrl command-line driver.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "picsrl/bench.hpp"

namespace fs = std::filesystem;
using namespace picsrl;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> episodes;
    std::optional<std::string> format;
};

ExperimentConfig resolve(const Globals& g, Scenario scenario) {
    ExperimentConfig c =
        g.config_path.empty() ? ExperimentConfig::defaults_for(scenario) : load_config(g.config_path, scenario);
    if (g.seed) c.seeds = {*g.seed};
    if (g.out) c.output_dir = *g.out;
    if (g.episodes) c.episodes = *g.episodes;
    if (g.format) c.format = *g.format;
    c.validate();
    fs::create_directories(c.output_dir);
    return c;
}

std::ofstream open_out(const ExperimentConfig& c, const std::string& name) {
    const fs::path path = fs::path(c.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    std::cout << "wrote " << path.string() << '\n';
    return out;
}

std::string ext(const ExperimentConfig& c) { return c.format == "json" ? ".json" : ".csv"; }

void print_table(const ReportTable& t) {
    std::printf("%-17s %-10s %10s %10s %10s %10s %10s\n", "policy", "status", "rmse", "sd", "detect", "return",
                "p_rmse");
    for (const auto& r : t.rows) {
        if (r.status != "ok") {
            std::printf("%-17s %-10s\n", r.policy.c_str(), r.status.c_str());
            continue;
        }
        std::printf("%-17s %-10s %10.4f %10.4f %10.3f %10.4f %10.4f\n", r.policy.c_str(), r.status.c_str(),
                    r.mean_rmse, r.rmse_sd, r.detection_rate, r.mean_return, r.p_rmse);
    }
    if (!t.note.empty()) std::printf("note: %s\n", t.note.c_str());
    std::printf("operational detection target (reference only): 0.95\n");
}

void report(const ExperimentConfig& c, const ReportTable& table, const std::vector<EpisodeRecord>& trace) {
    auto out = open_out(c, "report" + ext(c));
    if (c.format == "json")
        write_report_json(out, table);
    else
        write_report_csv(out, table);
    auto tr = open_out(c, "trace.csv");
    write_trace_header(tr);
    for (const auto& e : trace) write_trace_rows(tr, e.seed, e.policy, e.report);
    print_table(table);
}

Scene scene_for(const ExperimentConfig& c, const std::string& scene_path) {
    if (scene_path.empty()) return make_scene(c, c.seeds.front(), c.scene.deploy_shift);
    std::ifstream in(scene_path);
    if (!in) throw ConfigError("cannot read scene file " + scene_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return scene_from_json(buf.str());
}

BeliefEnsemble ensemble_for(const ExperimentConfig& c, const std::string& model_path) {
    if (model_path.empty()) return build_benchmark(c, c.seeds.front()).ensemble;
    std::ifstream in(model_path);
    if (!in) throw ConfigError("cannot read model file " + model_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return ensemble_from_json(buf.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"picsrl: physics-informed adaptive sampling benchmark"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "single experiment seed (overrides config seeds)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--episodes", g.episodes, "evaluation episodes per seed");
    app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"csv", "json"}));

    auto* gen = app.add_subcommand("generate-scene", "render one synthetic scene");
    Eigen::Index unlabeled = 0;
    gen->add_option("--unlabeled", unlabeled, "unlabeled pool size");

    auto* belief = app.add_subcommand("train-belief", "fit the bootstrap belief ensemble");
    auto* agent = app.add_subcommand("train-agent", "train the DQN sampling agent");
    auto* cmp = app.add_subcommand("compare", "N=8/K=3 policy comparison");
    auto* scale = app.add_subcommand("scale", "N=50/K=5 scalability study");
    auto* ablate = app.add_subcommand("ablate", "HDLSS feature ablation");
    auto* sens = app.add_subcommand("sensitivity", "reward-weight sensitivity scan");

    auto* oracle = app.add_subcommand("oracle", "exhaustive subset search");
    std::string scene_path, model_path;
    std::optional<Eigen::Index> budget;
    oracle->add_option("--scene", scene_path, "scene JSON (default: generated from --seed)");
    oracle->add_option("--model", model_path, "belief ensemble JSON (default: trained from --seed)");
    oracle->add_option("--budget", budget, "subset size K");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::policy_compare);
            Scene s = make_scene(c, c.seeds.front(), c.scene.deploy_shift);
            if (unlabeled > 0) {
                RenderOptions opts;
                opts.grid = s.grid;
                opts.model.delta_scale = c.scene.deploy_shift;
                opts.pool_scale = c.scene.field_scale;
                s = render_scene(s.field, unlabeled, c.scene.noise_sd, s.seed, opts);
            }
            open_out(c, "scene.json") << scene_to_json(s);
            auto truth = open_out(c, "truth.csv");
            write_truth_csv(truth, s);
        } else if (belief->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::policy_compare);
            const Benchmark b = build_benchmark(c, c.seeds.front());
            open_out(c, "belief.json") << ensemble_to_json(b.ensemble);
        } else if (agent->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::policy_compare);
            const Benchmark b = build_benchmark(c, c.seeds.front());
            const QPolicy p = dqn_train(b.training_scenes, b.belief, b.env(), c.dqn,
                                        derive_seed(b.seed, stream::dqn));
            open_out(c, "policy.json") << policy_to_json(p);
        } else if (cmp->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::policy_compare);
            std::vector<EpisodeRecord> trace;
            report(c, run_policy_compare(c, &trace), trace);
        } else if (scale->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::scalability);
            std::vector<EpisodeRecord> trace;
            report(c, run_scalability(c, &trace), trace);
        } else if (ablate->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::ablation);
            const auto rows = run_hdlss_ablation(c);
            auto out = open_out(c, "ablation" + ext(c));
            if (c.format == "json")
                write_ablation_json(out, rows);
            else
                write_ablation_csv(out, rows);
        } else if (sens->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::sensitivity);
            const auto rows = sensitivity_scan(c, c.sensitivity.grid);
            auto out = open_out(c, "sensitivity" + ext(c));
            if (c.format == "json")
                write_sensitivity_json(out, rows);
            else
                write_sensitivity_csv(out, rows);
        } else if (oracle->parsed()) {
            const ExperimentConfig c = resolve(g, Scenario::policy_compare);
            const Scene s = scene_for(c, scene_path);
            const BeliefPrediction bp = belief_predict(ensemble_for(c, model_path), s);
            const auto t0 = std::chrono::steady_clock::now();
            const OracleResult r = exhaustive_oracle(s, bp, budget.value_or(c.budget), c.oracle_cap);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const nlohmann::json j = {{"subset", r.best_subset},
                                      {"rmse", r.best_rmse},
                                      {"evaluated_count", r.evaluated_count},
                                      {"wall_time", wall}};
            open_out(c, "oracle.json") << j.dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
