#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "picsrl/bench.hpp"

namespace picsrl {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct YearData {
    WavelengthGrid grid;
    Eigen::MatrixXd spectra;
    Eigen::VectorXd truth;
    Eigen::MatrixXd pool;
};

// Station-days pooled from consecutive scenes of one "year".
YearData year_data(const ExperimentConfig& config, std::uint64_t year_seed, Eigen::Index rows, double shift,
                   Eigen::Index pool_count) {
    YearData y;
    y.spectra.resize(rows, 0);
    y.truth.resize(rows);
    Eigen::Index filled = 0;
    for (std::uint64_t day = 0; filled < rows; ++day) {
        const Scene s = make_scene(config, derive_seed(year_seed, day), shift);
        if (day == 0) {
            y.grid = s.grid;
            y.spectra.resize(rows, s.grid.size());
        }
        const Eigen::Index take = std::min(rows - filled, s.station_count());
        y.spectra.middleRows(filled, take) = s.spectra.topRows(take);
        y.truth.segment(filled, take) = s.field.truth.head(take);
        filled += take;
    }
    if (pool_count > 0) {
        const ConcentrationField field = generate_field(config.stations, config.scene.correlation_length,
                                                        derive_seed(year_seed, stream::pool));
        RenderOptions opts;
        opts.grid = y.grid;
        opts.model.delta_scale = shift;
        opts.pool_scale = config.scene.field_scale;
        y.pool = render_scene(field, pool_count, config.scene.noise_sd, derive_seed(year_seed, stream::pool), opts)
                     .unlabeled_pool;
    }
    return y;
}

// ---------------------------------------------------------------------------

struct Tally {
    std::vector<double> rmse;
    std::vector<double> detection;
    std::vector<double> returns;
    std::vector<double> spread;
    int bloom_episodes = 0;

    void add(const EpisodeReport& r, const Eigen::MatrixX2d& coords) {
        rmse.push_back(r.reconstruction_rmse);
        returns.push_back(r.episode_return());
        spread.push_back(selection_spread(coords, r.actions));
        if (r.bloom_present) {
            ++bloom_episodes;
            detection.push_back(r.bloom_detected ? 1.0 : 0.0);
        }
    }
};

PolicyRow summarize(const std::string& name, Tally&& t) {
    PolicyRow row;
    row.policy = name;
    row.episodes = static_cast<int>(t.rmse.size());
    row.mean_rmse = mean_of(t.rmse);
    row.rmse_sd = sd_of(t.rmse);
    row.detection_rate = t.bloom_episodes > 0 ? mean_of(t.detection) : 0.0;
    row.bloom_episodes = t.bloom_episodes;
    row.mean_return = mean_of(t.returns);
    row.mean_spread = mean_of(t.spread);
    row.rmse_samples = std::move(t.rmse);
    row.detection_samples = std::move(t.detection);
    row.return_samples = std::move(t.returns);
    return row;
}

double safe_p(const std::vector<double>& a, const std::vector<double>& b, int resamples, std::uint64_t seed) {
    if (a.size() < 2 || b.size() < 2) return 1.0;
    return permutation_test(a, b, resamples, seed);
}

std::uint64_t eval_scene_seed(std::uint64_t seed, int episode) {
    return derive_seed(derive_seed(seed, stream::episode), static_cast<std::uint64_t>(episode));
}

Selector subset_selector(std::vector<Eigen::Index> subset) {
    return [subset = std::move(subset)](const BeliefState& s) { return subset[static_cast<std::size_t>(s.step)]; };
}

QPolicy train_agent(const Benchmark& bench) {
    return dqn_train(bench.training_scenes, bench.belief, bench.env(), bench.config.dqn,
                     derive_seed(bench.seed, stream::dqn));
}

ReportTable compare(const ExperimentConfig& config, std::vector<EpisodeRecord>* trace) {
    config.validate();
    std::vector<std::string> names = kHeuristicPolicies;
    names.push_back("dqn");
    std::vector<Tally> tallies(names.size());
    Tally oracle_tally;

    const std::uint64_t subsets =
        binomial(static_cast<std::uint64_t>(config.stations), static_cast<std::uint64_t>(config.budget));
    const bool oracle_feasible = subsets <= config.oracle_cap;
    std::string oracle_note;

    for (const std::uint64_t seed : config.seeds) {
        const Benchmark bench = build_benchmark(config, seed);
        const QPolicy agent = train_agent(bench);
        for (int e = 0; e < config.episodes; ++e) {
            const Scene scene = bench.eval_scenes(eval_scene_seed(seed, e));
            const BeliefPrediction belief = bench.belief(scene);
            const auto& coords = scene.field.station_coords;
            for (std::size_t p = 0; p < names.size(); ++p) {
                Rng rng(derive_seed(derive_seed(scene.seed, stream::policy), p));
                const Selector select = names[p] == "dqn"
                                            ? Selector([&](const BeliefState& s) { return dqn_select(agent, s); })
                                            : heuristic_selector(names[p], scene, config, rng);
                EpisodeReport r = run_episode(scene, belief, config.budget, config.weights, select);
                tallies[p].add(r, coords);
                if (trace) trace->push_back({scene.seed, names[p], std::move(r)});
            }
            if (oracle_feasible) {
                const OracleResult best = exhaustive_oracle(scene, belief, config.budget, config.oracle_cap);
                EpisodeReport r =
                    run_episode(scene, belief, config.budget, config.weights, subset_selector(best.best_subset));
                oracle_tally.add(r, coords);
                if (trace) trace->push_back({scene.seed, "oracle", std::move(r)});
            }
        }
    }

    ReportTable table;
    table.scenario = to_string(config.scenario);
    for (std::size_t p = 0; p < names.size(); ++p) table.rows.push_back(summarize(names[p], std::move(tallies[p])));
    PolicyRow oracle;
    if (oracle_feasible) {
        oracle = summarize("oracle", std::move(oracle_tally));
    } else {
        oracle.policy = "oracle";
        oracle.status = "infeasible";
        table.note = "oracle infeasible: C(" + std::to_string(config.stations) + "," + std::to_string(config.budget) +
                     ") = " + std::to_string(subsets) + " subsets exceeds the cap of " +
                     std::to_string(config.oracle_cap);
    }
    table.rows.push_back(std::move(oracle));

    const PolicyRow& ref = table.row(table.reference);
    const std::uint64_t perm_seed = derive_seed(config.seeds.front(), stream::permutation);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        PolicyRow& row = table.rows[i];
        if (row.policy == table.reference || row.status != "ok") continue;
        row.p_rmse = safe_p(row.rmse_samples, ref.rmse_samples, config.permutation_resamples, derive_seed(perm_seed, 2 * i));
        row.p_detection = safe_p(row.detection_samples, ref.detection_samples, config.permutation_resamples,
                                 derive_seed(perm_seed, 2 * i + 1));
    }
    return table;
}

}  // namespace

// ---------------------------------------------------------------------------

Scene make_scene(const ExperimentConfig& config, std::uint64_t scene_seed, double shift) {
    const FieldOptions field_opts{config.scene.field_scale, config.scene.bloom_threshold, config.scene.layout};
    const ConcentrationField field =
        generate_field(config.stations, config.scene.correlation_length, scene_seed, field_opts);
    RenderOptions opts;
    opts.grid = WavelengthGrid::uniform(config.scene.bands);
    opts.model.delta_scale = shift;
    opts.pool_scale = config.scene.field_scale;
    return render_scene(field, 0, config.scene.noise_sd, scene_seed, opts);
}

void training_year(const ExperimentConfig& config, std::uint64_t seed, Eigen::Index rows, Eigen::MatrixXd& spectra,
                   Eigen::VectorXd& truth, WavelengthGrid& grid) {
    YearData y = year_data(config, seed, rows, 1.0, 0);
    spectra = std::move(y.spectra);
    truth = std::move(y.truth);
    grid = std::move(y.grid);
}

Benchmark build_benchmark(const ExperimentConfig& config, std::uint64_t seed) {
    Benchmark b;
    b.config = config;
    b.seed = seed;

    Eigen::MatrixXd spectra;
    Eigen::VectorXd truth;
    WavelengthGrid grid;
    training_year(config, derive_seed(seed, stream::training), config.belief.n_train, spectra, truth, grid);
    b.ensemble = fit_ensemble(extract_features(grid, spectra, config.feature_kind), truth, config.belief.ensemble,
                              derive_seed(seed, stream::bootstrap), config.feature_kind);

    const auto shared = std::make_shared<const BeliefEnsemble>(b.ensemble);
    b.belief = [shared](const Scene& s) { return belief_predict(*shared, s); };
    b.training_scenes = [config](std::uint64_t s) { return make_scene(config, s, config.scene.deploy_shift); };
    b.eval_scenes = b.training_scenes;
    return b;
}

Selector heuristic_selector(const std::string& name, const Scene& scene, const ExperimentConfig& config, Rng& rng) {
    const Eigen::MatrixX2d coords = scene.field.station_coords;
    const double threshold = scene.field.bloom_threshold;
    if (name == "random")
        return [coords, &rng](const BeliefState& s) { return baseline_select(s, BaselineKind::random, coords, rng); };
    if (name == "stratified") {
        const std::uint64_t kseed = scene.seed;
        return [coords, &rng, kseed](const BeliefState& s) {
            return baseline_select(s, BaselineKind::stratified, coords, rng, kseed);
        };
    }
    const auto greedy = [&](GreedyVariant v) -> Selector {
        return [coords, threshold, v](const BeliefState& s) { return greedy_select(s, v, coords, threshold); };
    };
    if (name == "greedy-intensity") return greedy(GreedyVariant::intensity);
    if (name == "greedy-risk") return greedy(GreedyVariant::risk);
    if (name == "greedy-spatial") return greedy(GreedyVariant::spatial);
    if (name == "ucb") {
        const double beta = config.ucb_beta;
        return [beta](const BeliefState& s) { return ucb_select(s, beta); };
    }
    throw ConfigError("unknown policy '" + name + "'");
}

const PolicyRow& ReportTable::row(const std::string& policy) const {
    for (const auto& r : rows)
        if (r.policy == policy) return r;
    throw std::out_of_range("no report row for policy '" + policy + "'");
}

ReportTable run_policy_compare(const ExperimentConfig& config, std::vector<EpisodeRecord>* trace) {
    if (config.scenario != Scenario::policy_compare) throw ConfigError("run_policy_compare needs scenario policy_compare");
    return compare(config, trace);
}

ReportTable run_scalability(const ExperimentConfig& config, std::vector<EpisodeRecord>* trace) {
    if (config.scenario != Scenario::scalability) throw ConfigError("run_scalability needs scenario scalability");
    return compare(config, trace);
}

double selection_spread(const Eigen::MatrixX2d& coords, const std::vector<Eigen::Index>& actions) {
    if (actions.size() < 2) return 0.0;
    double total = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < actions.size(); ++i)
        for (std::size_t j = i + 1; j < actions.size(); ++j) {
            total += (coords.row(actions[i]) - coords.row(actions[j])).norm();
            ++pairs;
        }
    return total / pairs;
}

// ---------------------------------------------------------------------------

void write_report_csv(std::ostream& out, const ReportTable& table) {
    out << "policy,status,episodes,mean_rmse,rmse_sd,detection_rate,bloom_episodes,mean_return,mean_spread,p_rmse,"
           "p_detection\n";
    for (const auto& r : table.rows) {
        out << r.policy << ',' << r.status << ',';
        if (r.status != "ok") {
            out << ",,,,,,,,\n";
            continue;
        }
        out << r.episodes << ',' << fmt(r.mean_rmse) << ',' << fmt(r.rmse_sd) << ',' << fmt(r.detection_rate) << ','
            << r.bloom_episodes << ',' << fmt(r.mean_return) << ',' << fmt(r.mean_spread) << ',' << fmt(r.p_rmse)
            << ',' << fmt(r.p_detection) << '\n';
    }
}

void write_report_json(std::ostream& out, const ReportTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) {
        json j = {{"policy", r.policy}, {"status", r.status}};
        if (r.status == "ok") {
            j["episodes"] = r.episodes;
            j["mean_rmse"] = r.mean_rmse;
            j["rmse_sd"] = r.rmse_sd;
            j["detection_rate"] = r.detection_rate;
            j["bloom_episodes"] = r.bloom_episodes;
            j["mean_return"] = r.mean_return;
            j["mean_spread"] = r.mean_spread;
            j["p_rmse"] = r.p_rmse;
            j["p_detection"] = r.p_detection;
        }
        rows.push_back(std::move(j));
    }
    const json doc = {{"scenario", table.scenario},
                      {"reference", table.reference},
                      {"detection_target", 0.95},
                      {"note", table.note},
                      {"rows", rows}};
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

std::vector<AblationRow> run_hdlss_ablation(const ExperimentConfig& config) {
    if (config.scenario != Scenario::ablation) throw ConfigError("run_hdlss_ablation needs scenario ablation");
    config.validate();
    const AblationConfig& a = config.ablation;
    std::vector<AblationRow> rows;
    for (const std::uint64_t seed : config.seeds) {
        const YearData train =
            year_data(config, derive_seed(seed, stream::training), a.n_train, 1.0, a.ssl ? a.unlabeled : 0);
        const YearData test = year_data(config, derive_seed(seed, stream::test_year), a.n_test, a.shift, 0);

        for (const FeatureKind kind : {FeatureKind::physics, FeatureKind::raw, FeatureKind::combined}) {
            const Eigen::MatrixXd xtr = extract_features(train.grid, train.spectra, kind);
            const Standardizer z = Standardizer::fit(xtr);
            const RidgeModel m = fit_ridge(z.apply(xtr), train.truth, a.reg);
            const Eigen::MatrixXd xte = z.apply(extract_features(test.grid, test.spectra, kind));
            rows.push_back({seed, to_string(kind), xtr.cols(), r_squared(m.predict(z.apply(xtr)), train.truth),
                            r_squared(m.predict(xte), test.truth)});
        }
        if (!a.ssl) continue;

        const Eigen::MatrixXd xtr = extract_features(train.grid, train.spectra, FeatureKind::physics);
        const Standardizer z = Standardizer::fit(xtr);
        const Eigen::MatrixXd ztr = z.apply(xtr);
        const Eigen::MatrixXd zte = z.apply(extract_features(test.grid, test.spectra, FeatureKind::physics));
        const RidgeModel teacher = fit_ridge(ztr, train.truth, a.reg);
        rows.push_back({seed, "teacher", ztr.cols(), r_squared(teacher.predict(ztr), train.truth),
                        r_squared(teacher.predict(zte), test.truth)});

        const PseudoLabeledSet pseudo =
            pseudo_label(teacher, z.apply(extract_features(train.grid, train.pool, FeatureKind::physics)), train.truth);
        StudentConfig sc = a.student;
        sc.hyper.seed = derive_seed(seed, stream::member);
        const nn::Network student =
            train_student(labeled_dataset(ztr, train.truth, sc.labeled_weight), pseudo, sc);
        rows.push_back({seed, "student", ztr.cols(), r_squared(student.predict(ztr).col(0), train.truth),
                        r_squared(student.predict(zte).col(0), test.truth)});
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "seed,model,dimension,train_r2,test_r2\n";
    for (const auto& r : rows)
        out << r.seed << ',' << r.model << ',' << r.dimension << ',' << fmt(r.train_r2) << ',' << fmt(r.test_r2)
            << '\n';
}

void write_ablation_json(std::ostream& out, const std::vector<AblationRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"seed", r.seed},
                       {"model", r.model},
                       {"dimension", r.dimension},
                       {"train_r2", r.train_r2},
                       {"test_r2", r.test_r2}});
    out << json{{"scenario", "ablation"}, {"rows", arr}}.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

std::vector<SensitivityRow> sensitivity_scan(const ExperimentConfig& config, const std::vector<RewardWeights>& grid) {
    if (grid.empty()) throw std::invalid_argument("sensitivity grid must be non-empty");
    config.validate();
    const bool use_dqn = config.sensitivity.policy == "dqn";

    std::vector<Tally> tallies(grid.size());
    for (const std::uint64_t seed : config.seeds) {
        const Benchmark bench = build_benchmark(config, seed);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            grid[g].validate();
            Benchmark variant = bench;
            variant.config.weights = grid[g];
            std::optional<QPolicy> agent;
            if (use_dqn) agent = train_agent(variant);
            for (int e = 0; e < config.episodes; ++e) {
                const Scene scene = bench.eval_scenes(eval_scene_seed(seed, e));
                const BeliefPrediction belief = bench.belief(scene);
                Rng rng(derive_seed(scene.seed, stream::policy));
                const Selector select =
                    use_dqn ? Selector([&](const BeliefState& s) { return dqn_select(*agent, s); })
                            : heuristic_selector(config.sensitivity.policy, scene, config, rng);
                tallies[g].add(run_episode(scene, belief, config.budget, grid[g], select), scene.field.station_coords);
            }
        }
    }
    std::vector<SensitivityRow> rows;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const PolicyRow p = summarize("", std::move(tallies[g]));
        rows.push_back({grid[g], p.mean_rmse, p.detection_rate, p.mean_return, p.mean_spread});
    }
    return rows;
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    out << "alpha,beta,gamma,mean_rmse,detection_rate,mean_return,mean_spread\n";
    for (const auto& r : rows)
        out << fmt(r.weights.alpha) << ',' << fmt(r.weights.beta) << ',' << fmt(r.weights.gamma) << ','
            << fmt(r.mean_rmse) << ',' << fmt(r.detection_rate) << ',' << fmt(r.mean_return) << ','
            << fmt(r.mean_spread) << '\n';
}

void write_sensitivity_json(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"alpha", r.weights.alpha},
                       {"beta", r.weights.beta},
                       {"gamma", r.weights.gamma},
                       {"mean_rmse", r.mean_rmse},
                       {"detection_rate", r.detection_rate},
                       {"mean_return", r.mean_return},
                       {"mean_spread", r.mean_spread}});
    out << json{{"scenario", "sensitivity"}, {"rows", arr}}.dump(2) << '\n';
}

}  // namespace picsrl
