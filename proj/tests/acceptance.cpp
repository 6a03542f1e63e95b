// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance 4 5        run the listed criteria
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "picsrl/bench.hpp"
#include "picsrl/indices.hpp"

using namespace picsrl;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [miss]");
    }
};

std::string num(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

enum { CI, NDCI, MCI, FAI, PC, ChlRed, BG, GR, NIR, NDI };

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    return m;
}

// ---------------------------------------------------------------------------

Outcome numerical_core() {
    Outcome o;
    Rng rng(2024);
    double worst_grad = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int depth = 1 + static_cast<int>(uniform_index(rng, 3));
        std::vector<nn::LayerSpec> specs;
        Eigen::Index in = 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
        for (int l = 0; l < depth; ++l) {
            const bool last = l == depth - 1;
            const Eigen::Index out = last ? 1 : 1 + static_cast<Eigen::Index>(uniform_index(rng, 16));
            specs.push_back({in, out, last ? nn::Activation::identity : nn::Activation::relu, false, 0.0});
            in = out;
        }
        const nn::Network net(specs, 100 + static_cast<std::uint64_t>(t));
        nn::GradientSample s;
        s.input = gaussian(net.input_width(), 1, rng);
        s.target = standard_normal(rng);
        worst_grad = std::max(worst_grad, nn::gradient_check(net, s, 1e-5));
    }
    o.require(worst_grad < 1e-4, "gradient check max rel err " + num("%.2e", worst_grad) + " < 1e-4");

    double worst_ridge = 0.0;
    for (const double reg : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
        const Eigen::MatrixXd x = gaussian(98, 10, rng);
        const Eigen::VectorXd y = x * gaussian(10, 1, rng) + 0.5 * gaussian(98, 1, rng);
        const RidgeModel m = fit_ridge(x, y, reg);
        Eigen::MatrixXd a(98, 11);
        a << x, Eigen::VectorXd::Ones(98);
        Eigen::MatrixXd lhs = a.transpose() * a;
        lhs.topLeftCorner(10, 10).diagonal().array() += reg;
        const Eigen::VectorXd ref = lhs.fullPivLu().solve(a.transpose() * y);
        worst_ridge = std::max({worst_ridge, (m.weights - ref.head(10)).cwiseAbs().maxCoeff(),
                                std::abs(m.intercept - ref(10))});
    }
    o.require(worst_ridge < 1e-8, "ridge vs normal equations " + num("%.2e", worst_ridge) + " < 1e-8");

    const Eigen::MatrixXd x = gaussian(60, 10, rng);
    const Eigen::VectorXd y = x.col(0) + 0.3 * gaussian(60, 1, rng);
    EnsembleConfig ec;
    ec.members = 10;
    ec.hyper.epochs = 30;
    const BeliefEnsemble e = fit_ensemble(x, y, ec, 5);
    const Eigen::MatrixXd probe = gaussian(200, 10, rng);
    const BeliefPrediction bp = belief_predict(e, probe);
    const Eigen::MatrixXd members = member_predictions(e, probe);
    double worst_moment = 0.0;
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        double mean = 0.0;
        for (Eigen::Index m = 0; m < members.cols(); ++m) mean += members(i, m);
        mean /= static_cast<double>(members.cols());
        double var = 0.0;
        for (Eigen::Index m = 0; m < members.cols(); ++m) var += (members(i, m) - mean) * (members(i, m) - mean);
        const double sd = std::sqrt(var / static_cast<double>(members.cols()));
        worst_moment = std::max({worst_moment, std::abs(bp.mu(i) - mean), std::abs(bp.sigma(i) - sd)});
    }
    o.require(worst_moment < 1e-12, "ensemble moments vs recomputation " + num("%.2e", worst_moment) + " < 1e-12");
    return o;
}

Outcome index_suite() {
    Outcome o;
    bool exact = true;
    for (const double v : {1e-6, 0.003, 0.02, 0.5, 7.0})
        for (const auto& g : {WavelengthGrid::control(), WavelengthGrid::uniform(), WavelengthGrid::uniform(286)}) {
            const PhysicsFeatures f = compute_indices(Spectrum{g, Eigen::VectorXd::Constant(g.size(), v)});
            for (const int i : {CI, NDCI, MCI, FAI, NDI}) exact = exact && f(i) == 0.0;
            for (const int i : {PC, ChlRed, BG, GR, NIR}) exact = exact && f(i) == 1.0;
        }
    o.require(exact, "flat-spectrum identities exact on 3 grids");

    Rng rng(17);
    std::uniform_real_distribution<double> u(0.0005, 0.05), scale(0.01, 100.0);
    const WavelengthGrid g = WavelengthGrid::uniform();
    int held = 0;
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd r(g.size());
        for (auto& v : r) v = u(rng);
        const double k = scale(rng);
        const PhysicsFeatures a = compute_indices(g, r);
        const PhysicsFeatures b = compute_indices(g, (k * r).eval());
        bool ok = true;
        for (const int i : {NDCI, PC, ChlRed, BG, GR, NIR, NDI})
            ok = ok && std::abs(b(i) - a(i)) <= 1e-12 * std::max(1.0, std::abs(a(i)));
        for (const int i : {CI, MCI, FAI}) ok = ok && std::abs(b(i) - k * a(i)) <= 1e-12 * k * r.maxCoeff();
        held += ok;
    }
    o.require(held == 1000, "scale equivariance " + std::to_string(held) + "/1000 spectra");
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    int cases = 0, matched = 0;
    for (int n = 2; n <= 6; ++n)
        for (int k = 1; k <= std::min(n, 3); ++k)
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(10 * n + k));
                const Scene scene = render_scene(generate_field(n, 0.3, s), 0, 1e-4, s);
                Rng rng(s);
                Eigen::VectorXd mu = scene.field.truth;
                for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) += 0.3 * standard_normal(rng);
                const BeliefPrediction b{mu, Eigen::VectorXd::Constant(n, 0.1)};
                const OracleResult r = exhaustive_oracle(scene, b, k);
                const oracles::BruteForce bf = oracles::brute_force(scene, mu, k);
                ++cases;
                matched += r.best_subset == bf.subset && r.best_rmse == bf.rmse &&
                           r.evaluated_count == static_cast<std::uint64_t>(bf.count);
            }
    o.require(matched == cases, "brute-force agreement " + std::to_string(matched) + "/" + std::to_string(cases));

    const Scene s8 = render_scene(generate_field(8, 0.3, 8), 0, 1e-4, 8);
    const OracleResult r8 = exhaustive_oracle(s8, BeliefPrediction{s8.field.truth, Eigen::VectorXd::Zero(8)}, 3);
    o.require(r8.evaluated_count == 56, "C(8,3) enumerated " + std::to_string(r8.evaluated_count));
    return o;
}

Outcome policy_ordering() {
    Outcome o;
    const ReportTable t = run_policy_compare(ExperimentConfig::defaults_for(Scenario::policy_compare));
    const PolicyRow& dqn = t.row("dqn");
    const PolicyRow& ucb = t.row("ucb");
    const PolicyRow& rnd = t.row("random");
    const PolicyRow& orc = t.row("oracle");
    o.require(dqn.episodes == 500, std::to_string(dqn.episodes) + " episodes");
    o.require(dqn.mean_rmse <= ucb.mean_rmse,
              "dqn " + num("%.4f", dqn.mean_rmse) + " <= ucb " + num("%.4f", ucb.mean_rmse));
    o.require(ucb.mean_rmse <= rnd.mean_rmse,
              "ucb " + num("%.4f", ucb.mean_rmse) + " <= random " + num("%.4f", rnd.mean_rmse));
    o.require(dqn.mean_rmse < rnd.mean_rmse && rnd.p_rmse < 0.01, "dqn < random p=" + num("%.4f", rnd.p_rmse));
    o.require(dqn.mean_rmse <= ucb.mean_rmse && ucb.p_rmse < 0.05, "dqn <= ucb p=" + num("%.4f", ucb.p_rmse));
    o.require(dqn.mean_rmse <= 1.10 * orc.mean_rmse,
              "dqn/oracle " + num("%.3f", dqn.mean_rmse / orc.mean_rmse) + " <= 1.10");
    return o;
}

Outcome scalability() {
    Outcome o;
    const ExperimentConfig c = ExperimentConfig::defaults_for(Scenario::scalability);
    const ReportTable t = run_scalability(c);
    const PolicyRow& dqn = t.row("dqn");
    const PolicyRow& rnd = t.row("random");
    o.require(c.stations == 50 && c.budget == 5 && dqn.episodes == 200, "N=50 K=5 200 episodes");
    o.require(t.row("oracle").status == "infeasible" && t.note.find("2118760") != std::string::npos,
              "oracle infeasible, C(50,5)=2118760");
    const double gap = dqn.detection_rate - rnd.detection_rate;
    o.require(gap >= 0.40, "detection dqn " + num("%.3f", dqn.detection_rate) + " - random " +
                               num("%.3f", rnd.detection_rate) + " = " + num("%.3f", gap) + " >= 0.40");
    o.require(rnd.p_detection < 0.01, "p=" + num("%.4f", rnd.p_detection) + " < 0.01");
    return o;
}

Outcome hdlss_ablation() {
    Outcome o;
    ExperimentConfig c = ExperimentConfig::defaults_for(Scenario::ablation);
    c.ablation.ssl = false;
    o.require(c.scene.bands == 117 && c.ablation.n_train == 98 && c.ablation.n_test == 92 && c.seeds.size() == 20 &&
                  c.ablation.shift > 1.0,
              "117 bands, 98/92 rows, 20 seeds, shift " + num("%.2f", c.ablation.shift));
    const auto rows = run_hdlss_ablation(c);
    int wins = 0;
    double phys_gap = 0.0, raw_gap = 0.0;
    for (const std::uint64_t seed : c.seeds) {
        AblationRow phys, raw;
        for (const auto& r : rows) {
            if (r.seed != seed) continue;
            if (r.model == "physics") phys = r;
            if (r.model == "raw") raw = r;
        }
        wins += phys.test_r2 >= raw.test_r2;
        phys_gap += (phys.train_r2 - phys.test_r2) / static_cast<double>(c.seeds.size());
        raw_gap += (raw.train_r2 - raw.test_r2) / static_cast<double>(c.seeds.size());
    }
    o.require(wins >= 14, "physics test R2 >= raw in " + std::to_string(wins) + "/20 seeds (need 14)");
    o.require(raw_gap > phys_gap, "mean gap raw " + num("%.3f", raw_gap) + " > physics " + num("%.3f", phys_gap));
    return o;
}

Outcome ssl_property() {
    Outcome o;
    ExperimentConfig c = ExperimentConfig::defaults_for(Scenario::ablation);
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto rows = run_hdlss_ablation(c);
    std::vector<double> teacher, student;
    for (const auto& r : rows) {
        if (r.model == "teacher") teacher.push_back(r.test_r2);
        if (r.model == "student") student.push_back(r.test_r2);
    }
    o.require(teacher.size() == 10 && student.size() == 10, "10 seeds");
    o.require(mean_of(student) >= mean_of(teacher) - 0.03, "student test R2 " + num("%.3f", mean_of(student)) +
                                                               " >= teacher " + num("%.3f", mean_of(teacher)) +
                                                               " - 0.03");
    return o;
}

template <typename Writer>
std::string render(Writer w) {
    std::ostringstream out;
    w(out);
    return out.str();
}

Outcome contracts() {
    Outcome o;
    Rng rng(99);
    int legal = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(uniform_index(rng, 11));
        BeliefState st;
        st.mu = gaussian(n, 1, rng);
        st.sigma = gaussian(n, 1, rng).cwiseAbs();
        st.visited.assign(static_cast<std::size_t>(n), false);
        for (Eigen::Index i = 0; i < n; ++i)
            if (uniform01(rng) < 0.5) {
                st.visited[static_cast<std::size_t>(i)] = true;
                st.selected.push_back(i);
            }
        st.visited[uniform_index(rng, static_cast<std::size_t>(n))] = false;
        st.selected.erase(std::remove_if(st.selected.begin(), st.selected.end(),
                                         [&](Eigen::Index i) { return !st.visited[static_cast<std::size_t>(i)]; }),
                          st.selected.end());
        st.step = static_cast<Eigen::Index>(st.selected.size());
        st.budget = n;
        Eigen::MatrixX2d xy(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) xy.row(i) << uniform01(rng), uniform01(rng);
        DqnHyper h;
        h.hidden = {16, 16};
        h.dueling = t % 2 == 1;
        const QPolicy q = make_q_policy(n, h, static_cast<std::uint64_t>(t));
        const double thr = standard_normal(rng);
        const std::vector<Eigen::Index> picks{baseline_select(st, BaselineKind::random, xy, rng),
                                              baseline_select(st, BaselineKind::stratified, xy, rng,
                                                              static_cast<std::uint64_t>(t)),
                                              greedy_select(st, GreedyVariant::intensity, xy, thr),
                                              greedy_select(st, GreedyVariant::risk, xy, thr),
                                              greedy_select(st, GreedyVariant::spatial, xy, thr),
                                              ucb_select(st, 1.0),
                                              dqn_select(q, st)};
        bool ok = true;
        for (const Eigen::Index a : picks) ok = ok && a >= 0 && a < n && !st.visited[static_cast<std::size_t>(a)];
        legal += ok;
    }
    o.require(legal == trials, "legal selections in " + std::to_string(legal) + "/" + std::to_string(trials) +
                                   " randomized states x 7 policies");

    int clamped = 0;
    for (int t = 0; t < 50; ++t) {
        const Eigen::MatrixXd x = gaussian(40, 5, rng);
        const Eigen::VectorXd y = x.col(0) + 0.2 * gaussian(40, 1, rng);
        const RidgeModel teacher = fit_ridge(x, y, 0.5);
        const PseudoLabeledSet p = pseudo_label(teacher, 4.0 * gaussian(1000, 5, rng), y);
        clamped += p.labels.size() == 1000 && p.labels.minCoeff() >= y.minCoeff() && p.labels.maxCoeff() <= y.maxCoeff();
    }
    o.require(clamped == 50, "pseudo-labels within clamp range in " + std::to_string(clamped) + "/50 pools");

    ExperimentConfig cmp = ExperimentConfig::defaults_for(Scenario::policy_compare);
    cmp.episodes = 20;
    cmp.dqn.episodes = 100;
    ExperimentConfig sc = ExperimentConfig::defaults_for(Scenario::scalability);
    sc.episodes = 5;
    sc.dqn.episodes = 50;
    ExperimentConfig ab = ExperimentConfig::defaults_for(Scenario::ablation);
    ab.seeds = {1, 2};
    ab.ablation.unlabeled = 1000;
    ExperimentConfig sens = ExperimentConfig::defaults_for(Scenario::sensitivity);
    sens.episodes = 10;
    sens.dqn.episodes = 50;

    const std::vector<std::function<std::string()>> reports{
        [&] { return render([&](std::ostream& s) { write_report_csv(s, run_policy_compare(cmp)); }); },
        [&] { return render([&](std::ostream& s) { write_report_json(s, run_policy_compare(cmp)); }); },
        [&] { return render([&](std::ostream& s) { write_report_csv(s, run_scalability(sc)); }); },
        [&] { return render([&](std::ostream& s) { write_ablation_csv(s, run_hdlss_ablation(ab)); }); },
        [&] { return render([&](std::ostream& s) { write_ablation_json(s, run_hdlss_ablation(ab)); }); },
        [&] {
            return render([&](std::ostream& s) { write_sensitivity_csv(s, sensitivity_scan(sens, sens.sensitivity.grid)); });
        },
    };
    int identical = 0;
    for (const auto& make : reports) identical += make() == make();
    o.require(identical == static_cast<int>(reports.size()),
              "byte-identical reruns " + std::to_string(identical) + "/" + std::to_string(reports.size()) + " reports");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    Outcome (*run)();
};

const std::vector<Criterion> kCriteria{
    {1, "numerical core", 30, numerical_core},
    {2, "index suite", 10, index_suite},
    {3, "oracle equivalence", 60, oracle_equivalence},
    {4, "policy ordering N=8 K=3", 15 * 60, policy_ordering},
    {5, "scalability N=50 K=5", 30 * 60, scalability},
    {6, "HDLSS ablation", 5 * 60, hdlss_ablation},
    {7, "SSL student vs teacher", 10 * 60, ssl_property},
    {8, "contract suite", 2 * 60, contracts},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(secs < c.budget_seconds, "runtime " + num("%.1f", secs) + " s < " + num("%.0f", c.budget_seconds) + " s");
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
