#include "picsrl/spectra.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

namespace picsrl {

namespace {

// Piecewise-linear table lookup, constant beyond the ends.
double table_at(const std::array<double, 10>& nm, const std::array<double, 10>& values, double x) {
    if (x <= nm.front()) return values.front();
    if (x >= nm.back()) return values.back();
    std::size_t hi = 1;
    while (nm[hi] < x) ++hi;
    const std::size_t lo = hi - 1;
    const double t = (x - nm[lo]) / (nm[hi] - nm[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

double radical_inverse(Eigen::Index i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

}  // namespace

void WavelengthGrid::validate() const {
    if (wavelengths_nm.size() < 2) throw std::invalid_argument("wavelength grid needs at least two bands");
    for (Eigen::Index i = 1; i < wavelengths_nm.size(); ++i)
        if (!(wavelengths_nm(i) > wavelengths_nm(i - 1)))
            throw std::invalid_argument("wavelength grid must be strictly increasing");
}

WavelengthGrid WavelengthGrid::uniform(Eigen::Index band_count, double first_nm, double last_nm,
                                       double swir_nm) {
    if (band_count < 3) throw std::invalid_argument("uniform grid needs at least three bands");
    if (!(swir_nm > last_nm)) throw std::invalid_argument("SWIR anchor must lie beyond the visible range");
    WavelengthGrid g;
    g.wavelengths_nm.resize(band_count);
    g.wavelengths_nm.head(band_count - 1) = Eigen::VectorXd::LinSpaced(band_count - 1, first_nm, last_nm);
    g.wavelengths_nm(band_count - 1) = swir_nm;
    return g;
}

WavelengthGrid WavelengthGrid::control() {
    WavelengthGrid g;
    g.wavelengths_nm = Eigen::Map<const Eigen::VectorXd>(ForwardModel::kControlNm.data(), 10);
    return g;
}

Eigen::VectorXd ForwardModel::clear_water(const WavelengthGrid& grid) const {
    return grid.wavelengths_nm.unaryExpr([](double nm) { return table_at(kControlNm, kClearWater, nm); });
}

Eigen::VectorXd ForwardModel::bloom_delta(const WavelengthGrid& grid) const {
    return delta_scale *
           grid.wavelengths_nm.unaryExpr([](double nm) { return table_at(kControlNm, kBloomDelta, nm); });
}

double ConcentrationField::diameter() const {
    double best = 0.0;
    for (Eigen::Index i = 0; i < station_coords.rows(); ++i)
        for (Eigen::Index j = i + 1; j < station_coords.rows(); ++j)
            best = std::max(best, (station_coords.row(i) - station_coords.row(j)).norm());
    return best;
}

Eigen::MatrixX2d halton_layout(Eigen::Index n) {
    Eigen::MatrixX2d coords(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        coords(i, 0) = radical_inverse(i + 1, 2);
        coords(i, 1) = radical_inverse(i + 1, 3);
    }
    return coords;
}

Eigen::MatrixX2d preset8_layout() {
    Eigen::MatrixX2d coords(8, 2);
    coords << 0.10, 0.55,
              0.25, 0.80,
              0.30, 0.35,
              0.45, 0.60,
              0.55, 0.20,
              0.65, 0.75,
              0.80, 0.45,
              0.90, 0.15;
    return coords;
}

ConcentrationField generate_field(Eigen::Index n_stations, double correlation_length, std::uint64_t seed,
                                  const FieldOptions& options) {
    if (n_stations < 2) throw std::invalid_argument("a field needs at least two stations");
    if (!(correlation_length > 0.0)) throw std::invalid_argument("correlation length must be positive");
    if (!(options.scale > 0.0)) throw std::invalid_argument("field scale must be positive");

    ConcentrationField field;
    field.bloom_threshold = options.bloom_threshold;
    if (options.layout == StationLayout::preset8) {
        if (n_stations != 8) throw std::invalid_argument("preset8 layout has exactly 8 stations");
        field.station_coords = preset8_layout();
    } else {
        field.station_coords = halton_layout(n_stations);
    }

    Eigen::MatrixXd cov(n_stations, n_stations);
    for (Eigen::Index i = 0; i < n_stations; ++i)
        for (Eigen::Index j = 0; j < n_stations; ++j)
            cov(i, j) = std::exp(-(field.station_coords.row(i) - field.station_coords.row(j)).norm() /
                                 correlation_length);
    cov.diagonal().array() += 1e-10;

    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("field covariance is not positive definite after jitter");

    Rng rng(derive_seed(seed, stream::field));
    Eigen::VectorXd white(n_stations);
    for (Eigen::Index i = 0; i < n_stations; ++i) white(i) = standard_normal(rng);
    const Eigen::VectorXd g = llt.matrixL() * white;
    field.truth = options.scale * g.array().exp();
    return field;
}

Eigen::RowVectorXd reflectance_row(double concentration, double noise_sd, Rng& rng,
                                   const Eigen::VectorXd& clear_water, const Eigen::VectorXd& delta,
                                   const ForwardModel& model) {
    if (!(concentration >= 0.0)) throw std::invalid_argument("concentration must be non-negative");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise sd must be non-negative");
    const double u = model.saturation(concentration);
    Eigen::RowVectorXd row = (clear_water + u * delta).transpose();
    if (noise_sd > 0.0)
        for (Eigen::Index b = 0; b < row.size(); ++b) row(b) += noise_sd * standard_normal(rng);
    return row.cwiseMax(0.0);
}

Spectrum reflectance_of(double concentration, double noise_sd, std::uint64_t seed, const WavelengthGrid& grid,
                        const ForwardModel& model) {
    grid.validate();
    Rng rng(derive_seed(seed, stream::noise));
    Spectrum s{grid, {}};
    s.reflectance = reflectance_row(concentration, noise_sd, rng, model.clear_water(grid),
                                    model.bloom_delta(grid), model)
                        .transpose();
    return s;
}

Spectrum Scene::station_spectrum(Eigen::Index i) const { return {grid, spectra.row(i).transpose()}; }

Scene render_scene(const ConcentrationField& field, Eigen::Index unlabeled_count, double noise_sd,
                   std::uint64_t seed, const RenderOptions& options) {
    if (unlabeled_count < 0) throw std::invalid_argument("unlabeled count must be non-negative");
    options.grid.validate();

    Scene scene;
    scene.field = field;
    scene.grid = options.grid;
    scene.seed = seed;

    const Eigen::VectorXd water = options.model.clear_water(options.grid);
    const Eigen::VectorXd delta = options.model.bloom_delta(options.grid);

    Rng noise(derive_seed(seed, stream::noise));
    scene.spectra.resize(field.size(), options.grid.size());
    for (Eigen::Index i = 0; i < field.size(); ++i)
        scene.spectra.row(i) = reflectance_row(field.truth(i), noise_sd, noise, water, delta, options.model);

    Rng pool(derive_seed(seed, stream::pool));
    scene.unlabeled_pool.resize(unlabeled_count, options.grid.size());
    for (Eigen::Index i = 0; i < unlabeled_count; ++i) {
        const double c = options.pool_scale * std::exp(standard_normal(pool));
        scene.unlabeled_pool.row(i) = reflectance_row(c, noise_sd, pool, water, delta, options.model);
    }
    return scene;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json matrix_rows(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd rows_matrix(const json& rows, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    Eigen::Index r = 0;
    for (const auto& jr : rows) {
        const auto row = jr.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw std::runtime_error("ragged matrix in scene file");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
        ++r;
    }
    return m;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
    json root;
    root["format"] = "picsrl.scene";
    root["version"] = 1;
    root["seed"] = scene.seed;
    root["bloom_threshold"] = scene.field.bloom_threshold;
    json stations = json::array();
    for (Eigen::Index i = 0; i < scene.station_count(); ++i)
        stations.push_back({{"x", scene.field.station_coords(i, 0)},
                            {"y", scene.field.station_coords(i, 1)},
                            {"truth", scene.field.truth(i)}});
    root["stations"] = std::move(stations);
    root["wavelengths_nm"] = std::vector<double>(scene.grid.wavelengths_nm.data(),
                                                 scene.grid.wavelengths_nm.data() + scene.grid.size());
    root["spectra"] = matrix_rows(scene.spectra);
    root["unlabeled_pool"] = matrix_rows(scene.unlabeled_pool);
    return root.dump(1);
}

Scene scene_from_json(const std::string& text) {
    const json root = json::parse(text);
    if (root.at("format") != "picsrl.scene" || root.at("version") != 1)
        throw std::runtime_error("not a version-1 scene file");
    Scene scene;
    scene.seed = root.at("seed").get<std::uint64_t>();
    scene.field.bloom_threshold = root.at("bloom_threshold").get<double>();
    const auto& stations = root.at("stations");
    const auto n = static_cast<Eigen::Index>(stations.size());
    scene.field.station_coords.resize(n, 2);
    scene.field.truth.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = stations[static_cast<std::size_t>(i)];
        scene.field.station_coords(i, 0) = s.at("x").get<double>();
        scene.field.station_coords(i, 1) = s.at("y").get<double>();
        scene.field.truth(i) = s.at("truth").get<double>();
    }
    const auto nm = root.at("wavelengths_nm").get<std::vector<double>>();
    scene.grid.wavelengths_nm = Eigen::Map<const Eigen::VectorXd>(nm.data(), static_cast<Eigen::Index>(nm.size()));
    scene.grid.validate();
    scene.spectra = rows_matrix(root.at("spectra"), scene.grid.size());
    if (scene.spectra.rows() != n) throw std::runtime_error("scene file: spectra count differs from station count");
    scene.unlabeled_pool = rows_matrix(root.at("unlabeled_pool"), scene.grid.size());
    return scene;
}

void write_truth_csv(std::ostream& out, const Scene& scene) {
    out << "station,x,y,truth\n";
    char buf[128];
    for (Eigen::Index i = 0; i < scene.station_count(); ++i) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(i),
                      scene.field.station_coords(i, 0), scene.field.station_coords(i, 1), scene.field.truth(i));
        out << buf;
    }
}

}  // namespace picsrl
