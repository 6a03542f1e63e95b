#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "picsrl/common.hpp"

namespace picsrl {

inline constexpr double kSwirAnchorNm = 1240.0;

/// Strictly increasing band centres in nm.
struct WavelengthGrid {
    Eigen::VectorXd wavelengths_nm;

    [[nodiscard]] Eigen::Index size() const { return wavelengths_nm.size(); }
    [[nodiscard]] double front() const { return wavelengths_nm(0); }
    [[nodiscard]] double back() const { return wavelengths_nm(wavelengths_nm.size() - 1); }
    void validate() const;

    /// `band_count - 1` evenly spaced bands over [first_nm, last_nm] plus the
    /// SWIR anchor, so the total is `band_count`. The default gives 117 bands.
    static WavelengthGrid uniform(Eigen::Index band_count = 117, double first_nm = 400.0,
                                  double last_nm = 900.0, double swir_nm = kSwirAnchorNm);
    /// Exactly the bio-optical control wavelengths (no interpolation needed).
    static WavelengthGrid control();

    friend bool operator==(const WavelengthGrid& a, const WavelengthGrid& b) {
        return a.wavelengths_nm == b.wavelengths_nm;
    }
};

struct Spectrum {
    WavelengthGrid grid;
    Eigen::VectorXd reflectance;
};

/// Clear-water reflectance plus a saturating bloom signature:
///   rho(lambda) = rho_w(lambda) + u * delta_scale * delta(lambda),  u = c / (c + c_half)
/// Tables are defined at the control wavelengths and linearly interpolated
/// between them (held constant beyond the ends).
struct ForwardModel {
    static constexpr std::array<double, 10> kControlNm{443, 555, 620, 665, 680, 681, 709, 753, 865, 1240};
    static constexpr std::array<double, 10> kClearWater{0.020, 0.015, 0.008,  0.006, 0.0058,
                                                        0.0058, 0.004, 0.002, 0.001, 0.0005};
    static constexpr std::array<double, 10> kBloomDelta{-0.010, 0.004, -0.004, -0.004, 0.001,
                                                        0.004,  0.010, 0.002,  0.006,  0.0};

    double c_half = 1.0;
    double delta_scale = 1.0;

    [[nodiscard]] double saturation(double concentration) const {
        return concentration / (concentration + c_half);
    }
    [[nodiscard]] Eigen::VectorXd clear_water(const WavelengthGrid& grid) const;
    [[nodiscard]] Eigen::VectorXd bloom_delta(const WavelengthGrid& grid) const;
};

struct ConcentrationField {
    Eigen::MatrixX2d station_coords;  // unit square
    Eigen::VectorXd truth;
    double bloom_threshold = 1.5;

    [[nodiscard]] Eigen::Index size() const { return truth.size(); }
    /// Largest pairwise station distance.
    [[nodiscard]] double diameter() const;
};

enum class StationLayout { halton, preset8 };

struct FieldOptions {
    double scale = 0.4;            // median concentration
    double bloom_threshold = 1.5;
    StationLayout layout = StationLayout::halton;
};

/// Points 1..n of the base-(2,3) Halton sequence.
Eigen::MatrixX2d halton_layout(Eigen::Index n);
/// Fixed hand-placed 8-station layout used for reproducible baselines.
Eigen::MatrixX2d preset8_layout();

/// Log-Gaussian field: truth = scale * exp(g), g a unit-variance Gaussian
/// process with covariance exp(-dist / correlation_length) sampled through a
/// Cholesky factor. Throws NumericalError if the factorization fails.
ConcentrationField generate_field(Eigen::Index n_stations, double correlation_length, std::uint64_t seed,
                                  const FieldOptions& options = {});

Spectrum reflectance_of(double concentration, double noise_sd, std::uint64_t seed,
                        const WavelengthGrid& grid = WavelengthGrid::uniform(),
                        const ForwardModel& model = {});
/// Row form used for batches; draws noise from `rng`.
Eigen::RowVectorXd reflectance_row(double concentration, double noise_sd, Rng& rng,
                                   const Eigen::VectorXd& clear_water, const Eigen::VectorXd& delta,
                                   const ForwardModel& model);

struct Scene {
    ConcentrationField field;
    WavelengthGrid grid;
    Eigen::MatrixXd spectra;         // one row per station
    Eigen::MatrixXd unlabeled_pool;  // one row per unlabeled pixel
    std::uint64_t seed = 0;

    [[nodiscard]] Eigen::Index station_count() const { return field.size(); }
    [[nodiscard]] Spectrum station_spectrum(Eigen::Index i) const;
};

struct RenderOptions {
    WavelengthGrid grid = WavelengthGrid::uniform();
    ForwardModel model;
    double pool_scale = 0.4;  // median of the pool's log-normal concentrations
};

/// Noisy spectrum per station from its truth, plus `unlabeled_count`
/// spectra whose concentrations follow the field's log-normal marginal.
Scene render_scene(const ConcentrationField& field, Eigen::Index unlabeled_count, double noise_sd,
                   std::uint64_t seed, const RenderOptions& options = {});

// Structured text (JSON) exchange and CSV export.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void write_truth_csv(std::ostream& out, const Scene& scene);

}  // namespace picsrl
