#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iosfwd>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "picsrl/common.hpp"
#include "picsrl/spectra.hpp"

namespace picsrl {

inline constexpr Eigen::Index kIndexCount = 10;
inline constexpr std::array<std::string_view, kIndexCount> kIndexNames{
    "CI", "NDCI", "MCI", "FAI", "PC", "ChlRed", "BG", "GR", "NIR", "NDI"};

template <typename Scalar>
using PhysicsFeaturesT = Eigen::Matrix<Scalar, kIndexCount, 1>;
using PhysicsFeatures = PhysicsFeaturesT<double>;

class DegenerateSpectrumError : public NumericalError {
public:
    explicit DegenerateSpectrumError(std::string_view index)
        : NumericalError("degenerate spectrum: denominator of " + std::string(index) + " vanishes"),
          index_(index) {}
    [[nodiscard]] const std::string& index_name() const { return index_; }

private:
    std::string index_;
};

/// Reflectance at `nm`, linearly interpolated between bracketing bands.
/// Throws std::out_of_range outside the grid.
template <typename Derived>
typename Derived::Scalar band_at(const WavelengthGrid& grid, const Eigen::MatrixBase<Derived>& reflectance,
                                 double nm) {
    using Scalar = typename Derived::Scalar;
    const auto& w = grid.wavelengths_nm;
    if (reflectance.size() != w.size()) throw std::invalid_argument("spectrum length differs from its grid");
    if (!(nm >= w(0) && nm <= w(w.size() - 1)))
        throw std::out_of_range("wavelength " + std::to_string(nm) + " nm outside grid [" +
                                std::to_string(w(0)) + ", " + std::to_string(w(w.size() - 1)) + "]");
    const double* begin = w.data();
    const double* hi = std::lower_bound(begin, begin + w.size(), nm);
    const Eigen::Index j = hi - begin;
    if (*hi == nm) return reflectance(j);
    const double t = (nm - w(j - 1)) / (w(j) - w(j - 1));
    return reflectance(j - 1) + Scalar(t) * (reflectance(j) - reflectance(j - 1));
}

inline double band_at(const Spectrum& s, double nm) { return band_at(s.grid, s.reflectance, nm); }

/// The ten bio-optical indices, ordered as kIndexNames. FAI uses the
/// red/NIR/SWIR baseline: rho865 - [rho665 + (rhoSWIR - rho665)(865-665)/(SWIR-665)].
template <typename Derived>
PhysicsFeaturesT<typename Derived::Scalar> compute_indices(const WavelengthGrid& grid,
                                                           const Eigen::MatrixBase<Derived>& reflectance,
                                                           double swir_nm = kSwirAnchorNm) {
    using Scalar = typename Derived::Scalar;
    const auto at = [&](double nm) { return band_at(grid, reflectance, nm); };
    const Scalar r443 = at(443), r555 = at(555), r620 = at(620), r665 = at(665), r680 = at(680),
                 r681 = at(681), r709 = at(709), r753 = at(753), r865 = at(865), rswir = at(swir_nm);

    const auto guard = [](Scalar denom, std::string_view name) {
        using std::abs;
        if (!(abs(denom) >= Scalar(1e-12))) throw DegenerateSpectrumError(name);
    };
    guard(r665, "PC");
    guard(r665, "ChlRed");
    guard(r555, "BG");
    guard(r665, "GR");
    guard(r665, "NIR");
    guard(r709 + r665, "NDCI");
    guard(r665 + r620, "NDI");

    PhysicsFeaturesT<Scalar> f;
    f << r681 - r665,
         (r709 - r665) / (r709 + r665),
         r709 - (r681 + r753) / Scalar(2),
         r865 - (r665 + (rswir - r665) * Scalar((865.0 - 665.0) / (swir_nm - 665.0))),
         r620 / r665,
         r680 / r665,
         r443 / r555,
         r555 / r665,
         r865 / r665,
         (r665 - r620) / (r665 + r620);
    return f;
}

inline PhysicsFeatures compute_indices(const Spectrum& s, double swir_nm = kSwirAnchorNm) {
    return compute_indices(s.grid, s.reflectance, swir_nm);
}

/// Spectra rows in, one ten-column feature row out.
Eigen::MatrixXd compute_indices_batch(const WavelengthGrid& grid, const Eigen::MatrixXd& spectra,
                                      double swir_nm = kSwirAnchorNm);

/// CSV with the ten index names as header.
void write_features_csv(std::ostream& out, const Eigen::MatrixXd& features);

}  // namespace picsrl
