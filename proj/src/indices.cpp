#include "picsrl/indices.hpp"

#include <cstdio>
#include <ostream>

namespace picsrl {

Eigen::MatrixXd compute_indices_batch(const WavelengthGrid& grid, const Eigen::MatrixXd& spectra, double swir_nm) {
    Eigen::MatrixXd features(spectra.rows(), kIndexCount);
    for (Eigen::Index i = 0; i < spectra.rows(); ++i)
        features.row(i) = compute_indices(grid, spectra.row(i).transpose(), swir_nm).transpose();
    return features;
}

void write_features_csv(std::ostream& out, const Eigen::MatrixXd& features) {
    if (features.cols() != kIndexCount) throw std::invalid_argument("feature matrix must have ten columns");
    for (std::size_t j = 0; j < kIndexNames.size(); ++j) out << (j ? "," : "") << kIndexNames[j];
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        for (Eigen::Index j = 0; j < kIndexCount; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", features(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace picsrl
