#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>

namespace fredholm {

/// Points are stored one per row, so every point is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Point = std::span<const double>;
using MutablePoint = std::span<double>;

inline Point row_of(const Matrix& m, Eigen::Index k) {
    return {m.data() + k * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline MutablePoint row_of(Matrix& m, Eigen::Index k) {
    return {m.data() + k * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// State of the solver: N particles in R^d and the step that produced them.
struct ParticleCloud {
    Matrix points;
    std::size_t step_index = 0;

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

/// M observations in R^p standing in for the data measure.
struct ObservationSample {
    Matrix points;

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

/// Throws InputError unless the cloud is non-empty and finite.
void validate(const ParticleCloud& cloud);
/// Throws InputError unless the sample is non-empty and finite.
void validate(const ObservationSample& sample);

}  // namespace fredholm
