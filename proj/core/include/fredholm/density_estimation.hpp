#pragma once

#include "fredholm/types.hpp"

#include <cstddef>
#include <vector>

namespace fredholm {

/// Diagonal bandwidth matrix H (entries in squared units of x).
struct BandwidthMatrix {
    std::vector<double> diag;

    void validate() const;
};

/// Tensor-product grid; nodes are enumerated row-major (last axis fastest).
class EvaluationGrid {
public:
    struct Axis {
        double lo;
        double hi;
        std::size_t n_points;

        double step() const { return (hi - lo) / static_cast<double>(n_points - 1); }
        double node(std::size_t i) const;
    };

    explicit EvaluationGrid(std::vector<Axis> axes);

    /// Same box in every dimension.
    static EvaluationGrid cube(std::size_t dim, double lo, double hi, std::size_t n_points);

    std::size_t dim() const noexcept { return axes_.size(); }
    std::size_t size() const noexcept { return size_; }
    const std::vector<Axis>& axes() const noexcept { return axes_; }

    void node(std::size_t flat_index, MutablePoint out) const;
    /// All nodes as an (size x dim) matrix.
    Matrix nodes() const;

    /// Tensor-product trapezoid rule applied to values given at the nodes.
    double integrate(std::span<const double> values) const;

    bool operator==(const EvaluationGrid& other) const;

private:
    std::vector<Axis> axes_;
    std::size_t size_;
};

/// Density values attached to a grid.
struct DensityOnGrid {
    EvaluationGrid grid;
    std::vector<double> values;
};

/// Silverman's rule of thumb per coordinate:
/// h_i = (4 / (d + 2))^(1 / (d + 4)) N^(-1 / (d + 4)) sd_i, diag_i = h_i^2.
BandwidthMatrix silverman_bandwidth(const ParticleCloud& cloud);
BandwidthMatrix silverman_bandwidth(const Matrix& points);

/// Gaussian kernel density estimate (1/N) sum_k N(x; X_k, H).
class KernelDensity {
public:
    KernelDensity(Matrix points, BandwidthMatrix bandwidth);
    explicit KernelDensity(const ParticleCloud& cloud);

    const BandwidthMatrix& bandwidth() const noexcept { return bandwidth_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }

    double operator()(Point x) const;
    /// Density at every row of `xs`, parallel over rows.
    std::vector<double> eval_many(const Matrix& xs, std::size_t workers = 1) const;

private:
    Matrix points_;
    BandwidthMatrix bandwidth_;
    std::vector<double> inv_diag_;
    double log_norm_;
};

double kde_eval(const ParticleCloud& cloud, const BandwidthMatrix& h, Point x);
DensityOnGrid kde_grid(const ParticleCloud& cloud, const BandwidthMatrix& h,
                       const EvaluationGrid& grid, std::size_t workers = 1);

}  // namespace fredholm
