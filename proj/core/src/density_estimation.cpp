#include "fredholm/density_estimation.hpp"

#include "fredholm/errors.hpp"
#include "fredholm/parallel.hpp"

#include <cmath>
#include <numbers>

namespace fredholm {

void BandwidthMatrix::validate() const {
    if (diag.empty()) throw InputError("bandwidth matrix is empty");
    for (std::size_t i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > 0.0) || !std::isfinite(diag[i])) {
            throw InputError("bandwidth entry " + std::to_string(i) + " must be positive");
        }
    }
}

double EvaluationGrid::Axis::node(std::size_t i) const {
    if (i + 1 == n_points) return hi;
    return lo + step() * static_cast<double>(i);
}

EvaluationGrid::EvaluationGrid(std::vector<Axis> axes) : axes_(std::move(axes)), size_(1) {
    if (axes_.empty()) throw InputError("evaluation grid needs at least one axis");
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const auto& a = axes_[i];
        if (!(a.lo < a.hi)) throw InputError("grid axis " + std::to_string(i) + ": lo must be below hi");
        if (a.n_points < 2) throw InputError("grid axis " + std::to_string(i) + ": needs at least 2 points");
        size_ *= a.n_points;
    }
}

EvaluationGrid EvaluationGrid::cube(std::size_t dim, double lo, double hi, std::size_t n_points) {
    return EvaluationGrid(std::vector<Axis>(dim, Axis{lo, hi, n_points}));
}

void EvaluationGrid::node(std::size_t flat_index, MutablePoint out) const {
    if (out.size() != dim()) throw InputError("grid node: output dimension mismatch");
    for (std::size_t a = dim(); a-- > 0;) {
        const std::size_t n = axes_[a].n_points;
        out[a] = axes_[a].node(flat_index % n);
        flat_index /= n;
    }
}

Matrix EvaluationGrid::nodes() const {
    Matrix out(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < size_; ++i) node(i, row_of(out, static_cast<Eigen::Index>(i)));
    return out;
}

double EvaluationGrid::integrate(std::span<const double> values) const {
    if (values.size() != size_) throw InputError("grid integral: value count does not match grid");
    double total = 0.0;
    for (std::size_t i = 0; i < size_; ++i) {
        double w = 1.0;
        std::size_t rest = i;
        for (std::size_t a = dim(); a-- > 0;) {
            const std::size_t n = axes_[a].n_points;
            const std::size_t j = rest % n;
            rest /= n;
            w *= axes_[a].step() * ((j == 0 || j + 1 == n) ? 0.5 : 1.0);
        }
        total += w * values[i];
    }
    return total;
}

bool EvaluationGrid::operator==(const EvaluationGrid& other) const {
    if (axes_.size() != other.axes_.size()) return false;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const auto& a = axes_[i];
        const auto& b = other.axes_[i];
        if (a.lo != b.lo || a.hi != b.hi || a.n_points != b.n_points) return false;
    }
    return true;
}

BandwidthMatrix silverman_bandwidth(const Matrix& points) {
    const auto n = points.rows();
    const auto d = points.cols();
    if (n < 2) throw InputError("silverman bandwidth needs at least two particles");
    const double dd = static_cast<double>(d);
    const double factor = std::pow(4.0 / (dd + 2.0), 1.0 / (dd + 4.0)) *
                          std::pow(static_cast<double>(n), -1.0 / (dd + 4.0));
    BandwidthMatrix h;
    h.diag.resize(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto col = points.col(i);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
        if (!(var > 0.0)) {
            throw InputError("silverman bandwidth: coordinate " + std::to_string(i + 1) + " has zero variance");
        }
        const double width = factor * std::sqrt(var);
        h.diag[static_cast<std::size_t>(i)] = width * width;
    }
    return h;
}

BandwidthMatrix silverman_bandwidth(const ParticleCloud& cloud) {
    return silverman_bandwidth(cloud.points);
}

KernelDensity::KernelDensity(Matrix points, BandwidthMatrix bandwidth)
    : points_(std::move(points)), bandwidth_(std::move(bandwidth)) {
    if (points_.rows() < 1) throw InputError("kernel density needs at least one point");
    bandwidth_.validate();
    if (bandwidth_.diag.size() != static_cast<std::size_t>(points_.cols())) {
        throw InputError("bandwidth dimension does not match the points");
    }
    log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(points_.cols());
    for (double h : bandwidth_.diag) {
        inv_diag_.push_back(1.0 / h);
        log_norm_ -= 0.5 * std::log(h);
    }
}

KernelDensity::KernelDensity(const ParticleCloud& cloud)
    : KernelDensity(cloud.points, silverman_bandwidth(cloud)) {}

double KernelDensity::operator()(Point x) const {
    const auto d = static_cast<std::size_t>(points_.cols());
    if (x.size() != d) throw InputError("kde: query point has wrong dimension");
    const auto n = static_cast<std::size_t>(points_.rows());
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double* p = points_.data() + k * d;
        double q = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = x[i] - p[i];
            q += r * r * inv_diag_[i];
        }
        terms[k] = std::exp(log_norm_ - 0.5 * q);
    }
    return pairwise_sum(terms) / static_cast<double>(n);
}

std::vector<double> KernelDensity::eval_many(const Matrix& xs, std::size_t workers) const {
    if (xs.cols() != points_.cols()) throw InputError("kde: query points have wrong dimension");
    std::vector<double> out(static_cast<std::size_t>(xs.rows()));
    parallel_for(out.size(), workers, [&](std::size_t i) {
        out[i] = (*this)(row_of(xs, static_cast<Eigen::Index>(i)));
    });
    return out;
}

double kde_eval(const ParticleCloud& cloud, const BandwidthMatrix& h, Point x) {
    return KernelDensity(cloud.points, h)(x);
}

DensityOnGrid kde_grid(const ParticleCloud& cloud, const BandwidthMatrix& h,
                       const EvaluationGrid& grid, std::size_t workers) {
    if (grid.dim() != static_cast<std::size_t>(cloud.dim())) throw InputError("kde grid: dimension mismatch");
    KernelDensity kde(cloud.points, h);
    return DensityOnGrid{grid, kde.eval_many(grid.nodes(), workers)};
}

}  // namespace fredholm
