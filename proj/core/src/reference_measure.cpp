#include "fredholm/reference_measure.hpp"

#include "fredholm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace fredholm {

ReferenceMeasure::ReferenceMeasure(Kind kind, std::size_t dim, std::vector<double> mean,
                                   std::vector<double> var)
    : kind_(kind), dim_(dim), mean_(std::move(mean)), var_(std::move(var)) {
    if (dim_ == 0) throw InputError("reference measure dimension must be positive");
    if (kind_ == Kind::gaussian) {
        if (mean_.size() != dim_ || var_.size() != dim_) {
            throw InputError("gaussian reference: mean and variances must both have dimension d");
        }
        log_norm_ = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            if (!std::isfinite(mean_[i])) throw InputError("gaussian reference: mean must be finite");
            if (!(var_[i] > 0.0) || !std::isfinite(var_[i])) {
                throw InputError("gaussian reference: variance " + std::to_string(i) + " must be positive");
            }
            log_norm_ -= 0.5 * std::log(2.0 * std::numbers::pi * var_[i]);
        }
    }
}

ReferenceMeasure ReferenceMeasure::gaussian(std::vector<double> mean, std::vector<double> variances) {
    const std::size_t d = mean.size();
    return ReferenceMeasure(Kind::gaussian, d, std::move(mean), std::move(variances));
}

ReferenceMeasure ReferenceMeasure::flat(std::size_t dim) {
    return ReferenceMeasure(Kind::flat, dim, {}, {});
}

ReferenceMeasure ReferenceMeasure::from_sample(const ObservationSample& sample,
                                               std::vector<double> mean_offset) {
    validate(sample);
    const auto d = static_cast<std::size_t>(sample.dim());
    if (sample.size() < 2) throw InputError("reference from sample needs at least two observations");
    if (mean_offset.empty()) mean_offset.assign(d, 0.0);
    if (mean_offset.size() != d) throw InputError("reference mean offset has wrong dimension");

    std::vector<double> mean(d), var(d);
    const double n = static_cast<double>(sample.size());
    for (std::size_t i = 0; i < d; ++i) {
        const auto col = sample.points.col(static_cast<Eigen::Index>(i));
        const double m = col.mean();
        var[i] = (col.array() - m).square().sum() / (n - 1.0);
        mean[i] = m + mean_offset[i];
    }
    return gaussian(std::move(mean), std::move(var));
}

void ReferenceMeasure::check_dim(std::size_t n) const {
    if (n != dim_) {
        throw InputError("reference measure: point has dimension " + std::to_string(n) +
                         ", expected " + std::to_string(dim_));
    }
}

void ReferenceMeasure::grad_u(Point x, MutablePoint out) const {
    check_dim(x.size());
    check_dim(out.size());
    if (kind_ == Kind::flat) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < dim_; ++i) out[i] = (x[i] - mean_[i]) / var_[i];
}

std::vector<double> ReferenceMeasure::grad_u(Point x) const {
    std::vector<double> out(dim_);
    grad_u(x, out);
    return out;
}

double ReferenceMeasure::log_density(Point x) const {
    check_dim(x.size());
    if (kind_ == Kind::flat) throw UnsupportedOperation("flat reference has no normalisable density");
    double q = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        const double r = x[i] - mean_[i];
        q += r * r / var_[i];
    }
    return log_norm_ - 0.5 * q;
}

double ReferenceMeasure::lipschitz() const noexcept {
    if (kind_ == Kind::flat) return 0.0;
    return 1.0 / *std::min_element(var_.begin(), var_.end());
}

double ReferenceMeasure::dissipativity_m() const noexcept {
    if (kind_ == Kind::flat) return 0.0;
    return 1.0 / *std::max_element(var_.begin(), var_.end());
}

void ReferenceMeasure::sample(KeyedStream& rng, MutablePoint out) const {
    check_dim(out.size());
    if (kind_ == Kind::flat) throw UnsupportedOperation("cannot sample from a flat reference");
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = mean_[i] + std::sqrt(var_[i]) * normal(rng);
}

}  // namespace fredholm
