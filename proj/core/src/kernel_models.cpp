#include "fredholm/kernel_models.hpp"

#include "fredholm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace fredholm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// Bound on k, |grad k| and |Hessian| for a Gaussian bump with peak `peak`
// and smallest scale `sd_min`: sup t^(1/2) e^(-t/2) = e^(-1/2), sup t e^(-t/2) = 2/e.
double gaussian_bump_bound(double peak, double sd_min) {
    const double grad = peak * std::exp(-0.5) / sd_min;
    const double hess = peak * (1.0 + 2.0 / std::numbers::e) / (sd_min * sd_min);
    return std::max({peak, grad, hess});
}

void require_positive(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw InputError(std::string(what) + " must be non-empty");
    for (double s : v) {
        if (!(s > 0.0) || !std::isfinite(s)) throw InputError(std::string(what) + " must be positive");
    }
}

double gaussian_bound_for(const std::vector<double>& sd) {
    require_positive(sd, "noise_sd");
    double log_norm = -0.5 * kLogTwoPi * static_cast<double>(sd.size());
    for (double s : sd) log_norm -= std::log(s);
    return gaussian_bump_bound(std::exp(log_norm), *std::min_element(sd.begin(), sd.end()));
}

double checked_mixture_bound(const std::vector<double>& w, const std::vector<double>& means,
                             const std::vector<double>& sds) {
    if (w.empty() || w.size() != means.size() || w.size() != sds.size()) {
        throw InputError("delay mixture: weights, means and sds must have equal non-zero length");
    }
    require_positive(sds, "delay mixture sds");
    for (double wi : w) {
        if (!(wi >= 0.0)) throw InputError("delay mixture weights must be nonnegative");
    }
    if (std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) > 1e-9) {
        throw InputError("delay mixture weights must sum to 1");
    }
    double b = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double peak = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sds[i]);
        b += w[i] * gaussian_bump_bound(peak, sds[i]);
    }
    return b;
}

double radon_normalizer(double sigma) {
    // Integral over xi in R of the Gaussian is sqrt(2 pi) sigma for every phi.
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(2.0 * std::numbers::pi) * sigma);
}

}  // namespace

void KernelModel::check_x(std::size_t n) const {
    if (n != dim_x_) {
        throw InputError("kernel " + name() + ": x has dimension " + std::to_string(n) +
                         ", expected " + std::to_string(dim_x_));
    }
}

void KernelModel::check_y(std::size_t n) const {
    if (n != dim_y_) {
        throw InputError("kernel " + name() + ": y has dimension " + std::to_string(n) +
                         ", expected " + std::to_string(dim_y_));
    }
}

double KernelModel::eval(Point x, Point y) const {
    check_x(x.size());
    check_y(y.size());
    return eval_unchecked(x.data(), y.data());
}

void KernelModel::grad1(Point x, Point y, MutablePoint out) const {
    check_x(x.size());
    check_y(y.size());
    check_x(out.size());
    grad1_unchecked(x.data(), y.data(), out.data());
}

void KernelModel::eval_rows(Point x, const Matrix& ys, std::span<double> out) const {
    check_x(x.size());
    check_y(static_cast<std::size_t>(ys.cols()));
    if (out.size() != static_cast<std::size_t>(ys.rows())) throw InputError("eval_rows: output size mismatch");
    for (Eigen::Index j = 0; j < ys.rows(); ++j) out[j] = eval_unchecked(x.data(), ys.data() + j * ys.cols());
}

void KernelModel::grad1_rows(Point x, const Matrix& ys, Matrix& out) const {
    check_x(x.size());
    check_y(static_cast<std::size_t>(ys.cols()));
    out.resize(ys.rows(), static_cast<Eigen::Index>(dim_x_));
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
        grad1_unchecked(x.data(), ys.data() + j * ys.cols(), out.data() + j * out.cols());
    }
}

void KernelModel::eval_cols(const Matrix& xs, Point y, std::span<double> out) const {
    check_x(static_cast<std::size_t>(xs.cols()));
    check_y(y.size());
    if (out.size() != static_cast<std::size_t>(xs.rows())) throw InputError("eval_cols: output size mismatch");
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = eval_unchecked(xs.data() + i * xs.cols(), y.data());
}

// ---------------------------------------------------------------------------

GaussianConvolutionKernel::GaussianConvolutionKernel(std::vector<double> noise_sd)
    : KernelModel(noise_sd.size(), noise_sd.size(), gaussian_bound_for(noise_sd)),
      sd_(std::move(noise_sd)) {
    inv_var_.reserve(sd_.size());
    log_norm_ = -0.5 * kLogTwoPi * static_cast<double>(sd_.size());
    for (double s : sd_) {
        inv_var_.push_back(1.0 / (s * s));
        log_norm_ -= std::log(s);
    }
}

double GaussianConvolutionKernel::eval_unchecked(const double* x, const double* y) const {
    double q = 0.0;
    for (std::size_t i = 0; i < sd_.size(); ++i) {
        const double r = y[i] - x[i];
        q += r * r * inv_var_[i];
    }
    return std::exp(log_norm_ - 0.5 * q);
}

void GaussianConvolutionKernel::grad1_unchecked(const double* x, const double* y, double* out) const {
    const double k = eval_unchecked(x, y);
    for (std::size_t i = 0; i < sd_.size(); ++i) out[i] = k * (y[i] - x[i]) * inv_var_[i];
}

void GaussianConvolutionKernel::eval_rows(Point x, const Matrix& ys, std::span<double> out) const {
    if (sd_.size() != 1) {
        KernelModel::eval_rows(x, ys, out);
        return;
    }
    check_x(x.size());
    check_y(static_cast<std::size_t>(ys.cols()));
    if (out.size() != static_cast<std::size_t>(ys.rows())) throw InputError("eval_rows: output size mismatch");
    const double x0 = x[0];
    const double h = -0.5 * inv_var_[0];
    const double* y = ys.data();
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double r = y[j] - x0;
        out[j] = std::exp(log_norm_ + h * r * r);
    }
}

void GaussianConvolutionKernel::grad1_rows(Point x, const Matrix& ys, Matrix& out) const {
    if (sd_.size() != 1) {
        KernelModel::grad1_rows(x, ys, out);
        return;
    }
    check_x(x.size());
    check_y(static_cast<std::size_t>(ys.cols()));
    out.resize(ys.rows(), 1);
    const double x0 = x[0];
    const double iv = inv_var_[0];
    const double h = -0.5 * iv;
    const double* y = ys.data();
    double* g = out.data();
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
        const double r = y[j] - x0;
        g[j] = std::exp(log_norm_ + h * r * r) * r * iv;
    }
}

// ---------------------------------------------------------------------------

GaussianMixtureDelayKernel::GaussianMixtureDelayKernel(std::vector<double> weights,
                                                       std::vector<double> means,
                                                       std::vector<double> sds)
    : KernelModel(1, 1, checked_mixture_bound(weights, means, sds)),
      weights_(std::move(weights)), means_(std::move(means)), sds_(std::move(sds)) {}

double GaussianMixtureDelayKernel::mean_delay() const {
    double m = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) m += weights_[i] * means_[i];
    return m;
}

double GaussianMixtureDelayKernel::eval_unchecked(const double* x, const double* y) const {
    const double delay = y[0] - x[0];
    double k = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double z = (delay - means_[i]) / sds_[i];
        k += weights_[i] * std::exp(-0.5 * z * z - 0.5 * kLogTwoPi) / sds_[i];
    }
    return k;
}

void GaussianMixtureDelayKernel::grad1_unchecked(const double* x, const double* y, double* out) const {
    // d/dx N(y - x; m, s^2) = N(y - x; m, s^2) (y - x - m) / s^2
    const double delay = y[0] - x[0];
    double g = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double z = (delay - means_[i]) / sds_[i];
        const double density = std::exp(-0.5 * z * z - 0.5 * kLogTwoPi) / sds_[i];
        g += weights_[i] * density * z / sds_[i];
    }
    out[0] = g;
}

// ---------------------------------------------------------------------------

RadonAlignmentKernel::RadonAlignmentKernel(double sigma)
    : KernelModel(2, 2, sigma > 0.0 ? gaussian_bump_bound(radon_normalizer(sigma), sigma) : 0.0),
      sigma_(sigma), norm_(sigma > 0.0 ? radon_normalizer(sigma) : 0.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("radon kernel sigma must be positive");
}

double RadonAlignmentKernel::eval_unchecked(const double* x, const double* y) const {
    const double r = x[0] * std::cos(y[0]) + x[1] * std::sin(y[0]) - y[1];
    return norm_ * std::exp(-0.5 * r * r / (sigma_ * sigma_));
}

void RadonAlignmentKernel::grad1_unchecked(const double* x, const double* y, double* out) const {
    const double c = std::cos(y[0]);
    const double s = std::sin(y[0]);
    const double r = x[0] * c + x[1] * s - y[1];
    const double k = norm_ * std::exp(-0.5 * r * r / (sigma_ * sigma_));
    const double scale = -k * r / (sigma_ * sigma_);
    out[0] = scale * c;
    out[1] = scale * s;
}

}  // namespace fredholm
