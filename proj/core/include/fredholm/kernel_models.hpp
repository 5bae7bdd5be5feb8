#pragma once

#include "fredholm/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fredholm {

/// Markov kernel density k(x, y), x in R^d, y in R^p, with its gradient in x.
///
/// Implementations are immutable after construction and safe to evaluate from
/// many threads. `bound()` is a uniform bound on k, |grad_x k| and the
/// operator norm of the x-Hessian, derived in closed form per kernel.
class KernelModel {
public:
    virtual ~KernelModel() = default;

    std::size_t dim_x() const noexcept { return dim_x_; }
    std::size_t dim_y() const noexcept { return dim_y_; }
    double bound() const noexcept { return bound_; }
    virtual std::string name() const = 0;
    /// True when y lives in the same space as x (noisy copies of x), so
    /// observations can seed particles and grid baselines apply.
    virtual bool same_space() const { return dim_x_ == dim_y_; }

    double eval(Point x, Point y) const;
    void grad1(Point x, Point y, MutablePoint out) const;

    /// k(x, ys.row(j)) for every j.
    virtual void eval_rows(Point x, const Matrix& ys, std::span<double> out) const;
    /// grad_x k(x, ys.row(j)) into row j of `out` (resized to m x d).
    virtual void grad1_rows(Point x, const Matrix& ys, Matrix& out) const;
    /// k(xs.row(i), y) for every i.
    virtual void eval_cols(const Matrix& xs, Point y, std::span<double> out) const;

protected:
    KernelModel(std::size_t dim_x, std::size_t dim_y, double bound)
        : dim_x_(dim_x), dim_y_(dim_y), bound_(bound) {}

    virtual double eval_unchecked(const double* x, const double* y) const = 0;
    virtual void grad1_unchecked(const double* x, const double* y, double* out) const = 0;

    void check_x(std::size_t n) const;
    void check_y(std::size_t n) const;

private:
    std::size_t dim_x_;
    std::size_t dim_y_;
    double bound_;
};

/// k(x, y) = prod_i N(y_i; x_i, sd_i^2), so p = d.
class GaussianConvolutionKernel final : public KernelModel {
public:
    explicit GaussianConvolutionKernel(std::vector<double> noise_sd);

    std::string name() const override { return "gaussian"; }
    const std::vector<double>& noise_sd() const noexcept { return sd_; }

    void eval_rows(Point x, const Matrix& ys, std::span<double> out) const override;
    void grad1_rows(Point x, const Matrix& ys, Matrix& out) const override;

protected:
    double eval_unchecked(const double* x, const double* y) const override;
    void grad1_unchecked(const double* x, const double* y, double* out) const override;

private:
    std::vector<double> sd_;
    std::vector<double> inv_var_;
    double log_norm_;
};

/// One-dimensional delay kernel: k(x, y) = sum_i w_i N(y - x; mean_i, sd_i^2).
class GaussianMixtureDelayKernel final : public KernelModel {
public:
    GaussianMixtureDelayKernel(std::vector<double> weights, std::vector<double> means,
                               std::vector<double> sds);

    std::string name() const override { return "delay_mixture"; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& means() const noexcept { return means_; }
    const std::vector<double>& sds() const noexcept { return sds_; }

    /// Mean of the delay distribution, sum_i w_i mean_i.
    double mean_delay() const;

protected:
    double eval_unchecked(const double* x, const double* y) const override;
    void grad1_unchecked(const double* x, const double* y, double* out) const override;

private:
    std::vector<double> weights_;
    std::vector<double> means_;
    std::vector<double> sds_;
};

/// Gaussian alignment between an image point (x1, x2) and a projection
/// (phi, xi): k proportional to exp(-(x1 cos phi + x2 sin phi - xi)^2 / (2 sigma^2)),
/// normalised over phi in [0, 2 pi) and xi in R.
class RadonAlignmentKernel final : public KernelModel {
public:
    explicit RadonAlignmentKernel(double sigma);

    std::string name() const override { return "radon"; }
    bool same_space() const override { return false; }
    double sigma() const noexcept { return sigma_; }
    double normalizer() const noexcept { return norm_; }

protected:
    double eval_unchecked(const double* x, const double* y) const override;
    void grad1_unchecked(const double* x, const double* y, double* out) const override;

private:
    double sigma_;
    double norm_;
};

}  // namespace fredholm
