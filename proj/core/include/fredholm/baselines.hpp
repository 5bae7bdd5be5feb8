#pragma once

#include "fredholm/kernel_models.hpp"
#include "fredholm/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace fredholm {

/// Discretised problem on a regular grid of bins: reference, data and kernel
/// values at bin centres.
struct GridProblem {
    /// Bin centres, one per row (B^d rows).
    Matrix centers;
    std::vector<double> pi0;
    std::vector<double> mu;
    /// kernel(b, c) = k(x_b, x_c).
    Matrix kernel;

    std::size_t bins() const { return pi0.size(); }
    void validate() const;
};

using DensityFunction = std::function<double(Point)>;

/// Bins of width (hi - lo) / B per dimension with centres lo + (b - 1/2)(hi - lo)/B.
GridProblem make_grid_problem(const KernelModel& kernel, const DensityFunction& pi0,
                              const DensityFunction& mu, std::size_t bins_per_dim,
                              double lo = 0.0, double hi = 1.0);

/// One one-step-late EM update:
/// pi_b <- pi_b / (1 + alpha (1 + log pi_b - log pi0_b)) sum_c mu_c k_bc / sum_d pi_d k_dc.
/// Throws NumericalFailure naming the bin if the OSL denominator is not positive.
std::vector<double> oslem_step(const std::vector<double>& state, const GridProblem& problem,
                               double alpha);

/// Richardson-Lucy multiplicative update pi_b <- pi_b sum_c mu_c k_bc / (pi k)_c.
std::vector<double> richardson_lucy_step(const std::vector<double>& state, const GridProblem& problem);

/// Runs `iterations` OSL-EM steps from `init` (uniform over bins when empty).
std::vector<double> oslem_solve(const GridProblem& problem, double alpha, std::size_t iterations,
                                std::vector<double> init = {});

/// -sum_c mu_c log (pi k)_c + sum_b pi_b + alpha sum_b pi_b log(pi_b / pi0_b).
/// Its stationary points over the positive orthant are the OSL-EM fixed points.
double discrete_objective(const std::vector<double>& state, const GridProblem& problem, double alpha);

/// Gaussian toy problem: pi = N(0, sigma_pi2), k = N(y; x, sigma_k2),
/// pi0 = N(0, sigma_0_2), with candidate minimisers N(0, beta).
struct ToyGaussianSpec {
    double sigma_pi2 = 0.43 * 0.43;
    double sigma_k2 = 0.45 * 0.45;
    double sigma_0_2 = 1.0;
    double alpha = 0.0;

    double sigma_mu2() const { return sigma_pi2 + sigma_k2; }
    void validate() const;
};

/// Exact regularised functional at pi = N(0, beta).
double toy_closed_form_g(const ToyGaussianSpec& spec, double beta);

/// Coefficients (c3, c2, c1, c0) of the stationarity cubic in beta,
/// from d/dbeta of toy_closed_form_g times 2 beta (beta + s_k)^2 sigma_0^2.
std::array<double, 4> toy_cubic_coefficients(const ToyGaussianSpec& spec);

/// Positive root of the stationarity cubic with the smallest functional value;
/// sigma_pi2 when alpha == 0.
double toy_optimal_beta(const ToyGaussianSpec& spec);

struct ToySweepRow {
    double alpha;
    double beta;
    double g_value;
};

std::vector<ToySweepRow> toy_sweep(ToyGaussianSpec spec, const std::vector<double>& alphas);

/// Real roots of c3 x^3 + c2 x^2 + c1 x + c0 (c3 != 0), Newton-polished.
std::vector<double> real_cubic_roots(const std::array<double, 4>& coefficients);

}  // namespace fredholm
