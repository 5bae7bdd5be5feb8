#include "fredholm/baselines.hpp"

#include "fredholm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fredholm {

void GridProblem::validate() const {
    const auto b = pi0.size();
    if (b == 0) throw InputError("grid problem has no bins");
    if (mu.size() != b || static_cast<std::size_t>(centers.rows()) != b ||
        static_cast<std::size_t>(kernel.rows()) != b || static_cast<std::size_t>(kernel.cols()) != b) {
        throw InputError("grid problem: inconsistent sizes");
    }
    for (std::size_t i = 0; i < b; ++i) {
        if (!(pi0[i] >= 0.0) || !(mu[i] >= 0.0)) throw InputError("grid problem: densities must be nonnegative");
    }
    if (!(kernel.array() >= 0.0).all()) throw InputError("grid problem: kernel must be nonnegative");
}

GridProblem make_grid_problem(const KernelModel& kernel, const DensityFunction& pi0,
                              const DensityFunction& mu, std::size_t bins_per_dim, double lo,
                              double hi) {
    if (bins_per_dim < 1) throw InputError("grid problem needs at least one bin per dimension");
    if (!(lo < hi)) throw InputError("grid problem: lo must be below hi");
    if (kernel.dim_x() != kernel.dim_y()) throw InputError("grid problem needs p == d");
    const std::size_t d = kernel.dim_x();
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= bins_per_dim;

    GridProblem p;
    p.centers.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    const double width = (hi - lo) / static_cast<double>(bins_per_dim);
    for (std::size_t b = 0; b < total; ++b) {
        std::size_t rest = b;
        for (std::size_t a = d; a-- > 0;) {
            const std::size_t j = rest % bins_per_dim;
            rest /= bins_per_dim;
            p.centers(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) =
                lo + (static_cast<double>(j) + 0.5) * width;
        }
    }
    p.pi0.resize(total);
    p.mu.resize(total);
    p.kernel.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
    for (std::size_t b = 0; b < total; ++b) {
        const Point xb = row_of(p.centers, static_cast<Eigen::Index>(b));
        p.pi0[b] = pi0(xb);
        p.mu[b] = mu(xb);
        for (std::size_t c = 0; c < total; ++c) {
            p.kernel(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) =
                kernel.eval(xb, row_of(p.centers, static_cast<Eigen::Index>(c)));
        }
    }
    return p;
}

std::vector<double> oslem_step(const std::vector<double>& state, const GridProblem& problem,
                               double alpha) {
    const std::size_t n = problem.bins();
    if (state.size() != n) throw InputError("oslem: state size differs from the grid");
    for (std::size_t b = 0; b < n; ++b) {
        if (!(state[b] > 0.0)) throw InputError("oslem: state must be strictly positive");
    }

    // (pi k)_c and then the EM ratio sum_c mu_c k_bc / (pi k)_c.
    std::vector<double> forward(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += state[d] * problem.kernel(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
        forward[c] = s;
    }
    std::vector<double> next(n);
    for (std::size_t b = 0; b < n; ++b) {
        double ratio = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            ratio += problem.mu[c] * problem.kernel(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) / forward[c];
        }
        double denom = 1.0;
        if (alpha != 0.0) denom = 1.0 + alpha * (1.0 + std::log(state[b]) - std::log(problem.pi0[b]));
        if (!(denom > 0.0)) throw NumericalFailure("oslem: nonpositive one-step-late denominator", std::nullopt, b);
        next[b] = state[b] / denom * ratio;
    }
    return next;
}

std::vector<double> richardson_lucy_step(const std::vector<double>& state, const GridProblem& problem) {
    const std::size_t n = problem.bins();
    if (state.size() != n) throw InputError("richardson-lucy: state size differs from the grid");
    const Matrix& k = problem.kernel;
    std::vector<double> blurred(n);
    for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += state[d] * k(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
        blurred[c] = s;
    }
    std::vector<double> next(n);
    for (std::size_t b = 0; b < n; ++b) {
        double correction = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            correction += problem.mu[c] * k(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) / blurred[c];
        }
        next[b] = state[b] * correction;
    }
    return next;
}

std::vector<double> oslem_solve(const GridProblem& problem, double alpha, std::size_t iterations,
                                std::vector<double> init) {
    problem.validate();
    if (init.empty()) init.assign(problem.bins(), 1.0 / static_cast<double>(problem.bins()));
    for (std::size_t it = 0; it < iterations; ++it) {
        try {
            init = oslem_step(init, problem, alpha);
        } catch (const NumericalFailure& failure) {
            throw failure.at_step(it);
        }
    }
    return init;
}

double discrete_objective(const std::vector<double>& state, const GridProblem& problem, double alpha) {
    const std::size_t n = problem.bins();
    if (state.size() != n) throw InputError("objective: state size differs from the grid");
    double value = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (problem.mu[c] == 0.0) continue;
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += state[d] * problem.kernel(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
        value -= problem.mu[c] * std::log(s);
    }
    for (std::size_t b = 0; b < n; ++b) {
        value += state[b];
        if (alpha != 0.0 && state[b] > 0.0) value += alpha * state[b] * std::log(state[b] / problem.pi0[b]);
    }
    return value;
}

// ---------------------------------------------------------------------------

void ToyGaussianSpec::validate() const {
    if (!(sigma_pi2 > 0.0) || !(sigma_k2 > 0.0) || !(sigma_0_2 > 0.0)) {
        throw InputError("toy spec: variances must be positive");
    }
    if (!(alpha >= 0.0)) throw InputError("toy spec: alpha must be nonnegative");
}

double toy_closed_form_g(const ToyGaussianSpec& spec, double beta) {
    if (!(beta > 0.0)) throw InputError("toy functional: beta must be positive");
    const double spread = beta + spec.sigma_k2;
    return 0.5 * std::log(2.0 * std::numbers::pi * spread) + spec.sigma_mu2() / (2.0 * spread) +
           0.5 * spec.alpha * (std::log(spec.sigma_0_2 / beta) + beta / spec.sigma_0_2 - 1.0);
}

std::array<double, 4> toy_cubic_coefficients(const ToyGaussianSpec& spec) {
    const double a = spec.alpha;
    const double s = spec.sigma_k2;
    const double v0 = spec.sigma_0_2;
    const double vm = spec.sigma_mu2();
    return {a,
            2.0 * a * s + (1.0 - a) * v0,
            a * s * s - vm * v0 + v0 * s - 2.0 * a * s * v0,
            -a * v0 * s * s};
}

std::vector<double> real_cubic_roots(const std::array<double, 4>& coefficients) {
    const auto [c3, c2, c1, c0] = coefficients;
    if (c3 == 0.0) throw InputError("cubic: leading coefficient is zero");
    const double b = c2 / c3, c = c1 / c3, d = c0 / c3;
    // x = t - b/3 gives t^3 + p t + q = 0.
    const double p = c - b * b / 3.0;
    const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    const double disc = q * q / 4.0 + p * p * p / 27.0;

    std::vector<double> roots;
    if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        roots.push_back(std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) - b / 3.0);
    } else if (p == 0.0) {
        roots.push_back(-b / 3.0);
    } else {
        const double r = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            roots.push_back(r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) - b / 3.0);
        }
    }

    for (double& x : roots) {
        for (int it = 0; it < 4; ++it) {
            const double f = ((c3 * x + c2) * x + c1) * x + c0;
            const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
            if (df == 0.0) break;
            const double step = f / df;
            if (!std::isfinite(step)) break;
            x -= step;
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

double toy_optimal_beta(const ToyGaussianSpec& spec) {
    spec.validate();
    if (spec.alpha == 0.0) return spec.sigma_pi2;
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_value = std::numeric_limits<double>::infinity();
    for (double root : real_cubic_roots(toy_cubic_coefficients(spec))) {
        if (!(root > 0.0)) continue;
        const double value = toy_closed_form_g(spec, root);
        if (value < best_value) {
            best_value = value;
            best = root;
        }
    }
    if (std::isnan(best)) throw NumericalFailure("toy optimum: cubic has no positive root");
    return best;
}

std::vector<ToySweepRow> toy_sweep(ToyGaussianSpec spec, const std::vector<double>& alphas) {
    std::vector<ToySweepRow> rows;
    rows.reserve(alphas.size());
    for (double a : alphas) {
        spec.alpha = a;
        const double beta = toy_optimal_beta(spec);
        rows.push_back({a, beta, toy_closed_form_g(spec, beta)});
    }
    return rows;
}

}  // namespace fredholm
