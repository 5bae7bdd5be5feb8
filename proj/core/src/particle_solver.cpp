#include "fredholm/particle_solver.hpp"

#include "fredholm/errors.hpp"
#include "fredholm/parallel.hpp"
#include "fredholm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fredholm {

void SolverConfig::validate(std::size_t sample_size) const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InputError("alpha must be nonnegative");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InputError("eta must be nonnegative");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be positive");
    if (n_particles < 1) throw InputError("n_particles must be at least 1");
    if (minibatch < 1) throw InputError("minibatch must be at least 1");
    if (sample_size < 1) throw InputError("observation sample is empty");
    if (!(stop_tol > 0.0)) throw InputError("stop_tol must be positive");
    if (stop_window < 1) throw InputError("stop_window must be at least 1");
    if (!(denom_floor > 0.0)) throw InputError("denom_floor must be positive");
    if (threads < 1) throw InputError("threads must be at least 1");
}

DriftEvaluation drift_empirical(const ParticleCloud& cloud, const ObservationSample& batch,
                                const KernelModel& kernel, const ReferenceMeasure& ref,
                                double alpha, double eta, double denom_floor,
                                std::size_t threads) {
    validate(batch);
    const auto n = static_cast<std::size_t>(cloud.size());
    const auto m = static_cast<std::size_t>(batch.size());
    const auto d = static_cast<std::size_t>(cloud.dim());
    if (n < 1) throw InputError("drift: empty particle cloud");
    if (d != kernel.dim_x() || static_cast<std::size_t>(batch.dim()) != kernel.dim_y() || d != ref.dim()) {
        throw InputError("drift: cloud, batch, kernel and reference dimensions disagree");
    }

    // K(k, j) = k(X_k, y_j)
    Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    parallel_for(n, threads, [&](std::size_t k) {
        const auto row = static_cast<Eigen::Index>(k);
        kernel.eval_rows(row_of(cloud.points, row), batch.points, {values.data() + k * m, m});
    });

    DriftEvaluation out;
    out.mean_kernel.resize(m);
    std::vector<double> inv_denom(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double lambda = pairwise_sum_strided(values.data() + j, n, m) / static_cast<double>(n);
        out.mean_kernel[j] = lambda;
        double denom = lambda + eta;
        if (denom < denom_floor) {
            denom = denom_floor;
            out.floored = true;
        }
        inv_denom[j] = 1.0 / denom;
    }

    out.drift.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    parallel_for(n, threads, [&](std::size_t k) {
        const auto row = static_cast<Eigen::Index>(k);
        const Point x = row_of(cloud.points, row);
        Matrix grads;
        kernel.grad1_rows(x, batch.points, grads);
        std::vector<double> terms(m);
        std::vector<double> grad_u(d);
        ref.grad_u(x, grad_u);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < m; ++j) terms[j] = grads(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * inv_denom[j];
            const double value = pairwise_sum(terms) / static_cast<double>(m) - alpha * grad_u[i];
            if (!std::isfinite(value)) throw NumericalFailure("non-finite drift", std::nullopt, k);
            out.drift(row, static_cast<Eigen::Index>(i)) = value;
        }
    });
    return out;
}

ParticleCloud tamed_step(const ParticleCloud& cloud, const Matrix& drift, double gamma,
                         double alpha, const Matrix& noise) {
    if (drift.rows() != cloud.points.rows() || drift.cols() != cloud.points.cols() ||
        noise.rows() != cloud.points.rows() || noise.cols() != cloud.points.cols()) {
        throw InputError("tamed step: drift, noise and cloud shapes differ");
    }
    const double diffusion = std::sqrt(2.0 * alpha * gamma);
    ParticleCloud next{cloud.points, cloud.step_index + 1};
    for (Eigen::Index k = 0; k < drift.rows(); ++k) {
        const double norm = drift.row(k).norm();
        const double scale = gamma / (1.0 + gamma * norm);
        for (Eigen::Index i = 0; i < drift.cols(); ++i) {
            const double v = cloud.points(k, i) + scale * drift(k, i) + diffusion * noise(k, i);
            if (!std::isfinite(v)) {
                throw NumericalFailure("non-finite particle position", std::nullopt, static_cast<std::size_t>(k));
            }
            next.points(k, i) = v;
        }
    }
    return next;
}

Matrix standard_noise(std::uint64_t seed, std::size_t step, std::size_t n, std::size_t d) {
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < n; ++k) {
        KeyedStream rng(seed, StreamRole::noise, step, k);
        std::normal_distribution<double> normal;
        for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = normal(rng);
    }
    return z;
}

namespace {

ObservationSample select_rows(const ObservationSample& full, std::size_t m, KeyedStream& rng,
                              ResamplePolicy policy) {
    const auto total = static_cast<std::size_t>(full.size());
    std::vector<std::size_t> chosen(m);
    if (policy == ResamplePolicy::iid) {
        std::uniform_int_distribution<std::size_t> pick(0, total - 1);
        for (auto& c : chosen) c = pick(rng);
    } else {
        // Partial Fisher-Yates over the index set.
        std::vector<std::size_t> idx(total);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, total - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        std::copy_n(idx.begin(), m, chosen.begin());
    }
    ObservationSample batch{Matrix(static_cast<Eigen::Index>(m), full.dim())};
    for (std::size_t i = 0; i < m; ++i) {
        batch.points.row(static_cast<Eigen::Index>(i)) = full.points.row(static_cast<Eigen::Index>(chosen[i]));
    }
    return batch;
}

}  // namespace

ObservationSample draw_minibatch(const ObservationSample& full, std::size_t m, std::uint64_t seed,
                                 std::size_t step, ResamplePolicy policy) {
    if (m < 1) throw InputError("minibatch size must be at least 1");
    if (m >= static_cast<std::size_t>(full.size())) return full;
    KeyedStream rng(seed, StreamRole::minibatch, step, 0);
    return select_rows(full, m, rng, policy);
}

ParticleCloud initialize(const InitSpec& spec, std::size_t n, std::uint64_t seed,
                         const ObservationSample& observations, const ReferenceMeasure& ref) {
    if (n < 1) throw InputError("initialisation needs at least one particle");
    const std::size_t d = ref.dim();
    ParticleCloud cloud{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), 0};

    switch (spec.kind) {
    case InitSpec::Kind::observations: {
        validate(observations);
        if (static_cast<std::size_t>(observations.dim()) != d) {
            throw InputError("initialisation from observations needs p == d");
        }
        std::vector<double> shift = spec.shift.empty() ? std::vector<double>(d, 0.0) : spec.shift;
        if (shift.size() != d) throw InputError("initialisation shift has wrong dimension");
        // Distinct observations while they last, i.i.d. draws beyond M.
        KeyedStream rng(seed, StreamRole::init, 0, 0);
        const bool enough = n <= static_cast<std::size_t>(observations.size());
        const auto rows = select_rows(observations, n, rng,
                                      enough ? ResamplePolicy::without_replacement : ResamplePolicy::iid);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < d; ++i) {
                const auto r = static_cast<Eigen::Index>(k);
                const auto c = static_cast<Eigen::Index>(i);
                cloud.points(r, c) = rows.points(r, c) + shift[i];
            }
        }
        break;
    }
    case InitSpec::Kind::reference:
        for (std::size_t k = 0; k < n; ++k) {
            KeyedStream rng(seed, StreamRole::init, 0, k);
            ref.sample(rng, row_of(cloud.points, static_cast<Eigen::Index>(k)));
        }
        break;
    case InitSpec::Kind::point:
        if (spec.point.size() != d) throw InputError("point initialisation has wrong dimension");
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < d; ++i) cloud.points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = spec.point[i];
        }
        break;
    case InitSpec::Kind::uniform_box:
        if (spec.lo.size() != d || spec.hi.size() != d) throw InputError("uniform box has wrong dimension");
        for (std::size_t i = 0; i < d; ++i) {
            if (!(spec.lo[i] < spec.hi[i])) throw InputError("uniform box: lo must be below hi");
        }
        for (std::size_t k = 0; k < n; ++k) {
            KeyedStream rng(seed, StreamRole::init, 0, k);
            for (std::size_t i = 0; i < d; ++i) {
                cloud.points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
                    spec.lo[i] + (spec.hi[i] - spec.lo[i]) * rng.uniform();
            }
        }
        break;
    }
    return cloud;
}

namespace {

StepRecord describe(const ParticleCloud& cloud, const DriftEvaluation& drift) {
    StepRecord rec;
    rec.step = cloud.step_index;
    const auto n = cloud.size();
    const auto d = cloud.dim();
    std::vector<double> norms(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) norms[static_cast<std::size_t>(k)] = drift.drift.row(k).norm();
    rec.drift_mean = pairwise_sum(norms) / static_cast<double>(n);
    rec.drift_max = *std::max_element(norms.begin(), norms.end());
    for (Eigen::Index i = 0; i < d; ++i) {
        const double mean = pairwise_sum_strided(cloud.points.data() + i, static_cast<std::size_t>(n),
                                                 static_cast<std::size_t>(d)) / static_cast<double>(n);
        std::vector<double> sq(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) {
            const double r = cloud.points(k, i) - mean;
            sq[static_cast<std::size_t>(k)] = r * r;
        }
        rec.mean.push_back(mean);
        rec.variance.push_back(n > 1 ? pairwise_sum(sq) / static_cast<double>(n - 1) : 0.0);
    }
    return rec;
}

std::optional<FunctionalEstimate> monitor(const SolverConfig& config, const ParticleCloud& cloud,
                                          const ReferenceMeasure& ref, const DriftEvaluation& drift) {
    FunctionalEstimate est;
    est.floored = drift.floored;
    bool floored = false;
    est.data_term = data_term_from_mean_kernel(drift.mean_kernel, config.eta, config.denom_floor, floored);
    est.floored = est.floored || floored;
    if (config.alpha > 0.0) {
        try {
            KernelDensity density(cloud);
            est.kl_term = kl_term(cloud, ref, config.alpha, density, config.threads);
        } catch (const InputError&) {
            // Degenerate cloud (e.g. point mass): no bandwidth, no estimate.
            return std::nullopt;
        }
    }
    est.total = est.data_term + est.kl_term;
    return est;
}

bool should_stop(const SolverConfig& config, const std::vector<double>& history) {
    const std::size_t w = config.stop_window;
    if (history.size() < 2 * w) return false;
    const auto end = history.end();
    const double previous = std::accumulate(end - 2 * static_cast<std::ptrdiff_t>(w), end - static_cast<std::ptrdiff_t>(w), 0.0) / static_cast<double>(w);
    const double current = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) / static_cast<double>(w);
    const double scale = std::max(std::abs(previous), 1e-300);
    return (previous - current) / scale < config.stop_tol;
}

}  // namespace

SolverResult run(const SolverConfig& config, const KernelModel& kernel,
                 const ReferenceMeasure& ref, const ParticleCloud& init,
                 const ObservationSample& observations, const StepObserver& observer) {
    if (observations.size() < 1) throw InputError("observation sample is empty");
    validate(observations);
    config.validate(static_cast<std::size_t>(observations.size()));
    validate(init);
    if (static_cast<std::size_t>(init.size()) != config.n_particles) {
        throw InputError("initial cloud has " + std::to_string(init.size()) + " particles, config expects " +
                         std::to_string(config.n_particles));
    }
    if (config.alpha > 0.0 && ref.kind() == ReferenceMeasure::Kind::flat) {
        throw InputError("alpha > 0 requires a gaussian reference measure");
    }

    SolverResult result{init, {}};
    ParticleCloud& cloud = result.cloud;
    std::vector<double> history;
    const auto n = static_cast<std::size_t>(init.size());
    const auto d = static_cast<std::size_t>(init.dim());

    ObservationSample fixed_batch;
    if (!config.resample_each_step) {
        fixed_batch = draw_minibatch(observations, config.minibatch, config.seed, 0, config.resample_policy);
    }

    for (std::size_t step = 0;; ++step) {
        try {
            const ObservationSample batch =
                config.resample_each_step
                    ? draw_minibatch(observations, config.minibatch, config.seed, step, config.resample_policy)
                    : fixed_batch;
            const DriftEvaluation drift = drift_empirical(cloud, batch, kernel, ref, config.alpha, config.eta,
                                                          config.denom_floor, config.threads);

            StepRecord rec = describe(cloud, drift);
            rec.step = step;
            if (config.monitor_every > 0 && step % config.monitor_every == 0) {
                rec.estimate = monitor(config, cloud, ref, drift);
                if (rec.estimate) history.push_back(rec.estimate->total);
            }
            if (observer) observer(rec, cloud);
            result.trace.records.push_back(std::move(rec));

            if (step >= config.max_steps) break;
            if (config.early_stop && result.trace.records.back().estimate && should_stop(config, history)) {
                result.trace.stopped_early = true;
                break;
            }

            const Matrix noise = standard_noise(config.seed, step, n, d);
            cloud = tamed_step(cloud, drift.drift, config.gamma, config.alpha, noise);
        } catch (const NumericalFailure& failure) {
            throw failure.at_step(step);
        }
    }
    return result;
}

}  // namespace fredholm
