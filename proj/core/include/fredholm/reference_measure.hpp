#pragma once

#include "fredholm/rng.hpp"
#include "fredholm/types.hpp"

#include <cstddef>
#include <vector>

namespace fredholm {

/// Reference measure pi0 = exp(-U). Either a diagonal Gaussian or the flat
/// (improper) reference with U = 0.
class ReferenceMeasure {
public:
    enum class Kind { gaussian, flat };

    static ReferenceMeasure gaussian(std::vector<double> mean, std::vector<double> variances);
    static ReferenceMeasure flat(std::size_t dim);

    /// Gaussian with the sample's per-coordinate mean (plus `mean_offset`) and
    /// unbiased sample variance.
    static ReferenceMeasure from_sample(const ObservationSample& sample,
                                        std::vector<double> mean_offset = {});

    Kind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& variances() const noexcept { return var_; }

    /// grad U(x); zero for the flat kind.
    void grad_u(Point x, MutablePoint out) const;
    std::vector<double> grad_u(Point x) const;

    /// log pi0(x) including the Gaussian normalising constant.
    /// Throws UnsupportedOperation for the flat kind.
    double log_density(Point x) const;

    /// Lipschitz constant of grad U: max(1 / variances), 0 when flat.
    double lipschitz() const noexcept;
    /// Dissipativity constants (m, c) with <grad U(x), x> >= m |x|^2 - c
    /// around the mean; m = min(1 / variances), c = 0. Diagnostics only.
    double dissipativity_m() const noexcept;
    double dissipativity_c() const noexcept { return 0.0; }

    /// One draw from the Gaussian. Throws UnsupportedOperation when flat.
    void sample(KeyedStream& rng, MutablePoint out) const;

private:
    ReferenceMeasure(Kind kind, std::size_t dim, std::vector<double> mean, std::vector<double> var);

    void check_dim(std::size_t n) const;

    Kind kind_;
    std::size_t dim_;
    std::vector<double> mean_;
    std::vector<double> var_;
    double log_norm_ = 0.0;
};

}  // namespace fredholm
