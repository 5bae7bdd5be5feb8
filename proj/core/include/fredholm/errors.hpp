#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace fredholm {

/// Invalid arguments or configuration: dimension mismatch, empty sample,
/// degenerate bandwidth, malformed file.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation not defined for this object (e.g. log-density of a flat reference).
class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A computation produced a non-finite value or hit a forbidden region.
/// Carries the step and the particle/bin index when known.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(std::string message,
                              std::optional<std::size_t> step = std::nullopt,
                              std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(compose(message, step, index)),
          message_(std::move(message)), step_(step), index_(index) {}

    std::optional<std::size_t> step() const noexcept { return step_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

    /// Same failure, tagged with the solver step at which it surfaced.
    NumericalFailure at_step(std::size_t step) const {
        return NumericalFailure(message_, step, index_);
    }

private:
    static std::string compose(const std::string& message,
                               std::optional<std::size_t> step,
                               std::optional<std::size_t> index) {
        std::string out = message;
        if (step) out += " at step " + std::to_string(*step);
        if (index) out += " (index " + std::to_string(*index) + ")";
        return out;
    }

    std::string message_;
    std::optional<std::size_t> step_;
    std::optional<std::size_t> index_;
};

}  // namespace fredholm
