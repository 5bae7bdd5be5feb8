#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace fredholm {

/// Stream roles keep the noise, minibatch, init and observation streams
/// disjoint even when they share (seed, step, index).
enum class StreamRole : std::uint32_t {
    noise = 1,
    minibatch = 2,
    init = 3,
    observations = 4,
    folds = 5,
    truth = 6,
    misc = 7,
};

/// Philox4x32-10 counter-based generator keyed by (seed, role, step, index).
///
/// Each key names an independent stream, so results never depend on the
/// order in which particles or replicates are processed. Satisfies
/// UniformRandomBitGenerator.
class KeyedStream {
public:
    using result_type = std::uint32_t;

    KeyedStream(std::uint64_t seed, StreamRole role, std::uint64_t step, std::uint64_t index);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on (0, 1), never exactly 0 or 1.
    double uniform();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
};

/// Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

}  // namespace fredholm
