#include "fredholm/parallel.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <stdexcept>

namespace fredholm {
namespace {

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (std::size_t workers : {1u, 2u, 7u}) {
        std::vector<int> hits(103, 0);
        parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i] += 1; });
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
    try {
        parallel_for(50, 4, [](std::size_t i) {
            if (i == 13 || i == 40) throw std::runtime_error(std::to_string(i));
        });
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "13");
    }
}

TEST(PairwiseSum, MatchesSmallSumsExactly) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.5};
    EXPECT_EQ(pairwise_sum(v), 10.5);
    EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(PairwiseSum, StridedAgreesWithContiguous) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> grid(300 * 3);
    for (auto& x : grid) x = u(rng);
    std::vector<double> col(300);
    for (std::size_t i = 0; i < 300; ++i) col[i] = grid[i * 3 + 1];
    EXPECT_EQ(pairwise_sum_strided(grid.data() + 1, 300, 3), pairwise_sum(col));
}

TEST(PairwiseSum, CloseToLongDoubleReference) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(100000);
    long double ref = 0;
    for (auto& x : v) {
        x = u(rng);
        ref += x;
    }
    EXPECT_NEAR(pairwise_sum(v), static_cast<double>(ref), 1e-9);
}

}  // namespace
}  // namespace fredholm
