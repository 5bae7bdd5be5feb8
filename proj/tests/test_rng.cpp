#include "fredholm/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace fredholm {
namespace {

// Known-answer vectors from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
    const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(KeyedStream, SameKeySameSequence) {
    KeyedStream a(42, StreamRole::noise, 3, 7);
    KeyedStream b(42, StreamRole::noise, 3, 7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(KeyedStream, DifferentKeysDiffer) {
    std::set<std::uint32_t> firsts;
    for (std::uint64_t seed : {0u, 1u}) {
        for (auto role : {StreamRole::noise, StreamRole::minibatch, StreamRole::init}) {
            for (std::uint64_t step : {0u, 1u}) {
                for (std::uint64_t index : {0u, 1u}) firsts.insert(KeyedStream(seed, role, step, index)());
            }
        }
    }
    EXPECT_EQ(firsts.size(), 24u);
}

TEST(KeyedStream, HighSeedBitsMatter) {
    KeyedStream a(1, StreamRole::noise, 0, 0);
    KeyedStream b(1 + (std::uint64_t{1} << 40), StreamRole::noise, 0, 0);
    EXPECT_NE(a(), b());
}

TEST(KeyedStream, UniformIsOpenAndCentred) {
    KeyedStream s(9, StreamRole::misc, 0, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

}  // namespace
}  // namespace fredholm
