#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "pacnr/rng.hpp"

using pacnr::RngStream;

TEST(Rng, SameSeedSameStream) {
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
    RngStream a(42, 7), b(42, 8), c(43, 7);
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        same_b += x == b.next_u64();
        same_c += x == c.next_u64();
    }
    EXPECT_EQ(same_b, 0);
    EXPECT_EQ(same_c, 0);
}

// Frozen values guard the documented generator against accidental change.
TEST(Rng, FrozenFirstDraws) {
    RngStream r(0, 0);
    const std::uint64_t key = pacnr::detail::mix64(0 ^ pacnr::detail::mix64(0x632BE59BD9B4E019ull));
    EXPECT_EQ(r.next_u64(), pacnr::detail::mix64(key + 0x9E3779B97F4A7C15ull));
    EXPECT_EQ(r.next_u64(), pacnr::detail::mix64(key + 2 * 0x9E3779B97F4A7C15ull));
}

TEST(Rng, UniformInUnitInterval) {
    RngStream r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, BelowIsUnbiased) {
    RngStream r(2);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[r.below(7)];
    double chi2 = 0;
    for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi2, 22.46);  // 6 dof, p = 0.001
}

TEST(Rng, NormalMoments) {
    RngStream r(3);
    const int n = 100000;
    double s = 0, s2 = 0;
    std::vector<double> xs(n);
    for (double& x : xs) x = r.normal();
    for (double x : xs) s += x;
    const double mean = s / n;
    for (double x : xs) s2 += (x - mean) * (x - mean);
    EXPECT_LT(std::abs(mean), 4 / std::sqrt(double(n)));
    EXPECT_LT(std::abs(s2 / (n - 1) - 1), 0.05);
}

TEST(Rng, SplitIsDeterministicAndDistinct) {
    const RngStream root(9, 1);
    RngStream a = root.split(3), b = root.split(3), c = root.split(4);
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
}

TEST(Rng, ShuffleIsPermutation) {
    RngStream r(5);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    pacnr::shuffle(v, r);
    std::vector<int> s = v;
    std::sort(s.begin(), s.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(s[i], i);
    std::vector<int> id(50);
    std::iota(id.begin(), id.end(), 0);
    EXPECT_NE(v, id);
}
