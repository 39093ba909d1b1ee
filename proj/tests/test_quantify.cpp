#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jasgan/quantify.hpp"

using namespace jasgan;
using namespace jasgan::quantify;

namespace {

Mask cube(Dims d, std::int64_t lo, std::int64_t hi) {
    Mask m(d);
    for (std::int64_t z = lo; z < hi; ++z)
        for (std::int64_t y = lo; y < hi; ++y)
            for (std::int64_t x = lo; x < hi; ++x) m(z, y, x) = 1;
    return m;
}

} // namespace

TEST(ScarPercentage, Substitution) {
    Mask wall({1, 1, 300}), scar({1, 1, 300});
    for (std::size_t i = 0; i < 300; ++i) wall[i] = 1;
    for (std::size_t i = 0; i < 15; ++i) scar[i] = 1;
    EXPECT_DOUBLE_EQ(scar_percentage(scar, wall, {1, 1, 1}).percent, 5.0);
    EXPECT_DOUBLE_EQ(scar_percentage(wall, wall, {1, 1, 1}).percent, 100.0);
    EXPECT_DOUBLE_EQ(scar_percentage(Mask({1, 1, 300}), wall, {1, 1, 1}).percent, 0.0);
    EXPECT_THROW(scar_percentage(scar, Mask({1, 1, 300}), {1, 1, 1}), UndefinedMetricError);
}

TEST(ScarPercentage, SpacingCancels) {
    Mask wall = cube({6, 6, 6}, 1, 5), scar({6, 6, 6});
    scar(2, 2, 2) = scar(2, 2, 3) = scar(3, 3, 3) = 1;
    const auto a = scar_percentage(scar, wall, {1, 1, 1});
    const auto b = scar_percentage(scar, wall, {2.0, 0.5, 1.5});
    EXPECT_DOUBLE_EQ(a.percent, b.percent);
    EXPECT_DOUBLE_EQ(b.scar_mm3, 3 * 1.5);
    EXPECT_DOUBLE_EQ(b.wall_mm3, 64 * 1.5);
    EXPECT_DOUBLE_EQ(100.0 * b.scar_mm3 / b.wall_mm3, b.percent);
}

TEST(DeriveWall, CubeShell) {
    const Mask atrium = cube({7, 7, 7}, 1, 6);
    // Oracle: voxels of the 5x5x5 cube with a 6-neighbour outside the cube.
    std::int64_t expected = 0;
    for (int z = 1; z < 6; ++z)
        for (int y = 1; y < 6; ++y)
            for (int x = 1; x < 6; ++x)
                expected += (z == 1 || z == 5 || y == 1 || y == 5 || x == 1 || x == 5) ? 1 : 0;
    ASSERT_EQ(expected, 98);
    const Mask wall = derive_wall(atrium, 1);
    EXPECT_EQ(count_nonzero(wall), expected);
    EXPECT_TRUE(is_subset(wall, atrium));
    EXPECT_EQ(count_nonzero(derive_wall(atrium, 0)), 0);
}

TEST(DeriveWall, ErrorsAndSubsetProperty) {
    EXPECT_THROW(derive_wall(cube({5, 5, 5}, 1, 4), 2), DegenerateInputError);
    EXPECT_THROW(derive_wall(Mask({3, 3, 3}), 1), DegenerateInputError);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        Mask m({8, 12, 12});
        for (std::int64_t z = 1; z < 7; ++z)
            for (std::int64_t y = 1; y < 11; ++y)
                for (std::int64_t x = 1; x < 11; ++x) m(z, y, x) = rng() % 8 != 0;
        try {
            EXPECT_TRUE(is_subset(derive_wall(m, 1), m));
        } catch (const DegenerateInputError&) {
        }
    }
}

TEST(Agreement, IdenticalSequences) {
    const std::vector<double> v{1.0, 4.0, 2.5, 7.25, 3.0};
    const auto s = correlation_and_agreement(v, v);
    EXPECT_EQ(s.pearson_r, 1.0);
    EXPECT_EQ(s.bland_altman.bias, 0.0);
    EXPECT_EQ(s.bland_altman.lower, 0.0);
    EXPECT_EQ(s.bland_altman.upper, 0.0);
    EXPECT_EQ(s.scatter.size(), v.size());
}

TEST(Agreement, DoubledEstimates) {
    const std::vector<double> truth{1.0, 4.0, 2.5, 7.25, 3.0};
    std::vector<double> est;
    for (double t : truth) est.push_back(2.0 * t);
    const auto s = correlation_and_agreement(est, truth);
    EXPECT_NEAR(s.pearson_r, 1.0, 1e-12);
    EXPECT_NEAR(s.bland_altman.bias, (1.0 + 4.0 + 2.5 + 7.25 + 3.0) / 5.0, 1e-12);
    EXPECT_NEAR(s.slope, 2.0, 1e-12);
    EXPECT_NEAR(s.intercept, 0.0, 1e-12);
}

TEST(Agreement, Preconditions) {
    const std::vector<double> flat{2.0, 2.0, 2.0}, t{1.0, 2.0, 3.0};
    EXPECT_THROW(correlation_and_agreement(flat, t), UndefinedMetricError);
    EXPECT_THROW(correlation_and_agreement(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DegenerateInputError);
    EXPECT_THROW(correlation_and_agreement(t, std::vector<double>{1, 2}), ShapeError);
}

TEST(Agreement, AffineInvarianceAndSwapSymmetry) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(12), b(12), a2(12);
        const double scale = std::exp(g(rng)), shift = 3.0 * g(rng);
        for (std::size_t i = 0; i < 12; ++i) {
            a[i] = g(rng);
            b[i] = a[i] + 0.5 * g(rng);
            a2[i] = scale * a[i] + shift;
        }
        const auto s = correlation_and_agreement(a, b);
        EXPECT_NEAR(s.pearson_r, correlation_and_agreement(a2, b).pearson_r, 1e-12);
        const auto swapped = correlation_and_agreement(b, a);
        EXPECT_NEAR(s.bland_altman.bias, -swapped.bland_altman.bias, 1e-12);
        EXPECT_NEAR(s.bland_altman.upper - s.bland_altman.lower, swapped.bland_altman.upper - swapped.bland_altman.lower, 1e-12);
    }
}
