#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jasgan/morphology.hpp"
#include "jasgan/phantom.hpp"

using namespace jasgan;

namespace {

PhantomConfig small_config(std::uint64_t seed) {
    PhantomConfig c;
    c.dims = {16, 48, 48};
    c.atrium_radius_mm = {12.0, 17.0};
    c.atrium_radius_z_mm = {5.0, 6.5};
    c.wall_thickness_vox = {1, 2};
    c.scar_count = {3, 6};
    c.scar_radius_mm = {2.0, 3.5};
    c.distractor_count = 4;
    c.seed = seed;
    return c;
}

double mean_where(const Grid3<float>& img, const Mask& m, bool want) {
    double s = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        if ((m[i] != 0) == want) s += img[i], ++n;
    return s / double(n);
}

} // namespace

TEST(Phantom, SameSeedIsBitIdentical) {
    const auto a = generate_phantom(small_config(7));
    const auto b = generate_phantom(small_config(7));
    EXPECT_EQ(a.volume, b.volume);
    EXPECT_EQ(a.labels, b.labels);
    const auto c = generate_phantom(small_config(8));
    EXPECT_NE(a.volume.data, c.volume.data);
}

TEST(Phantom, InclusionChainHoldsForEverySample) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto p = generate_phantom(small_config(seed));
        const auto& l = p.labels;
        for (std::size_t i = 0; i < l.atrium.size(); ++i) {
            ASSERT_TRUE(!l.scar[i] || l.wall[i]) << "seed " << seed << " voxel " << i;
            ASSERT_TRUE(!l.wall[i] || l.atrium[i]) << "seed " << seed << " voxel " << i;
            ASSERT_TRUE(!l.scar[i] || l.atrium[i]) << "seed " << seed << " voxel " << i;
        }
        const double frac = double(count_nonzero(l.scar)) / double(l.scar.size());
        EXPECT_GE(frac, 0.001);
        EXPECT_LE(frac, 0.05);
        for (std::size_t i = 0; i < l.atrium.size(); ++i) ASSERT_TRUE(!p.distractors[i] || !l.atrium[i]);
    }
}

TEST(Phantom, ScarBrighterThanHealthyWall) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto p = generate_phantom(small_config(seed));
        double scar = 0.0, wall = 0.0;
        std::int64_t ns = 0, nw = 0;
        for (std::size_t i = 0; i < p.labels.wall.size(); ++i) {
            if (p.labels.scar[i]) scar += p.volume.data[i], ++ns;
            else if (p.labels.wall[i]) wall += p.volume.data[i], ++nw;
        }
        EXPECT_GT(scar / double(ns), wall / double(nw) + 0.2);
    }
}

TEST(Phantom, FullAttenuationMakesTheAtriumEdgeInvisible) {
    auto c = small_config(3);
    c.attenuation = 1.0;
    c.noise = 0.0;
    c.blur_sigma_vox = 0.0;
    const auto p = generate_phantom(c);
    const auto edge = morphology::surface(p.labels.atrium);
    std::int64_t checked = 0;
    for (std::size_t i = 0; i < edge.size(); ++i) {
        if (!edge[i] || p.labels.scar[i]) continue;
        EXPECT_FLOAT_EQ(p.volume.data[i], static_cast<float>(c.background_intensity));
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(Phantom, AttenuationScalesBoundaryContrast) {
    auto contrast = [](double attenuation) {
        auto c = small_config(4);
        c.attenuation = attenuation;
        c.noise = 0.0;
        c.blur_sigma_vox = 0.0;
        const auto p = generate_phantom(c);
        Mask healthy_atrium(p.labels.atrium.dims()), outside(p.labels.atrium.dims());
        for (std::size_t i = 0; i < healthy_atrium.size(); ++i) {
            healthy_atrium[i] = p.labels.atrium[i] && !p.labels.scar[i];
            outside[i] = !p.labels.atrium[i] && !p.distractors[i];
        }
        return mean_where(p.volume.data, healthy_atrium, true) - mean_where(p.volume.data, outside, true);
    };
    const double base = small_config(0).atrium_contrast;
    EXPECT_NEAR(contrast(0.0), base, 1e-6);
    EXPECT_NEAR(contrast(0.25), 0.75 * base, 1e-6);
    EXPECT_NEAR(contrast(0.8), 0.2 * base, 1e-6);
}

TEST(Phantom, DefaultConfigScarFractionOverCorpus) {
    // Oracle: count voxels over a 100-sample corpus generated with the default configuration.
    double sum = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        PhantomConfig c;
        c.seed = corpus_sample_seed(11, i);
        const auto p = generate_phantom(c);
        std::int64_t n = 0;
        for (auto v : p.labels.scar.values()) n += v ? 1 : 0;
        const double frac = double(n) / double(p.labels.scar.size());
        ASSERT_GE(frac, c.scar_fraction.min);
        ASSERT_LE(frac, c.scar_fraction.max);
        sum += frac;
    }
    const double mean = sum / 100.0;
    EXPECT_GE(mean, 0.001);
    EXPECT_LE(mean, 0.05);
}

TEST(Phantom, InfeasibleGeometryIsAConfigError) {
    auto c = small_config(0);
    c.wall_thickness_vox = {9, 9};
    EXPECT_THROW(generate_phantom(c), ConfigError);
    c = small_config(0);
    c.attenuation = 1.5;
    EXPECT_THROW(generate_phantom(c), ConfigError);
    c = small_config(0);
    c.atrium_radius_mm = {30.0, 20.0};
    EXPECT_THROW(generate_phantom(c), ConfigError);
    c = small_config(0);
    c.atrium_radius_mm = {30.0, 40.0};
    EXPECT_THROW(generate_phantom(c), ConfigError);
}

TEST(Normalize, UnitStdAndZeroMean) {
    Volume v{Grid3<float>({4, 16, 16}), {}, "noise"};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& x : v.data.values()) x = static_cast<float>(5.0 + g(rng));
    const auto n = normalize_volume(v);
    double mean = 0.0, var = 0.0;
    for (float x : n.data.values()) mean += x;
    mean /= double(n.data.size());
    for (float x : n.data.values()) var += (x - mean) * (x - mean);
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(std::sqrt(var / double(n.data.size())), 1.0, 1e-5);

    const auto twice = normalize_volume(n);
    for (std::size_t i = 0; i < n.data.size(); ++i) ASSERT_NEAR(twice.data[i], n.data[i], 1e-6);
}

TEST(Normalize, MatchesDirectRecomputation) {
    // Values 10±4 alternating: mean 10, population std 4, so output must be (x-10)/4 = ±1.
    Volume v{Grid3<float>({2, 4, 4}), {}, "affine"};
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = (i % 2 == 0) ? 14.0f : 6.0f;
    const auto n = normalize_volume(v);
    for (std::size_t i = 0; i < v.data.size(); ++i) EXPECT_NEAR(n.data[i], (v.data[i] - 10.0) / 4.0, 1e-6);
}

TEST(Normalize, AffineEquivariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        Volume v{Grid3<float>({3, 8, 8}), {}, "v"};
        for (auto& x : v.data.values()) x = static_cast<float>(u(rng));
        const double a = std::exp(u(rng)), b = 5.0 * u(rng);
        Volume w = v;
        for (auto& x : w.data.values()) x = static_cast<float>(a * x + b);
        const auto nv = normalize_volume(v), nw = normalize_volume(w);
        for (std::size_t i = 0; i < v.data.size(); ++i) ASSERT_NEAR(nv.data[i], nw.data[i], 2e-4);
    }
}

TEST(Normalize, ConstantVolumeIsDegenerate) {
    Volume v{Grid3<float>({2, 4, 4}, 3.0f), {}, "flat"};
    EXPECT_THROW(normalize_volume(v), DegenerateInputError);
}

TEST(Patches, FullSizePatchEqualsSlice) {
    const auto p = generate_phantom(small_config(2));
    const auto set = extract_patches(p.volume, p.labels, 48);
    std::int64_t with_atrium = 0;
    for (std::int64_t z = 0; z < 16; ++z) {
        bool any = false;
        for (std::int64_t i = 0; i < 48 * 48; ++i) any |= p.labels.atrium.slice(z)[std::size_t(i)] != 0;
        with_atrium += any ? 1 : 0;
    }
    ASSERT_EQ(std::ssize(set.patches), with_atrium);
    EXPECT_EQ(set.skipped, 16 - with_atrium);
    for (const auto& patch : set.patches) {
        const auto slice = p.volume.data.slice(patch.z);
        EXPECT_TRUE(std::equal(patch.image.begin(), patch.image.end(), slice.begin()));
        EXPECT_EQ(patch.y0, 0);
        EXPECT_EQ(patch.x0, 0);
    }
}

TEST(Patches, AllBackgroundVolumeYieldsNothing) {
    Volume v{Grid3<float>({5, 32, 32}, 1.0f), {}, "bg"};
    const Mask empty({5, 32, 32});
    const auto set = extract_patches(v, LabelPair{empty, empty, empty}, 16);
    EXPECT_TRUE(set.patches.empty());
    EXPECT_EQ(set.skipped, 5);
}

TEST(Patches, EveryPatchContainsAtrium) {
    PhantomConfig c;
    c.seed = 9;
    const auto p = generate_phantom(c);
    for (std::int64_t size : {96, 48, 32}) {
        const auto set = extract_patches(p.volume, p.labels, size);
        ASSERT_FALSE(set.patches.empty());
        for (const auto& patch : set.patches) {
            EXPECT_EQ(std::ssize(patch.image), size * size);
            EXPECT_TRUE(std::any_of(patch.atrium.begin(), patch.atrium.end(), [](auto v) { return v != 0; }));
        }
    }
    EXPECT_THROW(extract_patches(p.volume, p.labels, 97), ShapeError);
}
