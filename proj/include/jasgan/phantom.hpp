#pragma once

// Synthetic nested-target volumes: a large low-contrast ellipsoidal atrium, a thin wall shell,
// small bright scar patches on the wall, and bright look-alike blobs outside the atrium.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "jasgan/grid.hpp"
#include "jasgan/morphology.hpp"

namespace jasgan {

template <typename T>
struct Range {
    T min{};
    T max{};
    bool valid() const { return min <= max; }
    friend bool operator==(const Range&, const Range&) = default;
};

struct PhantomConfig {
    Dims dims{32, 96, 96};
    Spacing spacing{1.0, 1.0, 1.0};
    Range<double> atrium_radius_mm{22.0, 32.0};   // in-plane semi-axes
    Range<double> atrium_radius_z_mm{9.0, 13.0};  // through-plane semi-axis
    double shape_irregularity = 0.08;             // relative amplitude of angular radius modulation
    Range<int> wall_thickness_vox{2, 3};
    Range<int> scar_count{3, 8};
    Range<double> scar_radius_mm{3.0, 6.0};
    Range<double> scar_fraction{0.001, 0.05};     // of total voxels
    int distractor_count = 6;
    double attenuation = 0.6;                     // 1 removes atrium/background contrast entirely
    double background_intensity = 0.2;
    double atrium_contrast = 0.4;
    double scar_intensity = 1.0;
    double scar_heterogeneity = 0.15;
    double blur_sigma_vox = 0.6;
    double noise = 0.1;
    std::uint64_t seed = 0;

    friend bool operator==(const PhantomConfig&, const PhantomConfig&) = default;
};

struct Phantom {
    Volume volume;
    LabelPair labels;
    Mask distractors;  // bright off-atrium structures (not a label; kept for analysis)
};

namespace detail {

inline void gaussian_blur_axis(Grid3<float>& g, double sigma, int axis) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& k : kernel) k /= sum;

    const Dims d = g.dims();
    const Grid3<float> src = g;
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    std::int64_t zz = z, yy = y, xx = x;
                    if (axis == 0) zz = std::clamp<std::int64_t>(z + i, 0, d.depth - 1);
                    if (axis == 1) yy = std::clamp<std::int64_t>(y + i, 0, d.height - 1);
                    if (axis == 2) xx = std::clamp<std::int64_t>(x + i, 0, d.width - 1);
                    acc += kernel[static_cast<std::size_t>(i + radius)] * src(zz, yy, xx);
                }
                g(z, y, x) = static_cast<float>(acc);
            }
}

inline void validate(const PhantomConfig& c) {
    if (c.dims.depth <= 0 || c.dims.height <= 0 || c.dims.width <= 0) throw ConfigError("phantom grid must be nonempty");
    if (!c.spacing.valid()) throw ConfigError("spacing components must be > 0");
    if (!c.atrium_radius_mm.valid() || !c.atrium_radius_z_mm.valid() || !c.wall_thickness_vox.valid() ||
        !c.scar_count.valid() || !c.scar_radius_mm.valid() || !c.scar_fraction.valid())
        throw ConfigError("phantom ranges must be nonempty (min <= max)");
    if (c.attenuation < 0.0 || c.attenuation > 1.0) throw ConfigError("attenuation must lie in [0,1]");
    if (c.noise < 0.0 || c.blur_sigma_vox < 0.0 || c.distractor_count < 0 || c.scar_count.min < 0)
        throw ConfigError("noise, blur, and counts must be nonnegative");
    if (c.atrium_radius_mm.min <= 0.0 || c.atrium_radius_z_mm.min <= 0.0) throw ConfigError("atrium radii must be > 0");
    if (c.wall_thickness_vox.min < 1) throw ConfigError("wall thickness must be at least one voxel");

    const double inflate = 1.0 + c.shape_irregularity;
    const double half_y = 0.5 * double(c.dims.height) * c.spacing.y, half_x = 0.5 * double(c.dims.width) * c.spacing.x;
    const double half_z = 0.5 * double(c.dims.depth) * c.spacing.z;
    if (c.atrium_radius_mm.max * inflate >= std::min(half_y, half_x) - c.spacing.x ||
        c.atrium_radius_z_mm.max >= half_z - c.spacing.z)
        throw ConfigError("atrium does not fit inside the grid");
    const double min_radius_vox = std::min({c.atrium_radius_mm.min * (1.0 - c.shape_irregularity) / c.spacing.x,
                                            c.atrium_radius_mm.min * (1.0 - c.shape_irregularity) / c.spacing.y,
                                            c.atrium_radius_z_mm.min / c.spacing.z});
    if (double(c.wall_thickness_vox.max) >= min_radius_vox) throw ConfigError("wall thicker than the atrium radius");
}

} // namespace detail

/// Pure function of the config (including its seed).
inline Phantom generate_phantom(const PhantomConfig& c) {
    detail::validate(c);
    std::mt19937_64 rng(c.seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const Dims d = c.dims;
    const Spacing sp = c.spacing;

    // Atrium: irregular ellipsoid, centre jittered by up to 5% of the grid.
    const double ry = uniform(c.atrium_radius_mm.min, c.atrium_radius_mm.max);
    const double rx = uniform(c.atrium_radius_mm.min, c.atrium_radius_mm.max);
    const double rz = uniform(c.atrium_radius_z_mm.min, c.atrium_radius_z_mm.max);
    const int lobes = uniform_int(2, 4);
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);
    const double slack_y = std::max(0.0, 0.5 * d.height * sp.y - ry * (1.0 + c.shape_irregularity) - 2.0 * sp.y);
    const double slack_x = std::max(0.0, 0.5 * d.width * sp.x - rx * (1.0 + c.shape_irregularity) - 2.0 * sp.x);
    const double cy = 0.5 * (d.height - 1) * sp.y + uniform(-1.0, 1.0) * std::min(slack_y, 0.05 * d.height * sp.y);
    const double cx = 0.5 * (d.width - 1) * sp.x + uniform(-1.0, 1.0) * std::min(slack_x, 0.05 * d.width * sp.x);
    const double cz = 0.5 * (d.depth - 1) * sp.z;

    Mask atrium(d);
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
                const double dz = z * sp.z - cz, dy = y * sp.y - cy, dx = x * sp.x - cx;
                const double theta = std::atan2(dy, dx);
                const double limit = 1.0 + c.shape_irregularity * std::sin(lobes * theta + phase);
                const double rho2 = (dz * dz) / (rz * rz) + (dy * dy) / (ry * ry) + (dx * dx) / (rx * rx);
                atrium(z, y, x) = rho2 <= limit * limit ? 1 : 0;
            }

    const int thickness = uniform_int(c.wall_thickness_vox.min, c.wall_thickness_vox.max);
    const Mask inner = morphology::erode(atrium, thickness);
    Mask wall(d);
    std::vector<std::size_t> wall_voxels;
    for (std::size_t i = 0; i < atrium.size(); ++i) {
        wall[i] = atrium[i] && !inner[i] ? 1 : 0;
        if (wall[i]) wall_voxels.push_back(i);
    }
    const double total = double(d.count());
    if (double(wall_voxels.size()) < c.scar_fraction.min * total)
        throw ConfigError("wall too small to host the minimum scar fraction");

    // Scars: wall voxels within a random radius of random wall seeds.
    auto coords = [&](std::size_t i) {
        const auto x = std::int64_t(i % std::size_t(d.width));
        const auto y = std::int64_t((i / std::size_t(d.width)) % std::size_t(d.height));
        const auto z = std::int64_t(i / std::size_t(d.slice_count()));
        return std::array<std::int64_t, 3>{z, y, x};
    };
    Mask scar(d);
    std::vector<float> gain(scar.size(), 1.0f);
    std::int64_t scar_count = 0;
    const int wanted = uniform_int(c.scar_count.min, c.scar_count.max);
    const std::int64_t max_scar = static_cast<std::int64_t>(c.scar_fraction.max * total);
    const std::int64_t min_scar = static_cast<std::int64_t>(std::ceil(c.scar_fraction.min * total));
    for (int attempt = 0, placed = 0; attempt < 20 * (wanted + 1) && (placed < wanted || scar_count < min_scar); ++attempt) {
        const auto seed_idx = wall_voxels[std::uniform_int_distribution<std::size_t>(0, wall_voxels.size() - 1)(rng)];
        const auto [sz, sy, sx] = coords(seed_idx);
        const double r = uniform(c.scar_radius_mm.min, c.scar_radius_mm.max);
        const float g = static_cast<float>(1.0 + uniform(-c.scar_heterogeneity, c.scar_heterogeneity));
        const auto rz_v = std::int64_t(std::ceil(r / sp.z)), ry_v = std::int64_t(std::ceil(r / sp.y)),
                   rx_v = std::int64_t(std::ceil(r / sp.x));
        std::vector<std::size_t> added;
        for (auto z = sz - rz_v; z <= sz + rz_v; ++z)
            for (auto y = sy - ry_v; y <= sy + ry_v; ++y)
                for (auto x = sx - rx_v; x <= sx + rx_v; ++x) {
                    if (!scar.contains(z, y, x)) continue;
                    const double ddz = (z - sz) * sp.z, ddy = (y - sy) * sp.y, ddx = (x - sx) * sp.x;
                    const auto idx = scar.index(z, y, x);
                    if (wall[idx] && !scar[idx] && ddz * ddz + ddy * ddy + ddx * ddx <= r * r) added.push_back(idx);
                }
        if (scar_count + std::int64_t(added.size()) > max_scar) continue;
        for (auto idx : added) {
            scar[idx] = 1;
            gain[idx] = g;
        }
        scar_count += std::int64_t(added.size());
        ++placed;
    }
    if (scar_count < min_scar) throw ConfigError("could not place enough scar within the configured fraction band");

    // Distractors: thin bright discs away from the atrium.
    const auto dist_to_atrium = morphology::distance_to(atrium, sp);
    Mask distractors(d);
    for (int k = 0, attempts = 0; k < c.distractor_count && attempts < 200 * (c.distractor_count + 1); ++attempts) {
        const double r = uniform(c.scar_radius_mm.min, c.scar_radius_mm.max);
        const auto z0 = std::int64_t(uniform(0.0, double(d.depth)));
        const auto y0 = std::int64_t(uniform(0.0, double(d.height)));
        const auto x0 = std::int64_t(uniform(0.0, double(d.width)));
        if (!distractors.contains(z0, y0, x0) || dist_to_atrium(z0, y0, x0) < r + 2.0 * sp.x) continue;
        // Random plane normal; keep voxels within half a wall thickness of the plane.
        const double nz = uniform(-1.0, 1.0), ny = uniform(-1.0, 1.0), nx = uniform(-1.0, 1.0);
        const double nn = std::sqrt(nz * nz + ny * ny + nx * nx) + 1e-12;
        const double half = 0.5 * thickness * sp.x + 0.25;
        const auto rz_v = std::int64_t(std::ceil(r / sp.z)), ry_v = std::int64_t(std::ceil(r / sp.y)),
                   rx_v = std::int64_t(std::ceil(r / sp.x));
        const float g = static_cast<float>(1.0 + uniform(-c.scar_heterogeneity, c.scar_heterogeneity));
        for (auto z = z0 - rz_v; z <= z0 + rz_v; ++z)
            for (auto y = y0 - ry_v; y <= y0 + ry_v; ++y)
                for (auto x = x0 - rx_v; x <= x0 + rx_v; ++x) {
                    if (!distractors.contains(z, y, x) || atrium(z, y, x)) continue;
                    const double ddz = (z - z0) * sp.z, ddy = (y - y0) * sp.y, ddx = (x - x0) * sp.x;
                    const double along = std::abs(ddz * nz + ddy * ny + ddx * nx) / nn;
                    if (ddz * ddz + ddy * ddy + ddx * ddx <= r * r && along <= half) {
                        distractors(z, y, x) = 1;
                        gain[distractors.index(z, y, x)] = g;
                    }
                }
        ++k;
    }

    // Intensities: background, attenuated atrium, bright scar and distractors.
    const float bg = static_cast<float>(c.background_intensity);
    const float atrium_level = static_cast<float>(c.background_intensity + (1.0 - c.attenuation) * c.atrium_contrast);
    const float bright = static_cast<float>(c.scar_intensity);
    Grid3<float> image(d, bg);
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (scar[i] || distractors[i]) image[i] = bright * gain[i];
        else if (atrium[i]) image[i] = atrium_level;
    }
    if (c.blur_sigma_vox > 0.0)
        for (int axis = 0; axis < 3; ++axis) detail::gaussian_blur_axis(image, c.blur_sigma_vox, axis);
    if (c.noise > 0.0) {
        std::normal_distribution<double> gauss(0.0, c.noise);
        for (auto& v : image.values()) v += static_cast<float>(gauss(rng));
    }

    Phantom out;
    out.volume = Volume{std::move(image), sp, "phantom-" + std::to_string(c.seed)};
    out.labels = LabelPair{std::move(atrium), std::move(scar), std::move(wall)};
    out.distractors = std::move(distractors);
    return out;
}

/// Per-sample seed for a corpus: independent streams keyed by (base seed, index).
inline std::uint64_t corpus_sample_seed(std::uint64_t base_seed, std::uint64_t index) {
    std::seed_seq seq{std::uint32_t(base_seed & 0xffffffffu), std::uint32_t(base_seed >> 32), std::uint32_t(index & 0xffffffffu),
                      std::uint32_t(index >> 32)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (std::uint64_t(words[0]) << 32) | words[1];
}

/// Zero-mean, unit-standard-deviation rescaling over the whole grid.
inline Volume normalize_volume(const Volume& v) {
    const auto vals = v.data.values();
    if (vals.empty()) throw DegenerateInputError("cannot normalize an empty volume");
    double mean = 0.0;
    for (float x : vals) mean += x;
    mean /= double(vals.size());
    double var = 0.0;
    for (float x : vals) var += (x - mean) * (x - mean);
    var /= double(vals.size());
    if (!(var > 0.0) || !std::isfinite(var)) throw DegenerateInputError("volume '" + v.id + "' has zero variance");
    const double inv_std = 1.0 / std::sqrt(var);
    Volume out = v;
    for (std::size_t i = 0; i < vals.size(); ++i) out.data[i] = static_cast<float>((vals[i] - mean) * inv_std);
    return out;
}

struct Patch {
    std::string sample_id;
    std::int64_t z = 0;
    std::int64_t y0 = 0;
    std::int64_t x0 = 0;
    std::int64_t size = 0;
    std::vector<float> image;
    std::vector<std::uint8_t> atrium;
    std::vector<std::uint8_t> scar;
    std::vector<std::uint8_t> wall;
};

struct PatchSet {
    std::vector<Patch> patches;
    std::int64_t skipped = 0;  // axial slices without any atrium voxel
};

/// Axial square patches centred on the atrium of each slice; atrium-free slices are skipped.
inline PatchSet extract_patches(const Volume& v, const LabelPair& labels, std::int64_t patch) {
    const Dims d = v.data.dims();
    require_same_grid(d, labels.atrium.dims(), "extract_patches");
    if (patch <= 0 || patch > d.height || patch > d.width) throw ShapeError("patch size must fit inside the slice");

    PatchSet out;
    for (std::int64_t z = 0; z < d.depth; ++z) {
        std::int64_t ymin = d.height, ymax = -1, xmin = d.width, xmax = -1;
        for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x)
                if (labels.atrium(z, y, x)) {
                    ymin = std::min(ymin, y), ymax = std::max(ymax, y);
                    xmin = std::min(xmin, x), xmax = std::max(xmax, x);
                }
        if (ymax < 0) {
            ++out.skipped;
            continue;
        }
        const std::int64_t y0 = std::clamp<std::int64_t>((ymin + ymax + 1) / 2 - patch / 2, 0, d.height - patch);
        const std::int64_t x0 = std::clamp<std::int64_t>((xmin + xmax + 1) / 2 - patch / 2, 0, d.width - patch);
        Patch p;
        p.sample_id = v.id;
        p.z = z, p.y0 = y0, p.x0 = x0, p.size = patch;
        const auto n = static_cast<std::size_t>(patch * patch);
        p.image.resize(n), p.atrium.resize(n), p.scar.resize(n), p.wall.resize(n);
        for (std::int64_t y = 0; y < patch; ++y)
            for (std::int64_t x = 0; x < patch; ++x) {
                const auto src = v.data.index(z, y0 + y, x0 + x);
                const auto dst = static_cast<std::size_t>(y * patch + x);
                p.image[dst] = v.data[src];
                p.atrium[dst] = labels.atrium[src];
                p.scar[dst] = labels.scar[src];
                p.wall[dst] = labels.wall[src];
            }
        out.patches.push_back(std::move(p));
    }
    return out;
}

} // namespace jasgan
