#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "jasgan/grid.hpp"

namespace jasgan::morphology {

struct Offset {
    int dz, dy, dx;
};

/// Voxel offsets of a discrete ball: dz²+dy²+dx² ≤ r².
inline std::vector<Offset> ball(int radius) {
    std::vector<Offset> out;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                if (dz * dz + dy * dy + dx * dx <= radius * radius) out.push_back({dz, dy, dx});
    return out;
}

/// Binary erosion by a ball. Voxels outside the grid count as background.
inline Mask erode(const Mask& m, int radius) {
    if (radius <= 0) return m;
    const auto se = ball(radius);
    const Dims d = m.dims();
    Mask out(d);
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
                if (!m(z, y, x)) continue;
                bool keep = true;
                for (const auto& o : se) {
                    const auto zz = z + o.dz, yy = y + o.dy, xx = x + o.dx;
                    if (!m.contains(zz, yy, xx) || !m(zz, yy, xx)) {
                        keep = false;
                        break;
                    }
                }
                out(z, y, x) = keep ? 1 : 0;
            }
    return out;
}

/// Surface voxels: set voxels with at least one 6-neighbour unset (or outside the grid).
inline Mask surface(const Mask& m) {
    static constexpr std::array<Offset, 6> kSix{{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
    const Dims d = m.dims();
    Mask out(d);
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t y = 0; y < d.height; ++y)
            for (std::int64_t x = 0; x < d.width; ++x) {
                if (!m(z, y, x)) continue;
                for (const auto& o : kSix) {
                    const auto zz = z + o.dz, yy = y + o.dy, xx = x + o.dx;
                    if (!m.contains(zz, yy, xx) || !m(zz, yy, xx)) {
                        out(z, y, x) = 1;
                        break;
                    }
                }
            }
    return out;
}

namespace detail {

// 1-D squared-distance transform of a sampled function (lower envelope of parabolas).
// Non-finite samples never contribute to the envelope.
inline void edt_1d(const double* f, double* out, std::int64_t n, double step, std::vector<std::int64_t>& v,
                   std::vector<double>& zb) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    v.assign(static_cast<std::size_t>(n), 0);
    zb.assign(static_cast<std::size_t>(n) + 1, 0.0);
    const double w2 = step * step;
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        double s = -kInf;
        while (k >= 0) {
            const auto p = v[static_cast<std::size_t>(k)];
            s = ((f[q] + w2 * double(q * q)) - (f[p] + w2 * double(p * p))) / (2.0 * w2 * double(q - p));
            if (s > zb[static_cast<std::size_t>(k)]) break;
            --k;
            s = -kInf;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        zb[static_cast<std::size_t>(k)] = s;
        zb[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        for (std::int64_t q = 0; q < n; ++q) out[q] = kInf;
        return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (zb[static_cast<std::size_t>(j) + 1] < double(q)) ++j;
        const auto p = v[static_cast<std::size_t>(j)];
        const double dq = step * double(q - p);
        out[q] = dq * dq + f[p];
    }
}

} // namespace detail

/// Exact Euclidean distance (mm) from every voxel to the nearest set voxel of `seeds`.
/// Separable lower-envelope transform with anisotropic spacing; +inf when `seeds` is empty.
inline Grid3<double> distance_to(const Mask& seeds, const Spacing& spacing) {
    const Dims d = seeds.dims();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Grid3<double> g(d, kInf);
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (seeds[i]) g[i] = 0.0;

    const std::int64_t longest = std::max({d.depth, d.height, d.width});
    std::vector<double> line(static_cast<std::size_t>(longest)), res(static_cast<std::size_t>(longest));
    std::vector<std::int64_t> v;
    std::vector<double> zb;

    // x axis
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t y = 0; y < d.height; ++y) {
            for (std::int64_t x = 0; x < d.width; ++x) line[x] = g(z, y, x);
            detail::edt_1d(line.data(), res.data(), d.width, spacing.x, v, zb);
            for (std::int64_t x = 0; x < d.width; ++x) g(z, y, x) = res[x];
        }
    // y axis
    for (std::int64_t z = 0; z < d.depth; ++z)
        for (std::int64_t x = 0; x < d.width; ++x) {
            for (std::int64_t y = 0; y < d.height; ++y) line[y] = g(z, y, x);
            detail::edt_1d(line.data(), res.data(), d.height, spacing.y, v, zb);
            for (std::int64_t y = 0; y < d.height; ++y) g(z, y, x) = res[y];
        }
    // z axis
    for (std::int64_t y = 0; y < d.height; ++y)
        for (std::int64_t x = 0; x < d.width; ++x) {
            for (std::int64_t z = 0; z < d.depth; ++z) line[z] = g(z, y, x);
            detail::edt_1d(line.data(), res.data(), d.depth, spacing.z, v, zb);
            for (std::int64_t z = 0; z < d.depth; ++z) g(z, y, x) = res[z];
        }
    for (auto& val : g.values()) val = std::sqrt(val);
    return g;
}

} // namespace jasgan::morphology
