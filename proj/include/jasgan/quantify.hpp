#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "jasgan/grid.hpp"
#include "jasgan/morphology.hpp"

namespace jasgan::quantify {

struct ScarBurden {
    double scar_mm3 = 0.0;
    double wall_mm3 = 0.0;
    double percent = 0.0;
};

/// Scar volume over wall volume, in percent. The percentage uses voxel counts, so spacing cancels.
inline ScarBurden scar_percentage(const Mask& scar, const Mask& wall, const Spacing& spacing) {
    require_same_grid(scar.dims(), wall.dims(), "scar_percentage");
    const auto wall_n = count_nonzero(wall);
    if (wall_n == 0) throw UndefinedMetricError("scar_percentage: wall mask is empty");
    const auto scar_n = count_nonzero(scar);
    return {double(scar_n) * spacing.voxel_volume(), double(wall_n) * spacing.voxel_volume(),
            100.0 * double(scar_n) / double(wall_n)};
}

/// Wall shell of an atrium mask: atrium minus its erosion by a ball of `thickness_vox`.
inline Mask derive_wall(const Mask& atrium, int thickness_vox) {
    if (count_nonzero(atrium) == 0) throw DegenerateInputError("derive_wall: atrium mask is empty");
    if (thickness_vox < 0) throw ConfigError("derive_wall: thickness must be >= 0");
    const Mask inner = morphology::erode(atrium, thickness_vox);
    if (count_nonzero(inner) == 0) throw DegenerateInputError("derive_wall: erosion removes the whole atrium");
    Mask wall(atrium.dims());
    for (std::size_t i = 0; i < wall.size(); ++i) wall[i] = atrium[i] && !inner[i] ? 1 : 0;
    return wall;
}

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct BlandAltman {
    double bias = 0.0;
    double sd = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct AgreementStats {
    double pearson_r = 0.0;
    double slope = 0.0;  // least-squares fit estimates ≈ slope·truths + intercept
    double intercept = 0.0;
    BlandAltman bland_altman;
    std::vector<Point> scatter;       // (truth, estimate)
    std::vector<Point> ba_points;     // (mean of pair, estimate - truth)
};

inline AgreementStats correlation_and_agreement(std::span<const double> estimates, std::span<const double> truths) {
    if (estimates.size() != truths.size()) throw ShapeError("correlation_and_agreement: length mismatch");
    const std::size_t n = estimates.size();
    if (n < 3) throw DegenerateInputError("correlation_and_agreement: need at least 3 pairs");

    double me = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < n; ++i) me += estimates[i], mt += truths[i];
    me /= double(n);
    mt /= double(n);
    double see = 0.0, stt = 0.0, set = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double de = estimates[i] - me, dt = truths[i] - mt;
        see += de * de, stt += dt * dt, set += de * dt;
    }
    if (see == 0.0 || stt == 0.0) throw UndefinedMetricError("correlation_and_agreement: zero variance");

    AgreementStats out;
    out.pearson_r = std::clamp(set / std::sqrt(see * stt), -1.0, 1.0);
    out.slope = set / stt;
    out.intercept = me - out.slope * mt;

    std::vector<double> diff(n);
    double bias = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = estimates[i] - truths[i];
        bias += diff[i];
        out.scatter.push_back({truths[i], estimates[i]});
        out.ba_points.push_back({0.5 * (estimates[i] + truths[i]), diff[i]});
    }
    bias /= double(n);
    double ss = 0.0;
    for (double v : diff) ss += (v - bias) * (v - bias);
    const double sd = std::sqrt(ss / double(n - 1));
    out.bland_altman = {bias, sd, bias - 1.96 * sd, bias + 1.96 * sd};
    return out;
}

} // namespace jasgan::quantify
