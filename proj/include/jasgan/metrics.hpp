#pragma once

// Volume-level segmentation metrology: overlap (DSC, JI), surface distance (ASD), normalized mutual
// information, under/over-segmentation rates, and inter-observer agreement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jasgan/grid.hpp"
#include "jasgan/morphology.hpp"

namespace jasgan::metrics {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

template <typename T>
ConfusionCounts confusion(std::span<const T> pred, std::span<const T> gt) {
    if (pred.size() != gt.size()) throw ShapeError("confusion: sizes differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != T{}, g = gt[i] != T{};
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
    require_same_grid(pred.dims(), gt.dims(), "confusion");
    return confusion<std::uint8_t>(pred.values(), gt.values());
}

struct Overlap {
    double dsc = 0.0;
    double ji = 0.0;
};

/// DSC and JI from counts. Two empty masks agree perfectly (1, 1).
inline Overlap region_metrics(const ConfusionCounts& c) {
    const std::int64_t denom_dsc = 2 * c.tp + c.fp + c.fn;
    if (denom_dsc == 0) return {1.0, 1.0};
    return {2.0 * double(c.tp) / double(denom_dsc), double(c.tp) / double(c.tp + c.fp + c.fn)};
}

inline Overlap region_metrics(const Mask& pred, const Mask& gt) { return region_metrics(confusion(pred, gt)); }

struct Rates {
    double usr = 0.0;
    double osr = 0.0;
};

/// USR = FN/(TP+FN), OSR = FP/(TP+FN).
inline Rates seg_rates(const ConfusionCounts& c) {
    const std::int64_t positives = c.tp + c.fn;
    if (positives == 0) throw UndefinedMetricError("seg_rates: ground truth is empty");
    return {double(c.fn) / double(positives), double(c.fp) / double(positives)};
}

enum class SurfaceDistanceMode { Symmetric, PredToTruth };

/// Average surface distance in mm between the 6-connected surfaces of two masks.
inline double average_surface_distance(const Mask& pred, const Mask& gt, const Spacing& spacing,
                                       SurfaceDistanceMode mode = SurfaceDistanceMode::Symmetric) {
    require_same_grid(pred.dims(), gt.dims(), "average_surface_distance");
    if (count_nonzero(pred) == 0 || count_nonzero(gt) == 0)
        throw UndefinedMetricError("average_surface_distance: empty mask");
    const Mask sp = morphology::surface(pred), sg = morphology::surface(gt);
    auto directed_mean = [](const Mask& from, const Grid3<double>& dist) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < from.size(); ++i)
            if (from[i]) sum += dist[i], ++n;
        return sum / double(n);
    };
    const double p_to_g = directed_mean(sp, morphology::distance_to(sg, spacing));
    if (mode == SurfaceDistanceMode::PredToTruth) return p_to_g;
    const double g_to_p = directed_mean(sg, morphology::distance_to(sp, spacing));
    return 0.5 * (p_to_g + g_to_p);
}

enum class NmiNormalizer { ArithmeticMean, GeometricMean, Max };

/// NMI over the 2×2 joint histogram of two binary masks (natural log).
inline double normalized_mutual_information(const ConfusionCounts& c, NmiNormalizer norm = NmiNormalizer::ArithmeticMean) {
    const double n = double(c.total());
    if (n <= 0) throw DegenerateInputError("nmi: empty grid");
    const double p11 = c.tp / n, p10 = c.fp / n, p01 = c.fn / n, p00 = c.tn / n;
    const double pp1 = p11 + p10, pp0 = p01 + p00;  // prediction marginals
    const double pg1 = p11 + p01, pg0 = p10 + p00;  // truth marginals
    if (pp1 == 0.0 || pp0 == 0.0 || pg1 == 0.0 || pg0 == 0.0) throw DegenerateInputError("nmi: constant mask");
    auto h = [](double a, double b) { return -(a * std::log(a) + b * std::log(b)); };
    auto term = [](double pj, double pa, double pb) { return pj > 0.0 ? pj * std::log(pj / (pa * pb)) : 0.0; };
    const double mi = term(p11, pp1, pg1) + term(p10, pp1, pg0) + term(p01, pp0, pg1) + term(p00, pp0, pg0);
    const double hp = h(pp1, pp0), hg = h(pg1, pg0);
    double denom = 0.5 * (hp + hg);
    if (norm == NmiNormalizer::GeometricMean) denom = std::sqrt(hp * hg);
    if (norm == NmiNormalizer::Max) denom = std::max(hp, hg);
    return std::clamp(mi / denom, 0.0, 1.0);
}

inline double normalized_mutual_information(const Mask& pred, const Mask& gt, NmiNormalizer norm = NmiNormalizer::ArithmeticMean) {
    return normalized_mutual_information(confusion(pred, gt), norm);
}

struct Agreement {
    double variability = 0.0;  // mean(1 - DSC)
    double agreement = 0.0;    // mean DSC
    double variability_lo = 0.0, variability_hi = 0.0;  // min/max offsets from the mean
    double agreement_lo = 0.0, agreement_hi = 0.0;
};

/// Inter-rater agreement over scans: rater A's and rater B's masks, paired by index.
inline Agreement interobserver_agreement(std::span<const Mask> rater_a, std::span<const Mask> rater_b) {
    if (rater_a.size() != rater_b.size() || rater_a.empty())
        throw ShapeError("interobserver_agreement: need equal, nonempty rater sequences");
    std::vector<double> dsc;
    for (std::size_t i = 0; i < rater_a.size(); ++i) dsc.push_back(region_metrics(rater_a[i], rater_b[i]).dsc);
    double mean = 0.0;
    for (double v : dsc) mean += v;
    mean /= double(dsc.size());
    const auto [lo, hi] = std::minmax_element(dsc.begin(), dsc.end());
    Agreement a;
    a.agreement = mean;
    a.variability = 1.0 - mean;
    a.agreement_lo = *lo - mean;
    a.agreement_hi = *hi - mean;
    a.variability_lo = (1.0 - *hi) - a.variability;
    a.variability_hi = (1.0 - *lo) - a.variability;
    return a;
}

/// All per-target metrics of one scan. Undefined metrics are left empty.
struct TargetMetrics {
    double dsc = 0.0;
    double ji = 0.0;
    std::optional<double> asd;
    std::optional<double> nmi;
    std::optional<double> usr;
    std::optional<double> osr;
    ConfusionCounts counts;
};

inline TargetMetrics evaluate_target(const Mask& pred, const Mask& gt, const Spacing& spacing) {
    TargetMetrics m;
    m.counts = confusion(pred, gt);
    const auto ov = region_metrics(m.counts);
    m.dsc = ov.dsc;
    m.ji = ov.ji;
    try {
        m.asd = average_surface_distance(pred, gt, spacing);
    } catch (const UndefinedMetricError&) {
    }
    try {
        m.nmi = normalized_mutual_information(m.counts);
    } catch (const DegenerateInputError&) {
    }
    if (m.counts.tp + m.counts.fn > 0) {
        const auto r = seg_rates(m.counts);
        m.usr = r.usr;
        m.osr = r.osr;
    }
    return m;
}

struct ScanMetrics {
    std::string id;
    TargetMetrics atrium;
    TargetMetrics scar;
};

struct Summary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
    std::int64_t count = 0;
};

/// Mean and sample standard deviation over the defined values.
inline Summary summarize(std::span<const std::optional<double>> values) {
    Summary s;
    double sum = 0.0;
    for (const auto& v : values)
        if (v) sum += *v, ++s.count;
    if (s.count == 0) return s;
    s.mean = sum / double(s.count);
    double ss = 0.0;
    for (const auto& v : values)
        if (v) ss += (*v - s.mean) * (*v - s.mean);
    s.std = s.count > 1 ? std::sqrt(ss / double(s.count - 1)) : 0.0;
    return s;
}

struct TargetSummary {
    Summary dsc, ji, asd, nmi, usr, osr;
};

struct MetricsReport {
    std::vector<ScanMetrics> scans;
    TargetSummary atrium;
    TargetSummary scar;
};

inline TargetSummary summarize_target(const std::vector<ScanMetrics>& scans, TargetMetrics ScanMetrics::*target) {
    auto column = [&](auto getter) {
        std::vector<std::optional<double>> col;
        for (const auto& s : scans) col.push_back(getter(s.*target));
        return summarize(col);
    };
    TargetSummary t;
    t.dsc = column([](const TargetMetrics& m) { return std::optional<double>(m.dsc); });
    t.ji = column([](const TargetMetrics& m) { return std::optional<double>(m.ji); });
    t.asd = column([](const TargetMetrics& m) { return m.asd; });
    t.nmi = column([](const TargetMetrics& m) { return m.nmi; });
    t.usr = column([](const TargetMetrics& m) { return m.usr; });
    t.osr = column([](const TargetMetrics& m) { return m.osr; });
    return t;
}

inline MetricsReport make_report(std::vector<ScanMetrics> scans) {
    MetricsReport r;
    r.scans = std::move(scans);
    r.atrium = summarize_target(r.scans, &ScanMetrics::atrium);
    r.scar = summarize_target(r.scans, &ScanMetrics::scar);
    return r;
}

} // namespace jasgan::metrics
