#pragma once

// Post-hoc analyses over evaluation artifacts: cascade-information tournament and affinity,
// PCA joint-distribution distance, USR/OSR direction table, and intensity-threshold baselines.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jasgan/grid.hpp"

namespace jasgan::analysis {

/// Square win-rate matrix; entry(i, j) is the fraction of samples where variant i beats variant j.
struct TournamentMatrix {
    std::vector<std::string> variants;
    std::vector<std::vector<double>> wins;

    std::size_t size() const { return variants.size(); }
    double operator()(std::size_t i, std::size_t j) const { return wins[i][j]; }
};

struct AffinityVector {
    std::vector<std::string> variants;
    std::vector<double> scores;

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::distance(scores.begin(), std::max_element(scores.begin(), scores.end())));
    }
};

/// scores[v][s] is the per-sample quality of variant v on test sample s. Ties count half.
inline TournamentMatrix tournament(const std::vector<std::string>& variants, const std::vector<std::vector<double>>& scores) {
    if (variants.empty() || variants.size() != scores.size()) throw ConfigError("tournament: one score row per variant required");
    const std::size_t n_samples = scores.front().size();
    if (n_samples == 0) throw ConfigError("tournament: empty test set");
    for (const auto& row : scores)
        if (row.size() != n_samples) throw ConfigError("tournament: variants evaluated on different test sets");

    TournamentMatrix t;
    t.variants = variants;
    t.wins.assign(variants.size(), std::vector<double>(variants.size(), 0.5));
    for (std::size_t i = 0; i < variants.size(); ++i)
        for (std::size_t j = 0; j < variants.size(); ++j) {
            if (i == j) continue;
            double w = 0.0;
            for (std::size_t s = 0; s < n_samples; ++s) {
                if (scores[i][s] > scores[j][s]) w += 1.0;
                else if (scores[i][s] == scores[j][s]) w += 0.5;
            }
            t.wins[i][j] = w / double(n_samples);
        }
    return t;
}

/// Mean off-diagonal win rate of each row.
inline AffinityVector affinity(const TournamentMatrix& t) {
    AffinityVector a;
    a.variants = t.variants;
    const std::size_t n = t.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (n == 1) {
            a.scores.push_back(0.5);
            continue;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum += t(i, j);
        a.scores.push_back(sum / double(n - 1));
    }
    return a;
}

struct JointDistributionSummary {
    std::vector<std::array<double, 2>> estimated;  // EJD projected on the real-set principal axes
    std::vector<std::array<double, 2>> real;       // RJD projected
    std::array<std::vector<double>, 2> axes;       // principal directions (unit vectors)
    std::vector<double> real_mean;
    double distance = 0.0;                         // mean Euclidean distance of corresponding points
};

/// Each row is one sample's flattened (atrium map, scar map). PCA is fit on the real set only.
inline JointDistributionSummary pca_joint_distance(const std::vector<std::vector<double>>& estimated,
                                                   const std::vector<std::vector<double>>& real) {
    if (estimated.size() != real.size()) throw ShapeError("pca_joint_distance: sets must correspond one-to-one");
    if (real.size() < 3) throw DegenerateInputError("pca_joint_distance: need at least 3 samples");
    const auto n = static_cast<Eigen::Index>(real.size());
    const auto dim = static_cast<Eigen::Index>(real.front().size());
    for (std::size_t i = 0; i < real.size(); ++i)
        if (std::ssize(real[i]) != dim || std::ssize(estimated[i]) != dim) throw ShapeError("pca_joint_distance: ragged samples");

    Eigen::MatrixXd R(n, dim), E(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) {
            R(i, j) = real[std::size_t(i)][std::size_t(j)];
            E(i, j) = estimated[std::size_t(i)][std::size_t(j)];
        }
    const Eigen::RowVectorXd mean = R.colwise().mean();
    const Eigen::MatrixXd Rc = R.rowwise() - mean;
    const Eigen::MatrixXd Ec = E.rowwise() - mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Rc, Eigen::ComputeThinV);
    if (svd.rank() < 1) throw DegenerateInputError("pca_joint_distance: real set has no variance");
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(dim, 2);
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, svd.matrixV().cols()); ++k) basis.col(k) = svd.matrixV().col(k);

    const Eigen::MatrixXd pr = Rc * basis, pe = Ec * basis;
    JointDistributionSummary out;
    out.real_mean.assign(mean.data(), mean.data() + dim);
    for (int k = 0; k < 2; ++k) out.axes[std::size_t(k)].assign(basis.col(k).data(), basis.col(k).data() + dim);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.real.push_back({pr(i, 0), pr(i, 1)});
        out.estimated.push_back({pe(i, 0), pe(i, 1)});
        total += (pe.row(i) - pr.row(i)).norm();
    }
    out.distance = total / double(n);
    return out;
}

struct RateSummary {
    double usr = 0.0;
    double osr = 0.0;
};

struct DirectionRow {
    std::string claim;
    double delta = 0.0;  // signed change of the tested quantity (variant minus baseline)
    bool holds = false;
};

struct OsrUsrTable {
    std::map<std::string, RateSummary> rates;  // keyed by configuration name
    std::vector<DirectionRow> checks;
};

/// Atrium rates for EDN and EDN+AC, scar rates for RN and RN+AC.
inline OsrUsrTable osr_usr_ablation(const std::map<std::string, RateSummary>& rates) {
    for (const char* key : {"EDN", "EDN+AC", "RN", "RN+AC"})
        if (!rates.contains(key)) throw ConfigError(std::string("osr_usr_ablation: missing run ") + key);
    OsrUsrTable t;
    t.rates = rates;
    const auto& edn = rates.at("EDN");
    const auto& edn_ac = rates.at("EDN+AC");
    const auto& rn = rates.at("RN");
    const auto& rn_ac = rates.at("RN+AC");
    t.checks.push_back({"USR(EDN+AC) < USR(EDN)", edn_ac.usr - edn.usr, edn_ac.usr < edn.usr});
    t.checks.push_back({"OSR(EDN+AC) > OSR(EDN)", edn_ac.osr - edn.osr, edn_ac.osr > edn.osr});
    t.checks.push_back({"USR(RN+AC) < USR(RN)", rn_ac.usr - rn.usr, rn_ac.usr < rn.usr});
    t.checks.push_back({"OSR(RN+AC) < OSR(RN)", rn_ac.osr - rn.osr, rn_ac.osr < rn.osr});
    return t;
}

enum class ThresholdMethod { TwoSD, Otsu };

/// Otsu threshold of `values` over a `bins`-bin histogram spanning [min, max].
inline double otsu_threshold(std::span<const double> values, int bins = 256) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw DegenerateInputError("otsu_threshold: constant intensities");
    const double width = (hi - lo) / bins;
    std::vector<double> hist(std::size_t(bins), 0.0);
    for (double v : values) hist[std::size_t(std::clamp(int((v - lo) / width), 0, bins - 1))] += 1.0;

    const double n = double(values.size());
    double total_moment = 0.0;
    for (int k = 0; k < bins; ++k) total_moment += k * hist[std::size_t(k)];
    double w0 = 0.0, moment0 = 0.0, best = -1.0;
    int best_k = 0;
    for (int k = 0; k < bins - 1; ++k) {
        w0 += hist[std::size_t(k)];
        moment0 += k * hist[std::size_t(k)];
        const double w1 = n - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = moment0 / w0, m1 = (total_moment - moment0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) best = between, best_k = k;
    }
    return lo + (best_k + 1) * width;
}

/// Classical two-phase scar estimate restricted to a wall region of interest.
inline Mask threshold_baseline(const Grid3<float>& volume, const Mask& wall, ThresholdMethod method) {
    require_same_grid(volume.dims(), wall.dims(), "threshold_baseline");
    std::vector<double> roi;
    for (std::size_t i = 0; i < wall.size(); ++i)
        if (wall[i]) roi.push_back(volume[i]);
    if (roi.empty()) throw DegenerateInputError("threshold_baseline: empty wall region");

    double threshold = 0.0;
    if (method == ThresholdMethod::TwoSD) {
        double mean = 0.0;
        for (double v : roi) mean += v;
        mean /= double(roi.size());
        double var = 0.0;
        for (double v : roi) var += (v - mean) * (v - mean);
        var /= double(roi.size());
        if (!(var > 0.0)) throw DegenerateInputError("threshold_baseline: constant intensities");
        threshold = mean + 2.0 * std::sqrt(var);
    } else {
        threshold = otsu_threshold(roi);
    }
    Mask scar(wall.dims());
    for (std::size_t i = 0; i < wall.size(); ++i) scar[i] = wall[i] && volume[i] > threshold ? 1 : 0;
    return scar;
}

} // namespace jasgan::analysis
