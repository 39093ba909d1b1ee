#pragma once

// Experiment plumbing shared by the CLI and the acceptance suite: configs and their hashes,
// corpora on disk, training runs with persisted reports, the ablation sweep, and analysis.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jasgan/analysis.hpp"
#include "jasgan/io.hpp"
#include "jasgan/metrics.hpp"
#include "jasgan/nets.hpp"
#include "jasgan/phantom.hpp"
#include "jasgan/quantify.hpp"
#include "jasgan/trainer.hpp"

namespace jasgan::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

struct CorpusConfig {
    PhantomConfig phantom;
    int samples = 40;
    int test_samples = 10;
};

struct ExperimentConfig {
    CorpusConfig corpus;
    nets::NetConfig net;
    trainer::TrainConfig train;
    std::uint64_t seed = 0;               // corpus seed and default training seed
    std::vector<std::uint64_t> seeds;     // training seeds for the ablation sweep; empty = {seed}
    bool tournament = false;              // ablate also trains the C2..C6 variants
    int quant_wall_thickness = 2;         // erosion depth used to derive a wall from a predicted atrium
    bool epoch_validation = true;         // log test-split Dice after every epoch

    std::vector<std::uint64_t> sweep_seeds() const { return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds; }
};

json to_json(const PhantomConfig& c);
PhantomConfig phantom_config_from_json(const json& j);
json to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const json& j);
json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const json& j);
ExperimentConfig load_experiment_config(const fs::path& path);

/// FNV-1a 64 over the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const json& j);

/// Reduced configuration that trains the whole ablation sweep on one CPU core: 16×48×48 phantoms,
/// full-slice 48 px patches, narrower networks, few epochs.
ExperimentConfig desk_preset();

// ---------------------------------------------------------------------------------------------

struct Sample {
    io::SampleRecord record;
    Volume volume;       // as generated
    Volume normalized;   // zero mean, unit std
    LabelPair labels;
};

struct Corpus {
    std::vector<Sample> samples;
    std::string config_hash;

    std::vector<const Sample*> split(const std::string& name) const;
};

/// Deterministic corpus; the last `test_samples` ids form the test split.
Corpus generate_corpus(const CorpusConfig& config, std::uint64_t seed);
void write_corpus(const Corpus& corpus, const fs::path& root);
Corpus read_corpus(const fs::path& root);
/// Corpus for `config` from the cache directory (JASGAN_CACHE_DIR), generating it on a miss.
Corpus cached_corpus(const CorpusConfig& config, std::uint64_t seed);
fs::path cache_dir();

trainer::PatchTensors patches_for(const Corpus& corpus, const std::string& split, std::int64_t patch);

// ---------------------------------------------------------------------------------------------

struct VolumePrediction {
    std::optional<Grid3<float>> atrium;
    std::optional<Grid3<float>> scar;
};

/// Runs every axial slice of one normalized volume as a single batch.
VolumePrediction predict_volume(trainer::Model& model, const Volume& normalized);

struct EvaluatedScan {
    metrics::ScanMetrics metrics;
    bool has_atrium = false;
    bool has_scar = false;
};

EvaluatedScan evaluate_prediction(const VolumePrediction& pred, const LabelPair& truth, const Spacing& spacing, const std::string& id);

struct RunReport {
    std::string name;
    std::string config_hash;
    bool has_atrium = false;
    bool has_scar = false;
    metrics::MetricsReport report;
};

json to_json(const RunReport& r);
RunReport run_report_from_json(const json& j);
/// Per-scan CSV mirror of a report.
std::string report_csv(const RunReport& r);

struct RunSpec {
    std::string name;
    trainer::Ablation ablation = trainer::Ablation::Full;
    nets::NetConfig net;
    trainer::TrainConfig train;
    std::optional<fs::path> pretrained_edn;  // RN+LA
    std::shared_ptr<trainer::Model> edn_donor;  // RN+LA, in memory
    bool epoch_validation = false;
};

struct RunResult {
    RunSpec spec;
    std::optional<fs::path> dir;
    trainer::RunRecord record;
    RunReport report;
    std::shared_ptr<trainer::Model> model;
    std::map<std::string, VolumePrediction> predictions;  // test split, by sample id
};

/// Trains, evaluates on the test split and (when `dir` is given) persists config, log,
/// checkpoints, report and predictions. Refuses to overwrite a run with the same hash unless `force`.
RunResult execute_run(const RunSpec& spec, const Corpus& corpus, const std::optional<fs::path>& dir, bool force);

/// Re-evaluates a trained checkpoint on the test split.
RunReport evaluate_checkpoint(const fs::path& checkpoint, const Corpus& corpus, const std::string& name,
                              std::map<std::string, VolumePrediction>* predictions = nullptr);

/// Report of the labels of `pred_root/<id>/` compared with the corpus test split.
RunReport evaluate_masks(const fs::path& pred_root, const Corpus& corpus);

// ---------------------------------------------------------------------------------------------

/// Row names of the ablation: the six-row ladder and the four cascade operations.
const std::vector<std::string>& ladder_rows();
const std::vector<std::string>& operation_rows();

struct SeedSweep {
    std::uint64_t seed = 0;
    std::map<std::string, RunResult> runs;  // one entry per row name; shared rows point at copies
};

struct AblationResult {
    std::vector<SeedSweep> seeds;
    std::map<std::string, RunResult> tournament;  // C1..C6, single seed
};

/// Trains the ablation sweep for every seed of the config. With `out`, one directory per row;
/// rows that reuse another row's training hold a `shared.json` pointer instead of a checkpoint.
AblationResult run_ablation(const ExperimentConfig& config, const Corpus& corpus, const std::optional<fs::path>& out, bool force);

/// Trains the cascade-information variants C2..C6 (C1 is the full model) with the first sweep seed.
std::map<std::string, RunResult> run_tournament(const ExperimentConfig& config, const Corpus& corpus,
                                                const std::optional<RunResult>& c1, const std::optional<fs::path>& out, bool force);

// ---------------------------------------------------------------------------------------------

/// Per-test-sample scar DSC of each run, ordered by sample id.
std::vector<double> per_sample_scar_dsc(const RunReport& r);

/// Rows of the joint-distribution PCA: test slices with atrium, flattened (atrium, scar) maps.
std::vector<std::vector<double>> joint_rows(const std::map<std::string, VolumePrediction>& predictions, const Corpus& corpus);
std::vector<std::vector<double>> joint_rows_truth(const Corpus& corpus);

struct BaselineResult {
    std::string method;
    RunReport report;
};

/// 2SD or Otsu inside the ground-truth wall, scored on the test split.
BaselineResult threshold_baseline_report(const Corpus& corpus, analysis::ThresholdMethod method);

struct QuantRecord {
    std::string id;
    quantify::ScarBurden estimated;
    quantify::ScarBurden truth;
};

struct QuantResult {
    std::vector<QuantRecord> records;
    quantify::AgreementStats scar_volume;   // estimated vs true scar mm³
    quantify::AgreementStats scar_percent;  // estimated vs true scar %
};

/// Estimates use the predicted scar and a wall derived from the predicted atrium.
QuantResult quantify_predictions(const std::map<std::string, VolumePrediction>& predictions, const Corpus& corpus, int wall_thickness);
json to_json(const QuantResult& q);

struct SweepSummary {
    std::map<std::string, metrics::TargetSummary> atrium;  // rows that predict the atrium
    std::map<std::string, metrics::TargetSummary> scar;    // rows that predict scars
    std::optional<analysis::OsrUsrTable> osr_usr;
    std::optional<double> pca_with_t;     // full model
    std::optional<double> pca_without_t;  // cascade trained without T
    std::optional<analysis::JointDistributionSummary> pca_with_t_points;
    std::optional<analysis::JointDistributionSummary> pca_without_t_points;
};

SweepSummary summarize_sweep(const SeedSweep& sweep, const Corpus& corpus);
json to_json(const SweepSummary& s);

/// Everything `analyze` derives from a directory of persisted runs.
json analyze_runs(const fs::path& runs, const Corpus& corpus);

/// Loads `predictions/` of a persisted run.
std::map<std::string, VolumePrediction> read_predictions(const fs::path& run_dir, const Corpus& corpus);

} // namespace jasgan::experiment
