#pragma once

// Alternating optimisation of the cascade (G) and the joint discriminator (T), with the ablation
// ladder, checkpoints and JSON-lines logs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "jasgan/losses.hpp"
#include "jasgan/nets.hpp"
#include "jasgan/phantom.hpp"

namespace jasgan::trainer {

/// EDN+AC and RN+AC name two readouts of one model (the cascade trained without T).
enum class Ablation { EDN, RN, RN_LA, EDN_AC, RN_AC, Full };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);
bool uses_cascade(Ablation a);
bool uses_discriminator(Ablation a);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 8;
    double g_lr = 1e-3;
    double g_decay = 0.99;
    double t_lr = 1e-4;
    double lambda3 = losses::kDefaultLambda3;
    double nonsaturating_weight = 0.0;
    losses::AdversarialForm adversarial_form = losses::AdversarialForm::Standard;
    double roi_threshold = 0.5;
    Ablation ablation = Ablation::Full;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const nets::NetConfig& c);
nets::NetConfig net_config_from_json(const nlohmann::json& j);

struct Batch {
    torch::Tensor image;   // [N,1,H,W] float
    torch::Tensor atrium;
    torch::Tensor scar;
};

/// Patches stacked into tensors, with the owning sample id per row.
struct PatchTensors {
    torch::Tensor image, atrium, scar, wall;
    std::vector<std::string> sample_ids;
    std::int64_t skipped_slices = 0;  // atrium-free slices left out when cutting patches

    std::int64_t size() const { return image.defined() ? image.size(0) : 0; }
    Batch gather(const std::vector<std::int64_t>& rows) const;
    Batch all() const { return {image, atrium, scar}; }
};

PatchTensors to_tensors(const std::vector<Patch>& patches);

struct Prediction {
    torch::Tensor atrium;  // probabilities; undefined when the variant has no atrium output
    torch::Tensor scar;
};

/// Learned log-variances of the uncertainty weighting.
struct BalanceImpl : torch::nn::Module {
    BalanceImpl();
    torch::Tensor s1, s2;
};
TORCH_MODULE(Balance);

/// The networks of one run. Every run owns a full cascade so checkpoints share a layout; the
/// ablation decides which parts are trained and read out.
class Model {
public:
    Model(const nets::NetConfig& net, Ablation ablation, std::uint64_t seed);

    Prediction predict(const torch::Tensor& image);
    /// ROI mask used by RN+LA: binarized atrium probability.
    torch::Tensor roi(const torch::Tensor& image, double threshold);

    void save(const std::filesystem::path& dir, const nlohmann::json& meta) const;
    /// Loads parameters in place; returns the stored metadata.
    nlohmann::json load(const std::filesystem::path& dir);

    std::vector<torch::Tensor> cascade_parameters() const;
    std::vector<torch::Tensor> edn_parameters() const;
    std::vector<torch::Tensor> scar_parameters() const;  // every cascade parameter outside the EDN
    std::vector<torch::Tensor> discriminator_parameters() const;

    const nets::NetConfig& net_config() const { return net_; }
    Ablation ablation() const { return ablation_; }
    double roi_threshold = 0.5;

    nets::Cascade cascade{nullptr};
    nets::JointDiscriminator discriminator{nullptr};
    Balance balance{nullptr};

private:
    nets::NetConfig net_;
    Ablation ablation_;
};

struct StepRecord {
    std::int64_t step = 0;
    int epoch = 0;
    std::optional<double> l_ce, l_dice, l_adv_g, l_fm, l_d;
    double s1 = 0.0, s2 = 0.0;
    double g_lr = 0.0;

    nlohmann::json to_json() const;
};

struct EpochRecord {
    int epoch = 0;
    double g_lr = 0.0;
    std::optional<double> val_atrium_dsc, val_scar_dsc;

    nlohmann::json to_json() const;
};

struct RunRecord {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    std::vector<std::string> checkpoints;
    std::string config_hash;

    nlohmann::json to_json() const;
};

/// RN+LA trains in two phases: the EDN first, then the RN on the masked image.
enum class Phase { Atrium, Scar };

class Trainer {
public:
    Trainer(const nets::NetConfig& net, const TrainConfig& train);

    Model& model() { return model_; }
    const TrainConfig& config() const { return train_; }

    StepRecord train_step(const Batch& batch);
    /// One T update against a detached generator output; returns L_d.
    double discriminator_update(const Batch& batch, const nets::CascadeOutput& fake);
    /// T on the real pair and the estimated pair in one batch; returns (real, estimated) halves.
    std::pair<nets::DiscriminatorOutput, nets::DiscriminatorOutput> discriminate(const Batch& batch, const torch::Tensor& atrium,
                                                                                 const torch::Tensor& scar);
    /// One G update from a forward pass that still carries its graph.
    losses::LossBundle generator_update(const Batch& batch, const nets::CascadeOutput& out);

    /// Applies the per-epoch learning-rate decay and advances the epoch counter.
    void end_epoch();
    double g_learning_rate() const { return g_lr_; }
    std::int64_t step() const { return step_; }
    int epoch() const { return epoch_; }

    Phase phase() const { return phase_; }
    /// Switches RN+LA to its second phase, freezing the EDN.
    void begin_scar_phase();

private:
    void rebuild_g_optimizer();
    StepRecord record(const losses::LossBundle& b, std::optional<double> l_d) const;

    TrainConfig train_;
    Model model_;
    Phase phase_ = Phase::Atrium;
    double g_lr_;
    std::int64_t step_ = 0;
    int epoch_ = 0;
    std::unique_ptr<torch::optim::Adam> g_opt_;
    std::unique_ptr<torch::optim::Adam> t_opt_;
};

struct FitOptions {
    std::optional<std::filesystem::path> out_dir;  // checkpoints and train_log.jsonl
    std::string config_hash;
    const PatchTensors* validation = nullptr;
    /// RN+LA only: start from this trained EDN instead of training one.
    std::optional<std::filesystem::path> pretrained_edn;
    const Model* edn_donor = nullptr;  // RN+LA only: copy the EDN of an in-memory model
    bool checkpoint_each_epoch = false;
};

/// Full training run. Patches must come from the training split only.
RunRecord fit(Trainer& trainer, const PatchTensors& train, const FitOptions& options = {});

/// Pooled Dice of binarized predictions over a patch set (used for per-epoch validation).
std::pair<std::optional<double>, std::optional<double>> validation_dice(Model& model, const PatchTensors& patches);

/// Throws ConfigError when a sample id occurs in both sets.
void require_disjoint(const std::vector<std::string>& train_ids, const std::vector<std::string>& test_ids);

} // namespace jasgan::trainer
