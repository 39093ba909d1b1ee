#pragma once

// Training objectives. Every function is a pure function of its tensors and works at any floating
// dtype, so gradient checks can run at float64.

#include <torch/torch.h>

namespace jasgan::losses {

constexpr double kLogClamp = 1e-7;
constexpr double kDiceSmooth = 1.0;
constexpr double kDefaultLambda3 = 0.1;

/// Mean voxel-wise binary cross-entropy on probabilities clamped to [ε, 1−ε].
torch::Tensor cross_entropy(const torch::Tensor& prob, const torch::Tensor& target, double eps = kLogClamp);

/// 1 − (2Σŷy + ε)/(Σŷ² + Σy² + ε), summed over every voxel of the batch.
torch::Tensor dice_loss(const torch::Tensor& prob, const torch::Tensor& target, double smooth = kDiceSmooth);

enum class AdversarialForm {
    Standard,  // max  mean log M_r + mean log(1 − M_f)
    Literal,   // max  mean log M_r + mean (1 − log M_f)   (unbounded; kept for study)
};

/// The discriminator's objective before negation (the quantity it maximizes).
torch::Tensor discriminator_objective(const torch::Tensor& m_real, const torch::Tensor& m_fake,
                                      AdversarialForm form = AdversarialForm::Standard, double eps = kLogClamp);

/// Minimized by the discriminator: −discriminator_objective.
torch::Tensor discriminator_loss(const torch::Tensor& m_real, const torch::Tensor& m_fake,
                                 AdversarialForm form = AdversarialForm::Standard, double eps = kLogClamp);

/// ‖mean(f_real) − mean(f_fake)‖², means over batch and spatial axes per channel.
torch::Tensor feature_matching(const torch::Tensor& features_real, const torch::Tensor& features_fake);

struct GeneratorAdversarialOptions {
    double nonsaturating_weight = 0.0;  // optional additive −mean log M_f term
    double eps = kLogClamp;
};

/// L_g: feature matching plus the optional non-saturating term.
torch::Tensor generator_adv_loss(const torch::Tensor& m_fake, const torch::Tensor& features_real,
                                 const torch::Tensor& features_fake, const GeneratorAdversarialOptions& options = {});

struct LossBundle {
    torch::Tensor l_ce;
    torch::Tensor l_dice;
    torch::Tensor l_adv_g;  // undefined when no discriminator takes part
    torch::Tensor l_d;
    torch::Tensor l_fm;
    torch::Tensor s1;
    torch::Tensor s2;
    double lambda3 = kDefaultLambda3;
};

/// exp(−s1)·l_ce + s1 + exp(−s2)·l_dice + s2 + λ3·l_adv_g. Undefined terms contribute nothing;
/// an undefined s_i means unit weight without the log-variance penalty.
torch::Tensor total_generator_loss(const LossBundle& bundle);

} // namespace jasgan::losses
