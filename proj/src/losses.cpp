#include "jasgan/losses.hpp"

#include <sstream>

#include "jasgan/error.hpp"

namespace jasgan::losses {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* who) {
    if (a.sizes() != b.sizes()) {
        std::ostringstream os;
        os << who << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
        throw ShapeError(os.str());
    }
}

torch::Tensor weighted(const torch::Tensor& loss, const torch::Tensor& s) {
    if (!s.defined()) return loss;
    return torch::exp(-s) * loss + s;
}

} // namespace

torch::Tensor cross_entropy(const torch::Tensor& prob, const torch::Tensor& target, double eps) {
    require_same_shape(prob, target, "cross_entropy");
    const auto p = prob.clamp(eps, 1.0 - eps);
    return -(target * torch::log(p) + (1.0 - target) * torch::log(1.0 - p)).mean();
}

torch::Tensor dice_loss(const torch::Tensor& prob, const torch::Tensor& target, double smooth) {
    require_same_shape(prob, target, "dice_loss");
    const auto inter = (prob * target).sum();
    const auto denom = (prob * prob).sum() + (target * target).sum();
    return 1.0 - (2.0 * inter + smooth) / (denom + smooth);
}

torch::Tensor discriminator_objective(const torch::Tensor& m_real, const torch::Tensor& m_fake, AdversarialForm form, double eps) {
    require_same_shape(m_real, m_fake, "discriminator_loss");
    const auto real = torch::log(m_real.clamp(eps, 1.0 - eps)).mean();
    const auto fake = form == AdversarialForm::Standard ? torch::log(1.0 - m_fake.clamp(eps, 1.0 - eps)).mean()
                                                         : (1.0 - torch::log(m_fake.clamp(eps, 1.0 - eps))).mean();
    return real + fake;
}

torch::Tensor discriminator_loss(const torch::Tensor& m_real, const torch::Tensor& m_fake, AdversarialForm form, double eps) {
    return -discriminator_objective(m_real, m_fake, form, eps);
}

torch::Tensor feature_matching(const torch::Tensor& features_real, const torch::Tensor& features_fake) {
    require_same_shape(features_real, features_fake, "feature_matching");
    if (features_real.dim() != 4) throw ShapeError("feature_matching expects [N,C,H,W] features");
    const auto diff = features_real.mean({0, 2, 3}) - features_fake.mean({0, 2, 3});
    return (diff * diff).sum();
}

torch::Tensor generator_adv_loss(const torch::Tensor& m_fake, const torch::Tensor& features_real,
                                 const torch::Tensor& features_fake, const GeneratorAdversarialOptions& options) {
    auto loss = feature_matching(features_real, features_fake);
    if (options.nonsaturating_weight != 0.0)
        loss = loss - options.nonsaturating_weight * torch::log(m_fake.clamp(options.eps, 1.0 - options.eps)).mean();
    return loss;
}

torch::Tensor total_generator_loss(const LossBundle& b) {
    torch::Tensor total;
    auto add = [&](const torch::Tensor& t) { total = total.defined() ? total + t : t; };
    if (b.l_ce.defined()) add(weighted(b.l_ce, b.s1));
    if (b.l_dice.defined()) add(weighted(b.l_dice, b.s2));
    if (b.l_adv_g.defined() && b.lambda3 != 0.0) add(b.lambda3 * b.l_adv_g);
    if (!total.defined()) throw ConfigError("total_generator_loss: no loss terms");
    return total;
}

} // namespace jasgan::losses
