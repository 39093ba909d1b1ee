#pragma once

// Central finite differences against autograd, at float64.

#include <algorithm>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace jasgan::testutil {

using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

/// Largest relative error ‖g_autograd − g_fd‖ / max(‖g_autograd‖, ‖g_fd‖, floor) over the inputs.
inline double gradcheck_rel_error(const ScalarFn& f, std::vector<torch::Tensor> inputs, double h = 1e-6, double floor = 1e-10) {
    for (auto& x : inputs) x = x.detach().to(torch::kDouble).clone().set_requires_grad(true);
    const auto out = f(inputs);
    const auto analytic = torch::autograd::grad({out}, inputs, {}, false, false, true);

    double worst = 0.0;
    torch::NoGradGuard guard;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto base = inputs[k].detach().clone();
        auto numeric = torch::zeros_like(base);
        auto flat = base.view(-1);
        auto nflat = numeric.view(-1);
        for (std::int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            auto probe = inputs;
            flat[i] = orig + h;
            probe[k] = base.clone();
            const double up = f(probe).item<double>();
            flat[i] = orig - h;
            probe[k] = base.clone();
            const double down = f(probe).item<double>();
            flat[i] = orig;
            nflat[i] = (up - down) / (2.0 * h);
        }
        const auto a = analytic[k].defined() ? analytic[k] : torch::zeros_like(numeric);
        const double diff = (a - numeric).norm().item<double>();
        const double scale = std::max({a.norm().item<double>(), numeric.norm().item<double>(), floor});
        worst = std::max(worst, diff / scale);
    }
    return worst;
}

} // namespace jasgan::testutil
