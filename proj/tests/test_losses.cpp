#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "jasgan/error.hpp"
#include "jasgan/losses.hpp"

using namespace jasgan;
using namespace jasgan::losses;

namespace {

torch::Tensor t1(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kDouble).view({1, 1, 1, -1}); }

double ce_oracle(const std::vector<double>& p, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += -(y[i] * std::log(p[i]) + (1 - y[i]) * std::log(1 - p[i]));
    return s / static_cast<double>(p.size());
}

double dice_oracle(const std::vector<double>& p, const std::vector<double>& y) {
    double inter = 0, pp = 0, yy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * y[i];
        pp += p[i] * p[i];
        yy += y[i] * y[i];
    }
    return 1.0 - (2.0 * inter + 1.0) / (pp + yy + 1.0);
}

} // namespace

TEST(CrossEntropy, KnownValues) {
    EXPECT_LT(cross_entropy(t1({1, 0, 1}), t1({1, 0, 1})).item<double>(), 1e-6);
    EXPECT_NEAR(cross_entropy(t1({0.5, 0.5}), t1({1, 0})).item<double>(), std::log(2.0), 1e-12);
    EXPECT_NEAR(cross_entropy(t1({0.9, 0.2}), t1({1, 0})).item<double>(), ce_oracle({0.9, 0.2}, {1, 0}), 1e-12);
    EXPECT_NEAR(ce_oracle({0.9, 0.2}, {1, 0}), 0.1643, 5e-5);
    // Clamping keeps a confident miss finite.
    EXPECT_NEAR(cross_entropy(t1({0.0}), t1({1.0})).item<double>(), -std::log(1e-7), 1e-6);
}

TEST(CrossEntropy, RandomAgreesWithOracleAndIsNonNegative) {
    torch::manual_seed(11);
    for (int trial = 0; trial < 25; ++trial) {
        const auto p = torch::rand({2, 1, 3, 5}, torch::kDouble) * 0.98 + 0.01;
        const auto y = (torch::rand({2, 1, 3, 5}, torch::kDouble) > 0.5).to(torch::kDouble);
        std::vector<double> pv(p.data_ptr<double>(), p.data_ptr<double>() + p.numel());
        std::vector<double> yv(y.data_ptr<double>(), y.data_ptr<double>() + y.numel());
        const double got = cross_entropy(p, y).item<double>();
        EXPECT_NEAR(got, ce_oracle(pv, yv), 1e-10);
        EXPECT_GE(got, 0.0);
    }
}

TEST(DiceLoss, KnownValuesAndRange) {
    EXPECT_NEAR(dice_loss(t1({1, 0, 1, 1}), t1({1, 0, 1, 1})).item<double>(), 0.0, 1e-12);
    EXPECT_NEAR(dice_loss(t1({1, 0}), t1({1, 1})).item<double>(), 0.25, 1e-12);
    const auto big_a = torch::zeros({1, 1, 64, 64}, torch::kDouble), big_b = torch::zeros({1, 1, 64, 64}, torch::kDouble);
    big_a.narrow(3, 0, 32).fill_(1.0);
    big_b.narrow(3, 32, 32).fill_(1.0);
    EXPECT_GT(dice_loss(big_a, big_b).item<double>(), 0.999);

    torch::manual_seed(12);
    for (int trial = 0; trial < 25; ++trial) {
        const auto p = torch::rand({3, 1, 4, 4}, torch::kDouble);
        const auto y = (torch::rand({3, 1, 4, 4}, torch::kDouble) > 0.7).to(torch::kDouble);
        std::vector<double> pv(p.data_ptr<double>(), p.data_ptr<double>() + p.numel());
        std::vector<double> yv(y.data_ptr<double>(), y.data_ptr<double>() + y.numel());
        const double got = dice_loss(p, y).item<double>();
        EXPECT_NEAR(got, dice_oracle(pv, yv), 1e-12);
        EXPECT_GE(got, 0.0);
        EXPECT_LE(got, 1.0);
    }
}

TEST(SegmentationLosses, ShapeMismatchThrows) {
    EXPECT_THROW(cross_entropy(t1({0.5, 0.5}), t1({1, 0, 1})), ShapeError);
    EXPECT_THROW(dice_loss(t1({0.5, 0.5}), t1({1})), ShapeError);
    EXPECT_THROW(feature_matching(torch::zeros({2, 12, 4, 4}), torch::zeros({2, 11, 4, 4})), ShapeError);
}

TEST(Discriminator, OptimumAndChanceValues) {
    const double eps = 1e-7;
    const auto real = torch::full({2, 1, 4, 4}, 1.0 - eps, torch::kDouble), fake = torch::full({2, 1, 4, 4}, eps, torch::kDouble);
    EXPECT_LT(discriminator_loss(real, fake).item<double>(), 1e-6);
    const auto half = torch::full({2, 1, 4, 4}, 0.5, torch::kDouble);
    EXPECT_NEAR(discriminator_objective(half, half).item<double>(), 2.0 * std::log(0.5), 1e-12);
    EXPECT_NEAR(discriminator_loss(half, half).item<double>(), -2.0 * std::log(0.5), 1e-12);
    EXPECT_NEAR(discriminator_objective(half, half, AdversarialForm::Literal).item<double>(), 1.0, 1e-12);
}

TEST(Discriminator, SwappingRolesFlipsLogitGradient) {
    torch::manual_seed(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto za = torch::randn({1, 1, 4, 4}, torch::kDouble).requires_grad_(true);
        const auto zb = torch::randn({1, 1, 4, 4}, torch::kDouble).requires_grad_(true);
        const auto ga = torch::autograd::grad({discriminator_loss(torch::sigmoid(za), torch::sigmoid(zb))}, {za})[0];
        const auto gs = torch::autograd::grad({discriminator_loss(torch::sigmoid(zb), torch::sigmoid(za))}, {za})[0];
        EXPECT_TRUE(torch::all(ga < 0).item<bool>());
        EXPECT_TRUE(torch::all(gs > 0).item<bool>());
    }
}

TEST(Discriminator, ToyModelDescendsMonotonically) {
    // One scalar discriminator weight on fixed real (+1) and fake (−1) inputs.
    auto w = torch::zeros({1}, torch::kDouble).requires_grad_(true);
    torch::optim::SGD opt({w}, torch::optim::SGDOptions(0.5));
    const auto xr = torch::ones({4, 1, 2, 2}, torch::kDouble), xf = -xr;
    double prev_loss = 1e9, prev_real = 0.0, prev_fake = 1.0;
    for (int step = 0; step < 30; ++step) {
        opt.zero_grad();
        const auto mr = torch::sigmoid(w * xr), mf = torch::sigmoid(w * xf);
        const auto loss = discriminator_loss(mr, mf);
        const double l = loss.item<double>(), r = mr.mean().item<double>(), f = mf.mean().item<double>();
        EXPECT_LT(l, prev_loss);
        if (step > 0) {
            EXPECT_GT(r, prev_real);
            EXPECT_LT(f, prev_fake);
        }
        prev_loss = l;
        prev_real = r;
        prev_fake = f;
        loss.backward();
        opt.step();
    }
}

TEST(FeatureMatching, ValuesAndSymmetry) {
    const auto a = torch::zeros({2, 12, 4, 4}, torch::kDouble);
    EXPECT_EQ(feature_matching(a, a).item<double>(), 0.0);
    auto b = a.clone();
    b.select(1, 5).fill_(0.7);
    EXPECT_NEAR(feature_matching(a, b).item<double>(), 0.49, 1e-12);

    torch::manual_seed(14);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = torch::randn({3, 12, 4, 4}, torch::kDouble), y = torch::randn({3, 12, 4, 4}, torch::kDouble);
        EXPECT_NEAR(feature_matching(x, y).item<double>(), feature_matching(y, x).item<double>(), 1e-12);
        // Per-channel means over batch and space.
        const auto d = x.mean({0, 2, 3}) - y.mean({0, 2, 3});
        EXPECT_NEAR(feature_matching(x, y).item<double>(), (d * d).sum().item<double>(), 1e-12);
    }
}

TEST(GeneratorAdversarial, OptionalNonSaturatingTerm) {
    torch::manual_seed(15);
    const auto fr = torch::randn({2, 12, 4, 4}, torch::kDouble), ff = torch::randn({2, 12, 4, 4}, torch::kDouble);
    const auto mf = torch::rand({2, 1, 4, 4}, torch::kDouble) * 0.9 + 0.05;
    const double fm = feature_matching(fr, ff).item<double>();
    EXPECT_NEAR(generator_adv_loss(mf, fr, ff).item<double>(), fm, 1e-12);
    GeneratorAdversarialOptions opts;
    opts.nonsaturating_weight = 0.3;
    EXPECT_NEAR(generator_adv_loss(mf, fr, ff, opts).item<double>(), fm - 0.3 * torch::log(mf).mean().item<double>(), 1e-12);
}

TEST(TotalLoss, UnitWeightsAtZeroAndLambdaZero) {
    LossBundle b;
    b.l_ce = torch::tensor(0.3, torch::kDouble);
    b.l_dice = torch::tensor(0.2, torch::kDouble);
    b.l_adv_g = torch::tensor(1.5, torch::kDouble);
    b.s1 = torch::zeros({}, torch::kDouble);
    b.s2 = torch::zeros({}, torch::kDouble);
    EXPECT_NEAR(total_generator_loss(b).item<double>(), 0.3 + 0.2 + 0.1 * 1.5, 1e-12);
    b.lambda3 = 0.0;
    EXPECT_NEAR(total_generator_loss(b).item<double>(), 0.5, 1e-12);
    b.s1 = torch::tensor(0.4, torch::kDouble);
    b.s2 = torch::tensor(-0.2, torch::kDouble);
    EXPECT_NEAR(total_generator_loss(b).item<double>(), std::exp(-0.4) * 0.3 + 0.4 + std::exp(0.2) * 0.2 - 0.2, 1e-12);

    LossBundle only_ce;
    only_ce.l_ce = torch::tensor(0.7, torch::kDouble);
    EXPECT_NEAR(total_generator_loss(only_ce).item<double>(), 0.7, 1e-12);
}

TEST(TotalLoss, BalanceGradientAndStationaryPoint) {
    const double ce = 0.37;
    for (double s : {-1.0, -0.3, 0.0, 0.5, 2.0}) {
        LossBundle b;
        b.l_ce = torch::tensor(ce, torch::kDouble);
        b.l_dice = torch::tensor(0.1, torch::kDouble);
        b.s1 = torch::tensor(s, torch::kDouble).requires_grad_(true);
        b.s2 = torch::zeros({}, torch::kDouble);
        const auto g = torch::autograd::grad({total_generator_loss(b)}, {b.s1})[0];
        EXPECT_NEAR(g.item<double>(), 1.0 - std::exp(-s) * ce, 1e-12);
    }
    LossBundle b;
    b.l_ce = torch::tensor(ce, torch::kDouble);
    b.s1 = torch::tensor(std::log(ce), torch::kDouble).requires_grad_(true);
    EXPECT_NEAR(torch::autograd::grad({total_generator_loss(b)}, {b.s1})[0].item<double>(), 0.0, 1e-12);
}

TEST(LossGradients, MatchFiniteDifferences) {
    torch::manual_seed(16);
    const auto y = (torch::rand({1, 1, 8, 8}) > 0.5).to(torch::kDouble);
    const auto p = torch::rand({1, 1, 8, 8}) * 0.9 + 0.05;
    EXPECT_LT(testutil::gradcheck_rel_error([&](const auto& v) { return cross_entropy(v[0], y); }, {p}), 1e-4);
    EXPECT_LT(testutil::gradcheck_rel_error([&](const auto& v) { return dice_loss(v[0], y); }, {p}), 1e-4);
    EXPECT_LT(testutil::gradcheck_rel_error([&](const auto& v) { return feature_matching(v[0], v[1]); },
                                           {torch::randn({2, 12, 8, 8}), torch::randn({2, 12, 8, 8})}),
              1e-4);
    EXPECT_LT(testutil::gradcheck_rel_error([&](const auto& v) { return discriminator_loss(v[0], v[1]); },
                                           {torch::rand({1, 1, 8, 8}) * 0.9 + 0.05, torch::rand({1, 1, 8, 8}) * 0.9 + 0.05}),
              1e-4);
    const auto fr = torch::randn({1, 12, 8, 8}, torch::kDouble);
    EXPECT_LT(testutil::gradcheck_rel_error(
                  [&](const auto& v) {
                      LossBundle b;
                      b.l_ce = cross_entropy(v[0], y);
                      b.l_dice = dice_loss(v[1], y);
                      GeneratorAdversarialOptions o;
                      o.nonsaturating_weight = 0.5;
                      b.l_adv_g = generator_adv_loss(v[1], fr, v[2], o);
                      b.s1 = v[3];
                      b.s2 = v[4];
                      return total_generator_loss(b);
                  },
                  {p, torch::rand({1, 1, 8, 8}) * 0.9 + 0.05, torch::randn({1, 12, 8, 8}), torch::tensor(0.3), torch::tensor(-0.4)}),
              1e-4);
}
