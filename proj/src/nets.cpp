#include "jasgan/nets.hpp"

#include <sstream>

namespace jasgan::nets {

namespace F = torch::nn::functional;

std::string to_string(CascadeOp op) {
    switch (op) {
    case CascadeOp::Add: return "O_a";
    case CascadeOp::Product: return "O_p";
    case CascadeOp::Concat: return "O_c";
    case CascadeOp::AdaptiveAttention: return "O_ac";
    }
    return "?";
}

std::string to_string(CascadeInfo info) { return "C" + std::to_string(static_cast<int>(info)); }

CascadeOp parse_cascade_op(const std::string& s) {
    if (s == "O_a") return CascadeOp::Add;
    if (s == "O_p") return CascadeOp::Product;
    if (s == "O_c") return CascadeOp::Concat;
    if (s == "O_ac") return CascadeOp::AdaptiveAttention;
    throw ConfigError("unknown cascade operation '" + s + "' (expected O_a, O_p, O_c or O_ac)");
}

CascadeInfo parse_cascade_info(const std::string& s) {
    if (s.size() == 2 && s[0] == 'C' && s[1] >= '1' && s[1] <= '6') return static_cast<CascadeInfo>(s[1] - '0');
    throw ConfigError("unknown cascade information variant '" + s + "' (expected C1..C6)");
}

void NetConfig::validate() const {
    if (edn_base_width <= 0 || rn_width <= 0 || lstm_hidden <= 0 || disc_base_width <= 0)
        throw ConfigError("network widths must be positive");
    if (rn_kernel <= 0 || rn_kernel % 2 == 0 || lstm_kernel <= 0 || lstm_kernel % 2 == 0 || disc_kernel <= 0 || disc_kernel % 2 == 0)
        throw ConfigError("kernel sizes must be positive and odd");
    if (patch <= 0 || patch % kEdnDownsampling != 0)
        throw ConfigError("patch size must be a positive multiple of 16, got " + std::to_string(patch));
    const int info_index = static_cast<int>(info);
    if (info_index < 1 || info_index > 6) throw ConfigError("cascade information variant out of range");
}

torch::nn::BatchNorm2dOptions bn_options(std::int64_t channels, bool running_stats) {
    return torch::nn::BatchNorm2dOptions(channels).track_running_stats(running_stats);
}

void require_divisible(const torch::Tensor& x, std::int64_t factor, const char* who) {
    if (x.dim() != 4) {
        std::ostringstream os;
        os << who << ": expected an [N,C,H,W] tensor, got " << x.sizes();
        throw ShapeError(os.str());
    }
    if (x.size(2) % factor != 0 || x.size(3) % factor != 0) {
        std::ostringstream os;
        os << who << ": spatial size " << x.size(2) << "x" << x.size(3) << " is not divisible by " << factor;
        throw ShapeError(os.str());
    }
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* who) {
    if (a.sizes() != b.sizes()) {
        std::ostringstream os;
        os << who << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
        throw ShapeError(os.str());
    }
}

torch::nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride = 1, bool bias = true) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(bias));
}

void zero_conv(torch::nn::Conv2d& c) {
    torch::NoGradGuard guard;
    c->weight.zero_();
    if (c->bias.defined()) c->bias.zero_();
}

torch::Tensor upsample_to(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<std::int64_t>{h, w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

} // namespace

// ---------------------------------------------------------------------------------------------

ConvBnReluImpl::ConvBnReluImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride, bool running_stats) {
    conv = register_module("conv", nets::conv(in, out, kernel, stride, false));
    bn = register_module("bn", torch::nn::BatchNorm2d(bn_options(out, running_stats)));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) { return torch::relu(bn(conv(x))); }

DoubleConvImpl::DoubleConvImpl(std::int64_t in, std::int64_t out, bool running_stats) {
    first = register_module("first", ConvBnRelu(in, out, 3, 1, running_stats));
    second = register_module("second", ConvBnRelu(out, out, 3, 1, running_stats));
}

torch::Tensor DoubleConvImpl::forward(const torch::Tensor& x) { return second(first(x)); }

// ---------------------------------------------------------------------------------------------

EncoderDecoderImpl::EncoderDecoderImpl(std::int64_t base_, bool rs) : base(base_) {
    const auto b = base;
    inc = register_module("inc", DoubleConv(1, b, rs));
    down1 = register_module("down1", DoubleConv(b, 2 * b, rs));
    down2 = register_module("down2", DoubleConv(2 * b, 4 * b, rs));
    down3 = register_module("down3", DoubleConv(4 * b, 8 * b, rs));
    down4 = register_module("down4", DoubleConv(8 * b, 8 * b, rs));
    up1 = register_module("up1", DoubleConv(16 * b, 4 * b, rs));
    up2 = register_module("up2", DoubleConv(8 * b, 2 * b, rs));
    up3 = register_module("up3", DoubleConv(4 * b, b, rs));
    up4 = register_module("up4", DoubleConv(2 * b, b, rs));
    head = register_module("head", conv(b, 1, 1));
}

EdnOutput EncoderDecoderImpl::forward(const torch::Tensor& x) {
    require_divisible(x, kEdnDownsampling, "encoder-decoder");
    if (x.size(1) != 1) throw ShapeError("encoder-decoder expects a single-channel image");
    auto pool = [](const torch::Tensor& t) { return F::max_pool2d(t, F::MaxPool2dFuncOptions(2)); };
    auto up = [](const torch::Tensor& t, const torch::Tensor& skip) {
        return torch::cat({skip, upsample_to(t, skip.size(2), skip.size(3))}, 1);
    };
    const auto x1 = inc(x);
    const auto x2 = down1(pool(x1));
    const auto x3 = down2(pool(x2));
    const auto x4 = down3(pool(x3));
    const auto x5 = down4(pool(x4));
    const auto u1 = up1(up(x5, x4));
    const auto u2 = up2(up(u1, x3));
    const auto u3 = up3(up(u2, x2));
    const auto u4 = up4(up(u3, x1));
    EdnOutput out;
    out.logits = head(u4);
    out.prob = torch::sigmoid(out.logits);
    out.taps = {x5, u1, u2, u3, u4};
    return out;
}

std::int64_t EncoderDecoderImpl::tap_channels(CascadeInfo info) const {
    switch (info) {
    case CascadeInfo::C1: return 1;
    case CascadeInfo::C2: return base;
    case CascadeInfo::C3: return base;
    case CascadeInfo::C4: return 2 * base;
    case CascadeInfo::C5: return 4 * base;
    case CascadeInfo::C6: return 8 * base;
    }
    throw ConfigError("unknown cascade information variant");
}

void EncoderDecoderImpl::zero_head() { zero_conv(head); }

// ---------------------------------------------------------------------------------------------

ConvLstmCellImpl::ConvLstmCellImpl(std::int64_t in, std::int64_t hidden_, std::int64_t kernel) : hidden(hidden_) {
    gates = register_module("gates", conv(in + hidden, 4 * hidden, kernel));
}

std::pair<torch::Tensor, torch::Tensor> ConvLstmCellImpl::forward(const torch::Tensor& x, const torch::Tensor& h, const torch::Tensor& c) {
    const auto g = gates(torch::cat({x, h}, 1)).chunk(4, 1);
    const auto i = torch::sigmoid(g[0]);
    const auto f = torch::sigmoid(g[1]);
    const auto o = torch::sigmoid(g[2]);
    const auto candidate = torch::tanh(g[3]);
    auto c_next = f * c + i * candidate;
    auto h_next = o * torch::tanh(c_next);
    return {h_next, c_next};
}

torch::Tensor adaptive_attention_combine(const torch::Tensor& image, const torch::Tensor& atrium,
                                         const torch::Tensor& fw1, const torch::Tensor& fw2) {
    require_same_shape(image, atrium, "adaptive attention");
    require_same_shape(image, fw1, "adaptive attention");
    require_same_shape(image, fw2, "adaptive attention");
    return (fw1 + image) * (fw2 + atrium);
}

AdaptiveAttentionImpl::AdaptiveAttentionImpl(std::int64_t hidden, std::int64_t kernel) {
    cell = register_module("cell", ConvLstmCell(1, hidden, kernel));
    head_w1 = register_module("head_w1", conv(hidden, 1, 1));
    head_w2 = register_module("head_w2", conv(hidden, 1, 1));
    zero_conv(head_w1);
    zero_conv(head_w2);
}

AttentionMaps AdaptiveAttentionImpl::forward(const torch::Tensor& image, const torch::Tensor& atrium) {
    require_same_shape(image, atrium, "adaptive attention");
    const auto n = image.size(0), h = image.size(2), w = image.size(3);
    auto state_h = torch::zeros({n, cell->hidden, h, w}, image.options());
    auto state_c = torch::zeros_like(state_h);
    std::tie(state_h, state_c) = cell(image, state_h, state_c);
    std::tie(state_h, state_c) = cell(atrium, state_h, state_c);
    AttentionMaps m;
    m.fw1 = head_w1(state_h);
    m.fw2 = head_w2(state_h);
    m.enhanced = adaptive_attention_combine(image, atrium, m.fw1, m.fw2);
    return m;
}

// ---------------------------------------------------------------------------------------------

ResidualBlockImpl::ResidualBlockImpl(std::int64_t width, std::int64_t kernel, bool rs) {
    path = register_module("path", torch::nn::Sequential(ConvBnRelu(width, width, kernel, 1, rs),
                                                         ConvBnRelu(width, width, kernel, 1, rs),
                                                         ConvBnRelu(width, width, kernel, 1, rs)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + path->forward(x); }

ResidualScarNetImpl::ResidualScarNetImpl(std::int64_t in_channels, std::int64_t width, std::int64_t kernel, bool rs) {
    stem = register_module("stem", conv(in_channels, width, 1));
    block1 = register_module("block1", ResidualBlock(width, kernel, rs));
    block2 = register_module("block2", ResidualBlock(width, kernel, rs));
    block3 = register_module("block3", ResidualBlock(width, kernel, rs));
    head = register_module("head", conv(width, 1, 1));
}

torch::Tensor ResidualScarNetImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != stem->options.in_channels()) {
        std::ostringstream os;
        os << "residual scar network expects [N," << stem->options.in_channels() << ",H,W], got " << x.sizes();
        throw ShapeError(os.str());
    }
    return head(block3(block2(block1(stem(x)))));
}

void ResidualScarNetImpl::zero_head() { zero_conv(head); }

void ResidualScarNetImpl::zero_conv_paths() {
    torch::NoGradGuard guard;
    for (auto* block : {&block1, &block2, &block3})
        for (auto& p : (*block)->path->named_parameters())
            if (p.key().find("conv") != std::string::npos) p.value().zero_();
}

// ---------------------------------------------------------------------------------------------

JointDiscriminatorImpl::JointDiscriminatorImpl(std::int64_t base, std::int64_t kernel, bool rs) {
    encoder = register_module("encoder", torch::nn::Sequential(ConvBnRelu(3, base, kernel, 2, rs),
                                                               ConvBnRelu(base, 2 * base, kernel, 2, rs),
                                                               ConvBnRelu(2 * base, 4 * base, kernel, 2, rs),
                                                               ConvBnRelu(4 * base, 8 * base, kernel, 2, rs)));
    subpixel = register_module("subpixel", conv(8 * base, kSubpixelChannels, 3));
    shuffle = register_module("shuffle", torch::nn::PixelShuffle(torch::nn::PixelShuffleOptions(kDiscDownsampling)));
    feature_bn = register_module("feature_bn", torch::nn::BatchNorm2d(bn_options(kDiscFeatureChannels, rs)));
    head = register_module("head", conv(kDiscFeatureChannels, 1, 1));
}

DiscriminatorOutput JointDiscriminatorImpl::forward(const torch::Tensor& atrium, const torch::Tensor& scar, const torch::Tensor& image) {
    require_same_shape(atrium, scar, "discriminator");
    require_same_shape(atrium, image, "discriminator");
    const auto x = torch::cat({atrium, scar, image}, 1);
    require_divisible(x, kDiscDownsampling, "discriminator");
    DiscriminatorOutput out;
    out.features = torch::relu(feature_bn(shuffle(subpixel(encoder->forward(x)))));
    out.logits = head(out.features);
    out.confidence = torch::sigmoid(out.logits);
    return out;
}

// ---------------------------------------------------------------------------------------------

CascadeOutput CascadeOutput::detached() const {
    auto d = [](const torch::Tensor& t) { return t.defined() ? t.detach() : t; };
    return {d(atrium_logits), d(y_hat_l), d(cascade_signal), d(fw1), d(fw2), d(enhanced), d(scar_logits), d(y_hat_s)};
}

TapReducerImpl::TapReducerImpl(std::int64_t in_channels) { reduce = register_module("reduce", conv(in_channels, 1, 1)); }

torch::Tensor TapReducerImpl::forward(const torch::Tensor& tap, std::int64_t height, std::int64_t width) {
    // A 1×1 conv commutes with bilinear resizing, so reducing first is equivalent and cheaper.
    return upsample_to(reduce(tap), height, width);
}

CascadeImpl::CascadeImpl(const NetConfig& cfg) : config(cfg) {
    config.validate();
    edn = register_module("edn", EncoderDecoder(config.edn_base_width, config.bn_running_stats));
    if (config.op == CascadeOp::AdaptiveAttention)
        attention = register_module("attention", AdaptiveAttention(config.lstm_hidden, config.lstm_kernel));
    if (config.info != CascadeInfo::C1)
        reducer = register_module("reducer", TapReducer(edn->tap_channels(config.info)));
    const std::int64_t rn_in = config.op == CascadeOp::Concat ? 2 : 1;
    rn = register_module("rn", ResidualScarNet(rn_in, config.rn_width, config.rn_kernel, config.bn_running_stats));
}

torch::Tensor CascadeImpl::cascade_info_tap(const EdnOutput& edn_out, std::int64_t height, std::int64_t width) {
    switch (config.info) {
    case CascadeInfo::C1: return edn_out.prob;
    case CascadeInfo::C2: return reducer(edn_out.taps[4], height, width);
    case CascadeInfo::C3: return reducer(edn_out.taps[3], height, width);
    case CascadeInfo::C4: return reducer(edn_out.taps[2], height, width);
    case CascadeInfo::C5: return reducer(edn_out.taps[1], height, width);
    case CascadeInfo::C6: return reducer(edn_out.taps[0], height, width);
    }
    throw ConfigError("unknown cascade information variant");
}

AttentionMaps CascadeImpl::fuse(const torch::Tensor& image, const torch::Tensor& signal) {
    require_same_shape(image, signal, "cascade fusion");
    switch (config.op) {
    case CascadeOp::Add: return {torch::Tensor(), torch::Tensor(), image + signal};
    case CascadeOp::Product: return {torch::Tensor(), torch::Tensor(), image * signal};
    case CascadeOp::Concat: return {torch::Tensor(), torch::Tensor(), torch::cat({image, signal}, 1)};
    case CascadeOp::AdaptiveAttention: return attention(image, signal);
    }
    throw ConfigError("unknown cascade operation");
}

CascadeOutput CascadeImpl::forward(const torch::Tensor& image) {
    const auto e = edn(image);
    CascadeOutput out;
    out.atrium_logits = e.logits;
    out.y_hat_l = e.prob;
    out.cascade_signal = cascade_info_tap(e, image.size(2), image.size(3));
    auto maps = fuse(image, out.cascade_signal);
    out.fw1 = maps.fw1;
    out.fw2 = maps.fw2;
    out.enhanced = maps.enhanced;
    out.scar_logits = rn(out.enhanced);
    out.y_hat_s = torch::sigmoid(out.scar_logits);
    return out;
}

} // namespace jasgan::nets
