#pragma once

// Networks of the inter-cascade segmenter:
//   EncoderDecoder      atrium network, bilinear-upsampling U-Net (4 down / 4 up)
//   AdaptiveAttention   convLSTM over the sequence (I, ŷ_l) feeding two 1×1 weight-map heads;
//                       A = (F_w1 + I) ⊙ (F_w2 + ŷ_l)
//   ResidualScarNet     full-resolution residual network for scars (no downsampling)
//   JointDiscriminator  conditional per-pixel discriminator over (atrium, scar, image)
//   Cascade             EncoderDecoder → fusion → ResidualScarNet

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "jasgan/error.hpp"

namespace jasgan::nets {

/// How the atrium signal is combined with the image before the scar network.
enum class CascadeOp { Add, Product, Concat, AdaptiveAttention };

/// Which atrium-network signal feeds the cascade: C1 = probability map, C2..C5 = decoder
/// up-sampling blocks 4..1, C6 = encoder output.
enum class CascadeInfo { C1 = 1, C2, C3, C4, C5, C6 };

std::string to_string(CascadeOp op);
std::string to_string(CascadeInfo info);
CascadeOp parse_cascade_op(const std::string& s);
CascadeInfo parse_cascade_info(const std::string& s);

struct NetConfig {
    int edn_base_width = 32;
    int rn_width = 32;
    int rn_kernel = 5;
    int lstm_hidden = 32;
    int lstm_kernel = 3;
    int disc_base_width = 32;  // 4 stride-2 convs with base, 2·base, 4·base, 8·base channels
    int disc_kernel = 5;
    int patch = 96;
    CascadeOp op = CascadeOp::AdaptiveAttention;
    CascadeInfo info = CascadeInfo::C1;
    // false: batch statistics in both training and inference; true: running statistics at eval time.
    bool bn_running_stats = false;
    std::uint64_t seed = 0;

    void validate() const;
};

constexpr std::int64_t kEdnDownsampling = 16;
constexpr std::int64_t kDiscDownsampling = 16;
constexpr std::int64_t kSubpixelChannels = 3072;  // 12 · 16²
constexpr std::int64_t kDiscFeatureChannels = kSubpixelChannels / (kDiscDownsampling * kDiscDownsampling);

torch::nn::BatchNorm2dOptions bn_options(std::int64_t channels, bool running_stats);

// ---------------------------------------------------------------------------------------------

struct ConvBnReluImpl : torch::nn::Module {
    ConvBnReluImpl(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride, bool running_stats);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv{nullptr};
    torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ConvBnRelu);

struct DoubleConvImpl : torch::nn::Module {
    DoubleConvImpl(std::int64_t in, std::int64_t out, bool running_stats);
    torch::Tensor forward(const torch::Tensor& x);

    ConvBnRelu first{nullptr}, second{nullptr};
};
TORCH_MODULE(DoubleConv);

struct EdnOutput {
    torch::Tensor logits;
    torch::Tensor prob;
    // taps[0] = encoder output (C6), taps[1..4] = up-sampling blocks 1..4 (C5..C2)
    std::array<torch::Tensor, 5> taps;
};

struct EncoderDecoderImpl : torch::nn::Module {
    EncoderDecoderImpl(std::int64_t base, bool running_stats);
    EdnOutput forward(const torch::Tensor& x);
    std::int64_t tap_channels(CascadeInfo info) const;
    void zero_head();

    std::int64_t base;
    DoubleConv inc{nullptr}, down1{nullptr}, down2{nullptr}, down3{nullptr}, down4{nullptr};
    DoubleConv up1{nullptr}, up2{nullptr}, up3{nullptr}, up4{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(EncoderDecoder);

struct ConvLstmCellImpl : torch::nn::Module {
    ConvLstmCellImpl(std::int64_t in, std::int64_t hidden, std::int64_t kernel);
    /// One step; returns (h, c).
    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x, const torch::Tensor& h, const torch::Tensor& c);

    std::int64_t hidden;
    torch::nn::Conv2d gates{nullptr};
};
TORCH_MODULE(ConvLstmCell);

struct AttentionMaps {
    torch::Tensor fw1;
    torch::Tensor fw2;
    torch::Tensor enhanced;  // A
};

/// A = (F_w1 + I) ⊙ (F_w2 + y). Exposed separately so the identity can be checked in isolation.
torch::Tensor adaptive_attention_combine(const torch::Tensor& image, const torch::Tensor& atrium,
                                         const torch::Tensor& fw1, const torch::Tensor& fw2);

struct AdaptiveAttentionImpl : torch::nn::Module {
    AdaptiveAttentionImpl(std::int64_t hidden, std::int64_t kernel);
    AttentionMaps forward(const torch::Tensor& image, const torch::Tensor& atrium);

    ConvLstmCell cell{nullptr};
    torch::nn::Conv2d head_w1{nullptr}, head_w2{nullptr};
};
TORCH_MODULE(AdaptiveAttention);

struct ResidualBlockImpl : torch::nn::Module {
    ResidualBlockImpl(std::int64_t width, std::int64_t kernel, bool running_stats);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential path{nullptr};
};
TORCH_MODULE(ResidualBlock);

struct ResidualScarNetImpl : torch::nn::Module {
    ResidualScarNetImpl(std::int64_t in_channels, std::int64_t width, std::int64_t kernel, bool running_stats);
    /// Returns logits; the probability is sigmoid(logits).
    torch::Tensor forward(const torch::Tensor& x);
    void zero_head();
    void zero_conv_paths();

    torch::nn::Conv2d stem{nullptr};
    ResidualBlock block1{nullptr}, block2{nullptr}, block3{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(ResidualScarNet);

struct DiscriminatorOutput {
    torch::Tensor confidence;  // M ∈ (0,1), [N,1,H,W]
    torch::Tensor logits;
    torch::Tensor features;    // penultimate activation: pixel shuffle, BN, ReLU; [N,12,H,W]
};

struct JointDiscriminatorImpl : torch::nn::Module {
    JointDiscriminatorImpl(std::int64_t base, std::int64_t kernel, bool running_stats);
    DiscriminatorOutput forward(const torch::Tensor& atrium, const torch::Tensor& scar, const torch::Tensor& image);

    torch::nn::Sequential encoder{nullptr};
    torch::nn::Conv2d subpixel{nullptr};
    torch::nn::PixelShuffle shuffle{nullptr};
    torch::nn::BatchNorm2d feature_bn{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(JointDiscriminator);

struct CascadeOutput {
    torch::Tensor atrium_logits;
    torch::Tensor y_hat_l;
    torch::Tensor cascade_signal;  // ŷ_l for C1, the reduced tap otherwise
    torch::Tensor fw1;
    torch::Tensor fw2;
    torch::Tensor enhanced;        // A
    torch::Tensor scar_logits;
    torch::Tensor y_hat_s;

    CascadeOutput detached() const;
};

/// 1×1 reduction of a feature tap to one channel, bilinearly resized to the input resolution.
struct TapReducerImpl : torch::nn::Module {
    explicit TapReducerImpl(std::int64_t in_channels);
    torch::Tensor forward(const torch::Tensor& tap, std::int64_t height, std::int64_t width);

    torch::nn::Conv2d reduce{nullptr};
};
TORCH_MODULE(TapReducer);

struct CascadeImpl : torch::nn::Module {
    explicit CascadeImpl(const NetConfig& config);
    CascadeOutput forward(const torch::Tensor& image);

    /// The cascade signal for variant `info` (C1 = ŷ_l).
    torch::Tensor cascade_info_tap(const EdnOutput& edn_out, std::int64_t height, std::int64_t width);
    /// Combine image and cascade signal per the configured operation.
    AttentionMaps fuse(const torch::Tensor& image, const torch::Tensor& signal);

    NetConfig config;
    EncoderDecoder edn{nullptr};
    AdaptiveAttention attention{nullptr};  // only for CascadeOp::AdaptiveAttention
    TapReducer reducer{nullptr};           // only for C2..C6
    ResidualScarNet rn{nullptr};
};
TORCH_MODULE(Cascade);

/// Throws ShapeError unless x is [N,C,H,W] with H and W divisible by `factor`.
void require_divisible(const torch::Tensor& x, std::int64_t factor, const char* who);

} // namespace jasgan::nets
