#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace attr2font {

/// beta[b, i, j] = (alpha_b[b, i] - alpha_a[b, i]) * embedding[i, j].
/// Accepts [N_a] or [B, N_a] attribute tensors; returns [B, N_a, N_e].
torch::Tensor attribute_feature_difference(const torch::Tensor& alpha_a, const torch::Tensor& alpha_b,
                                           const torch::Tensor& embedding);

/// Per-attribute outer product: gamma[..., i, p, q] = beta[..., i, p] * beta[..., i, q].
torch::Tensor outer_product_maps(const torch::Tensor& beta);

struct ChannelAttentionOutput {
  torch::Tensor map;      // [B, C, 1, 1], strictly inside (0, 1)
  torch::Tensor refined;  // map * input
};

/// Average-pool -> 1x1 conv squeeze -> ReLU -> 1x1 conv stretch -> sigmoid gate.
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  ChannelAttentionImpl(int64_t channels, int64_t ratio);

  ChannelAttentionOutput forward(const torch::Tensor& x);

  int64_t channels() const { return channels_; }

  torch::nn::Conv2d squeeze{nullptr};
  torch::nn::Conv2d stretch{nullptr};

 private:
  int64_t channels_;
};
TORCH_MODULE(ChannelAttention);

enum class ResizeMode { Bilinear, Area };

/// Spatially resizes [B, C, H, W] maps to [B, C, h, w]. Bilinear uses aligned
/// corners; Area averages the covered source cells.
torch::Tensor rescale_for_stage(const torch::Tensor& refined, int64_t h, int64_t w,
                                ResizeMode mode = ResizeMode::Bilinear);

struct AttentionMaps {
  torch::Tensor gamma;        // [B, N_a, N_e, N_e]
  torch::Tensor channel_map;  // [B, N_a, 1, 1]
  torch::Tensor refined;      // [B, N_a, N_e, N_e]
};

/// Attribute Attention Module: learnable attribute embeddings turned into
/// per-attribute 2-D maps, gated by channel attention. Every decoder stage that
/// consumes the maps owns its own attention block.
class AttributeAttentionImpl : public torch::nn::Module {
 public:
  AttributeAttentionImpl(int64_t n_attrs, int64_t n_embed, int64_t stages, int64_t ratio);

  torch::Tensor gamma(const torch::Tensor& alpha_a, const torch::Tensor& alpha_b) const;
  AttentionMaps stage_maps(const torch::Tensor& gamma, int64_t stage);
  /// Refined maps for every stage, resized to `stage_sizes[s]` squared.
  std::vector<torch::Tensor> forward(const torch::Tensor& alpha_a, const torch::Tensor& alpha_b,
                                     const std::vector<int64_t>& stage_sizes);

  int64_t n_attrs() const { return n_attrs_; }
  int64_t n_embed() const { return n_embed_; }
  int64_t stages() const { return static_cast<int64_t>(attention_.size()); }

  torch::Tensor embedding;

 private:
  int64_t n_attrs_;
  int64_t n_embed_;
  std::vector<ChannelAttention> attention_;
};
TORCH_MODULE(AttributeAttention);

}  // namespace attr2font
