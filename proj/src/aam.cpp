#include "attr2font/aam.hpp"

#include <algorithm>
#include <string>

#include "attr2font/error.hpp"

namespace F = torch::nn::functional;

namespace attr2font {

namespace {

torch::Tensor as_batch(const torch::Tensor& alpha) { return alpha.dim() == 1 ? alpha.unsqueeze(0) : alpha; }

}  // namespace

torch::Tensor attribute_feature_difference(const torch::Tensor& alpha_a, const torch::Tensor& alpha_b,
                                           const torch::Tensor& embedding) {
  auto a = as_batch(alpha_a), b = as_batch(alpha_b);
  if (embedding.dim() != 2 || a.dim() != 2 || a.sizes() != b.sizes() || a.size(1) != embedding.size(0)) {
    throw Error(ErrorCode::ShapeMismatch, "attribute vectors and embedding table disagree in N_a");
  }
  return (b - a).unsqueeze(2) * embedding.unsqueeze(0);
}

torch::Tensor outer_product_maps(const torch::Tensor& beta) {
  if (beta.dim() < 2) throw Error(ErrorCode::ShapeMismatch, "beta must be at least [N_a, N_e]");
  return torch::matmul(beta.unsqueeze(-1), beta.unsqueeze(-2));
}

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t ratio) : channels_(channels) {
  const int64_t hidden = std::max<int64_t>(1, channels / std::max<int64_t>(1, ratio));
  squeeze = register_module("squeeze", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, hidden, 1)));
  stretch = register_module("stretch", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, channels, 1)));
}

ChannelAttentionOutput ChannelAttentionImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != channels_) {
    throw Error(ErrorCode::ShapeMismatch,
                "channel attention expects " + std::to_string(channels_) + " channels");
  }
  auto pooled = x.mean({2, 3}, /*keepdim=*/true);
  auto map = torch::sigmoid(stretch(torch::relu(squeeze(pooled))));
  return {map, x * map};
}

torch::Tensor rescale_for_stage(const torch::Tensor& refined, int64_t h, int64_t w, ResizeMode mode) {
  if (h <= 0 || w <= 0) throw Error(ErrorCode::ZeroSize, "stage size must be positive");
  if (refined.dim() != 4) throw Error(ErrorCode::ShapeMismatch, "expected [B, C, H, W] maps");
  if (refined.size(2) == h && refined.size(3) == w) return refined;
  if (mode == ResizeMode::Area) {
    return F::adaptive_avg_pool2d(refined, F::AdaptiveAvgPool2dFuncOptions({h, w}));
  }
  return F::interpolate(refined, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{h, w})
                                     .mode(torch::kBilinear)
                                     .align_corners(true));
}

AttributeAttentionImpl::AttributeAttentionImpl(int64_t n_attrs, int64_t n_embed, int64_t stages,
                                               int64_t ratio)
    : n_attrs_(n_attrs), n_embed_(n_embed) {
  embedding = register_parameter("embedding", torch::randn({n_attrs, n_embed}) * 0.02);
  for (int64_t s = 0; s < stages; ++s) {
    attention_.push_back(
        register_module("attention" + std::to_string(s), ChannelAttention(n_attrs, ratio)));
  }
}

torch::Tensor AttributeAttentionImpl::gamma(const torch::Tensor& alpha_a, const torch::Tensor& alpha_b) const {
  return outer_product_maps(attribute_feature_difference(alpha_a, alpha_b, embedding));
}

AttentionMaps AttributeAttentionImpl::stage_maps(const torch::Tensor& gamma, int64_t stage) {
  if (stage < 0 || stage >= stages()) throw Error(ErrorCode::IndexOutOfRange, "no such attention stage");
  auto out = attention_[stage]->forward(gamma);
  return {gamma, out.map, out.refined};
}

std::vector<torch::Tensor> AttributeAttentionImpl::forward(const torch::Tensor& alpha_a,
                                                           const torch::Tensor& alpha_b,
                                                           const std::vector<int64_t>& stage_sizes) {
  if (static_cast<int64_t>(stage_sizes.size()) != stages()) {
    throw Error(ErrorCode::ShapeMismatch, "one stage size per attention block is required");
  }
  auto g = gamma(alpha_a, alpha_b);
  std::vector<torch::Tensor> out;
  out.reserve(stage_sizes.size());
  for (int64_t s = 0; s < stages(); ++s) {
    out.push_back(rescale_for_stage(stage_maps(g, s).refined, stage_sizes[s], stage_sizes[s]));
  }
  return out;
}

}  // namespace attr2font
