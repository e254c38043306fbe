#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "attr2font/config.hpp"

namespace attr2font {

/// Maps m reference glyphs of one font, stacked along channels
/// ([B, m, H, W]), to a global style vector [B, style_dim].
class StyleEncoderImpl : public torch::nn::Module {
 public:
  explicit StyleEncoderImpl(const ModelConfig& config);

  torch::Tensor forward(const torch::Tensor& refs);

  int64_t m() const { return m_; }

 private:
  int64_t m_;
  int64_t resolution_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(StyleEncoder);

/// out = in + fc2(relu(norm(fc1(in)))). With every parameter of the branch
/// zeroed the block is an exact identity.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int64_t dim);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor branch(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Estimates the target style from the source style and the attribute
/// difference: project [s; delta] back to style_dim, then N_rb residual blocks.
class StyleTransformerImpl : public torch::nn::Module {
 public:
  explicit StyleTransformerImpl(const ModelConfig& config);

  torch::Tensor forward(const torch::Tensor& style, const torch::Tensor& attr_delta);
  torch::Tensor project(const torch::Tensor& style, const torch::Tensor& attr_delta);

  const std::vector<ResidualBlock>& blocks() const { return blocks_; }

  torch::nn::Linear projection{nullptr};

 private:
  int64_t style_dim_;
  int64_t n_attrs_;
  std::vector<ResidualBlock> blocks_;
};
TORCH_MODULE(StyleTransformer);

}  // namespace attr2font
