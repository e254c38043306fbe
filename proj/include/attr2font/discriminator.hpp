#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "attr2font/config.hpp"

namespace attr2font {

struct CriticOutput {
  torch::Tensor p_real;     // [B] in (0, 1)
  torch::Tensor attr_pred;  // [B, N_a], unconstrained
};

/// Stride-2 LeakyReLU trunk with two heads on the pooled feature: a
/// real/fake probability and an attribute regressor.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& config);

  /// x: [B, 1, H, W].
  CriticOutput forward(const torch::Tensor& x);

  torch::nn::Linear real_head{nullptr};
  torch::nn::Linear attr_head{nullptr};

 private:
  int64_t resolution_;
  torch::nn::Sequential trunk_{nullptr};
};
TORCH_MODULE(Discriminator);

}  // namespace attr2font
