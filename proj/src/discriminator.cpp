#include "attr2font/discriminator.hpp"

#include <algorithm>
#include <string>

#include "attr2font/error.hpp"
#include "attr2font/generator.hpp"

namespace nn = torch::nn;

namespace attr2font {

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& config) : resolution_(config.resolution) {
  trunk_ = nn::Sequential();
  int64_t in = 1;
  for (int64_t i = 0; i < config.disc_layers; ++i) {
    const int64_t out = std::min(config.max_channels, config.disc_base_channels << i);
    trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    trunk_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  register_module("trunk", trunk_);
  real_head = register_module("real_head", nn::Linear(in, 1));
  attr_head = register_module("attr_head", nn::Linear(in, config.n_attrs));
  init_conv_weights(*this);
}

CriticOutput DiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1) throw Error(ErrorCode::ShapeMismatch, "critic input must be [B, 1, H, W]");
  if (x.size(2) != resolution_ || x.size(3) != resolution_) {
    throw Error(ErrorCode::WrongResolution, "critic input must be " + std::to_string(resolution_) + " px");
  }
  auto feature = trunk_->forward(x).mean({2, 3});
  return {torch::sigmoid(real_head(feature)).squeeze(1), attr_head(feature)};
}

}  // namespace attr2font
