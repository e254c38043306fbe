#include "attr2font/vst.hpp"

#include <algorithm>
#include <string>

#include "attr2font/error.hpp"

namespace nn = torch::nn;

namespace attr2font {

StyleEncoderImpl::StyleEncoderImpl(const ModelConfig& config)
    : m_(config.m), resolution_(config.resolution) {
  body_ = nn::Sequential();
  int64_t in = config.m;
  for (int64_t i = 1; i <= config.levels; ++i) {
    const int64_t out =
        i == config.levels ? config.style_dim
                           : std::min(config.style_dim, config.style_base_channels << (i - 1));
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    if (i > 1) body_->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
    body_->push_back(nn::ReLU());
    in = out;
  }
  register_module("body", body_);
}

torch::Tensor StyleEncoderImpl::forward(const torch::Tensor& refs) {
  if (refs.dim() != 4 || refs.size(1) != m_) {
    throw Error(ErrorCode::WrongRefCount, "expected " + std::to_string(m_) + " stacked reference glyphs");
  }
  if (refs.size(2) != resolution_ || refs.size(3) != resolution_) {
    throw Error(ErrorCode::WrongResolution, "reference glyphs must be " + std::to_string(resolution_) + " px");
  }
  return body_->forward(refs).mean({2, 3});
}

ResidualBlockImpl::ResidualBlockImpl(int64_t dim) {
  fc1 = register_module("fc1", nn::Linear(dim, dim));
  norm = register_module("norm", nn::LayerNorm(nn::LayerNormOptions({dim})));
  fc2 = register_module("fc2", nn::Linear(dim, dim));
}

torch::Tensor ResidualBlockImpl::branch(const torch::Tensor& x) {
  return fc2(torch::relu(norm(fc1(x))));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + branch(x); }

StyleTransformerImpl::StyleTransformerImpl(const ModelConfig& config)
    : style_dim_(config.style_dim), n_attrs_(config.n_attrs) {
  projection = register_module("projection", nn::Linear(config.style_dim + config.n_attrs, config.style_dim));
  for (int64_t i = 0; i < config.n_res_blocks; ++i) {
    blocks_.push_back(register_module("block" + std::to_string(i), ResidualBlock(config.style_dim)));
  }
}

torch::Tensor StyleTransformerImpl::project(const torch::Tensor& style, const torch::Tensor& attr_delta) {
  if (style.dim() != 2 || style.size(1) != style_dim_ || attr_delta.dim() != 2 ||
      attr_delta.size(1) != n_attrs_ || attr_delta.size(0) != style.size(0)) {
    throw Error(ErrorCode::ShapeMismatch, "style [B, D_s] and attribute delta [B, N_a] expected");
  }
  return projection(torch::cat({style, attr_delta}, 1));
}

torch::Tensor StyleTransformerImpl::forward(const torch::Tensor& style, const torch::Tensor& attr_delta) {
  auto x = project(style, attr_delta);
  for (auto& block : blocks_) x = block->forward(x);
  return x;
}

}  // namespace attr2font
