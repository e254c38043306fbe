#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "attr2font/aam.hpp"
#include "attr2font/config.hpp"
#include "attr2font/vst.hpp"

namespace attr2font {

struct ContentFeatures {
  std::vector<torch::Tensor> scales;  // c_1..c_L, finest first; c_i is [B, C_i, H>>i, W>>i]
  torch::Tensor class_logits;         // [B, N_c]

  const torch::Tensor& deepest() const { return scales.back(); }
};

/// Stride-2 convolution pyramid over the source glyph plus a character
/// classifier on the deepest scale.
class ContentEncoderImpl : public torch::nn::Module {
 public:
  explicit ContentEncoderImpl(const ModelConfig& config);

  ContentFeatures forward(const torch::Tensor& source);

  torch::nn::Linear classifier{nullptr};

 private:
  int64_t resolution_;
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(ContentEncoder);

/// Draws every convolution and transposed-convolution weight from N(0, std)
/// and zeroes their biases. libtorch's default transposed-convolution init takes
/// its fan-in from the output channels, which saturates the 1-channel tanh head.
void init_conv_weights(torch::nn::Module& module, double std = 0.02);

/// Broadcasts a [B, D] vector over an h x w grid as D constant channels.
torch::Tensor tile_style(const torch::Tensor& style, int64_t h, int64_t w);

struct DecoderOptions {
  bool zero_skips = false;  // ablation: replace every skip feature with zeros
};

/// Up-sampling decoder. Stage 1 lifts [tile(s); c_L]; stage i >= 2 lifts
/// [CA_i([g_{i-1}; attn_{i-1}]); h_{i-1}], where h_j fuses tile(s) with the
/// skip feature c_{L-j} through a 1x1 convolution. The last stage ends in tanh.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& config);

  /// `attention[j]` feeds stage j + 2 and must match the spatial size of g_{j+1}.
  torch::Tensor forward(const ContentFeatures& content, const torch::Tensor& style,
                        const std::vector<torch::Tensor>& attention, DecoderOptions options = {});

  int64_t stage_count() const { return static_cast<int64_t>(up_.size()); }
  /// Spatial size of the attention maps consumed by each stage 2..L.
  std::vector<int64_t> attention_sizes() const;

 private:
  ModelConfig config_;
  std::vector<torch::nn::Sequential> up_;
  std::vector<torch::nn::Sequential> fuse_;     // h_1..h_{L-1}
  std::vector<ChannelAttention> attention_;     // stages 2..L
};
TORCH_MODULE(Decoder);

struct GeneratorOutput {
  torch::Tensor image;         // [B, 1, H, W] in [-1, 1]
  torch::Tensor class_logits;  // [B, N_c] for the source glyph
  torch::Tensor style;         // transformed style [B, style_dim]
};

/// Full generator: style encoding and transformation, attribute attention,
/// content encoding and decoding.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& config);

  /// source [B, 1, H, W]; refs [B, m, H, W]; alpha_a, alpha_b [B, N_a].
  GeneratorOutput forward(const torch::Tensor& source, const torch::Tensor& refs, const torch::Tensor& alpha_a,
                          const torch::Tensor& alpha_b, DecoderOptions options = {});

  const ModelConfig& config() const { return config_; }

  StyleEncoder style_encoder{nullptr};
  StyleTransformer style_transformer{nullptr};
  AttributeAttention attribute_attention{nullptr};
  ContentEncoder content_encoder{nullptr};
  Decoder decoder{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(Generator);

}  // namespace attr2font
