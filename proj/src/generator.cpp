#include "attr2font/generator.hpp"

#include <string>

#include "attr2font/error.hpp"

namespace nn = torch::nn;

namespace attr2font {

namespace {

nn::Sequential down_stage(int64_t in, int64_t out, bool normalize) {
  nn::Sequential s;
  s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
  if (normalize) s->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
  s->push_back(nn::ReLU());
  return s;
}

nn::Sequential up_stage(int64_t in, int64_t out, bool last) {
  nn::Sequential s;
  s->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)));
  if (last) {
    s->push_back(nn::Tanh());
  } else {
    s->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
    s->push_back(nn::ReLU());
  }
  return s;
}

void check_resolution(const torch::Tensor& x, int64_t channels, int64_t resolution, const char* what) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " must be [B, " + std::to_string(channels) + ", H, W]");
  }
  if (x.size(2) != resolution || x.size(3) != resolution) {
    throw Error(ErrorCode::WrongResolution, std::string(what) + " must be " + std::to_string(resolution) + " px");
  }
}

}  // namespace

ContentEncoderImpl::ContentEncoderImpl(const ModelConfig& config) : resolution_(config.resolution) {
  int64_t in = 1;
  for (int64_t i = 1; i <= config.levels; ++i) {
    const int64_t out = config.content_channels(i);
    stages_.push_back(register_module("stage" + std::to_string(i), down_stage(in, out, i > 1)));
    in = out;
  }
  classifier = register_module("classifier", nn::Linear(in, config.n_chars));
}

ContentFeatures ContentEncoderImpl::forward(const torch::Tensor& source) {
  check_resolution(source, 1, resolution_, "source glyph");
  ContentFeatures out;
  auto x = source;
  for (auto& stage : stages_) {
    x = stage->forward(x);
    out.scales.push_back(x);
  }
  out.class_logits = classifier(x.mean({2, 3}));
  return out;
}

void init_conv_weights(torch::nn::Module& module, double std) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/false)) {
    torch::Tensor weight, bias;
    if (auto* conv = m->as<nn::Conv2d>()) {
      weight = conv->weight;
      bias = conv->bias;
    } else if (auto* convt = m->as<nn::ConvTranspose2d>()) {
      weight = convt->weight;
      bias = convt->bias;
    } else {
      continue;
    }
    weight.normal_(0.0, std);
    if (bias.defined()) bias.zero_();
  }
}

torch::Tensor tile_style(const torch::Tensor& style, int64_t h, int64_t w) {
  return style.unsqueeze(2).unsqueeze(3).expand({style.size(0), style.size(1), h, w});
}

DecoderImpl::DecoderImpl(const ModelConfig& config) : config_(config) {
  const int64_t L = config.levels;
  const int64_t S = config.style_dim;
  // g_i has width C_{L-i}; the final stage emits a single channel.
  auto width = [&](int64_t i) { return i == L ? int64_t{1} : config.content_channels(L - i); };
  up_.push_back(register_module("up1", up_stage(S + config.content_channels(L), width(1), L == 1)));
  for (int64_t i = 2; i <= L; ++i) {
    const int64_t prev = width(i - 1);
    const int64_t skip = config.content_channels(L - i + 1);
    nn::Sequential fuse;
    fuse->push_back(nn::Conv2d(nn::Conv2dOptions(S + skip, prev, 1)));
    fuse->push_back(nn::ReLU());
    fuse_.push_back(register_module("fuse" + std::to_string(i - 1), fuse));
    attention_.push_back(register_module("attention" + std::to_string(i),
                                         ChannelAttention(prev + config.n_attrs, config.attention_ratio)));
    up_.push_back(register_module("up" + std::to_string(i), up_stage(2 * prev + config.n_attrs, width(i), i == L)));
  }
}

std::vector<int64_t> DecoderImpl::attention_sizes() const {
  std::vector<int64_t> sizes;
  for (int64_t i = 2; i <= config_.levels; ++i) sizes.push_back(config_.scale_size(config_.levels - i + 1));
  return sizes;
}

torch::Tensor DecoderImpl::forward(const ContentFeatures& content, const torch::Tensor& style,
                                   const std::vector<torch::Tensor>& attention, DecoderOptions options) {
  const int64_t L = config_.levels;
  if (static_cast<int64_t>(content.scales.size()) != L) {
    throw Error(ErrorCode::ShapeMismatch, "content features must have one map per level");
  }
  if (static_cast<int64_t>(attention.size()) != L - 1) {
    throw Error(ErrorCode::ShapeMismatch, "decoder needs attention maps for stages 2..L");
  }
  if (style.dim() != 2 || style.size(1) != config_.style_dim || style.size(0) != content.deepest().size(0)) {
    throw Error(ErrorCode::ShapeMismatch, "style must be [B, style_dim]");
  }
  auto skip = [&](int64_t i) {
    const auto& c = content.scales[i - 1];
    return options.zero_skips ? torch::zeros_like(c) : c;
  };
  const auto& deepest = content.deepest();
  auto h0 = torch::cat({tile_style(style, deepest.size(2), deepest.size(3)), deepest}, 1);
  auto g = up_[0]->forward(h0);
  for (int64_t i = 2; i <= L; ++i) {
    const auto& attn = attention[i - 2];
    if (attn.dim() != 4 || attn.size(0) != g.size(0) || attn.size(1) != config_.n_attrs ||
        attn.size(2) != g.size(2) || attn.size(3) != g.size(3)) {
      throw Error(ErrorCode::ShapeMismatch, "attention map for stage " + std::to_string(i) + " has wrong shape");
    }
    auto c = skip(L - i + 1);
    auto h = fuse_[i - 2]->forward(torch::cat({tile_style(style, c.size(2), c.size(3)), c}, 1));
    auto gated = attention_[i - 2]->forward(torch::cat({g, attn}, 1)).refined;
    g = up_[i - 1]->forward(torch::cat({gated, h}, 1));
  }
  return g;
}

GeneratorImpl::GeneratorImpl(const ModelConfig& config) : config_(config) {
  config.validate();
  style_encoder = register_module("style_encoder", StyleEncoder(config));
  style_transformer = register_module("style_transformer", StyleTransformer(config));
  attribute_attention = register_module(
      "attribute_attention",
      AttributeAttention(config.n_attrs, config.n_embed, config.levels - 1, config.attention_ratio));
  content_encoder = register_module("content_encoder", ContentEncoder(config));
  decoder = register_module("decoder", Decoder(config));
  init_conv_weights(*this);
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& source, const torch::Tensor& refs,
                                       const torch::Tensor& alpha_a, const torch::Tensor& alpha_b,
                                       DecoderOptions options) {
  auto a = alpha_a.dim() == 1 ? alpha_a.unsqueeze(0) : alpha_a;
  auto b = alpha_b.dim() == 1 ? alpha_b.unsqueeze(0) : alpha_b;
  if (a.size(0) != source.size(0) || b.size(0) != source.size(0) || refs.size(0) != source.size(0)) {
    throw Error(ErrorCode::ShapeMismatch, "source, references and attributes disagree in batch size");
  }
  auto s_a = style_encoder(refs);
  auto s_b = style_transformer(s_a, b - a);
  auto maps = attribute_attention(a, b, decoder->attention_sizes());
  auto content = content_encoder(source);
  auto image = decoder->forward(content, s_b, maps, options);
  return {image, content.class_logits, s_b};
}

}  // namespace attr2font
