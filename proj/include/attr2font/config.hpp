#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace attr2font {

/// Architecture hyper-parameters. Defaults reproduce the full-size model;
/// tests shrink widths and resolution.
struct ModelConfig {
  int64_t n_attrs = 37;         // attribute count
  int64_t n_embed = 64;         // attribute embedding dimension
  int64_t n_chars = 52;         // charset size (classifier classes)
  int64_t resolution = 64;      // glyph side length
  int64_t m = 4;                // style reference glyphs
  int64_t levels = 5;           // encoder/decoder scales
  int64_t n_res_blocks = 16;    // residual blocks in the style transformer
  int64_t style_dim = 256;      // style feature size
  int64_t base_channels = 64;   // content encoder / decoder width at the finest scale
  int64_t max_channels = 512;
  int64_t style_base_channels = 32;
  int64_t disc_layers = 4;      // stride-2 convolutions in the discriminator trunk
  int64_t disc_base_channels = 64;
  int64_t attention_ratio = 8;  // channel-attention squeeze ratio

  /// Channel width of content scale i (1-based, i in [1, levels]).
  int64_t content_channels(int64_t i) const;
  /// Spatial side length of content scale i.
  int64_t scale_size(int64_t i) const { return resolution >> i; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double adversarial = 5.0;  // lambda1
  double pixel = 50.0;       // lambda2
  double character = 5.0;    // lambda3
  double contextual = 5.0;   // lambda4
  double attribute = 20.0;   // lambda5

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int64_t batch_size = 16;
  int64_t epochs = 1;
  uint64_t seed = 0;
  LossWeights lambdas;
  int64_t checkpoint_every = 1;  // epochs between checkpoints

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Parses "5,50,5,5,20".
LossWeights parse_loss_weights(const std::string& csv);

}  // namespace attr2font
