#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "attr2font/config.hpp"

namespace attr2font {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before logs.
inline constexpr double kProbEps = 1e-7;

/// Contextual-loss parameters: square patches of `patch` pixels sampled every
/// `stride` pixels, bandwidth h and the distance-normalization epsilon.
struct ContextualOptions {
  int64_t patch = 5;
  int64_t stride = 2;
  double bandwidth = 0.5;
  double eps = 1e-5;
};

/// Mean |x_hat - x|.
torch::Tensor pixel_loss(const torch::Tensor& x_hat, const torch::Tensor& x);

/// Mean over the batch of -log softmax(logits)[k]. logits: [B, N_c] or [N_c];
/// targets: int64 [B] (or a scalar for a single row).
torch::Tensor char_loss(const torch::Tensor& logits, const torch::Tensor& targets);
torch::Tensor char_loss(const torch::Tensor& logits, int64_t k);

/// Elementwise 0.5 d^2 for |d| <= 1, |d| - 0.5 otherwise; mean-reduced.
torch::Tensor smooth_l1(const torch::Tensor& d);

/// smooth_l1(predicted - target).
torch::Tensor attr_loss(const torch::Tensor& predicted, const torch::Tensor& target);

/// Extracts patch features: [B, N, P] from images [B, 1, H, W] or [H, W].
torch::Tensor extract_patches(const torch::Tensor& images, const ContextualOptions& options = {});

/// Contextual loss between a generated and a target batch of glyphs, averaged
/// over the batch. Patches of both images are centred on the target's mean
/// patch. A target whose patches are all identical contributes 0.
torch::Tensor contextual_loss(const torch::Tensor& x_hat, const torch::Tensor& x,
                              const ContextualOptions& options = {});

/// The same loss on explicit feature sets: x_hat_features [N, P], x_features [M, P].
torch::Tensor contextual_loss_features(const torch::Tensor& x_hat_features, const torch::Tensor& x_features,
                                       const ContextualOptions& options = {});

/// -mean log p(real) evaluated on generated images.
torch::Tensor adversarial_generator_loss(const torch::Tensor& p_real_on_fake);

struct GeneratorLossParts {
  torch::Tensor adversarial;
  torch::Tensor pixel;
  torch::Tensor character;
  torch::Tensor contextual;
  torch::Tensor attribute;
};

torch::Tensor generator_objective(const GeneratorLossParts& parts, const LossWeights& weights);

struct DiscriminatorLossParts {
  torch::Tensor adversarial;  // -log p(real | x) - log(1 - p(real | x_hat))
  torch::Tensor attribute;    // smooth_l1(attr_pred(x) - alpha_b)
  torch::Tensor total;
};

DiscriminatorLossParts discriminator_objective(const torch::Tensor& p_real_on_real,
                                               const torch::Tensor& p_real_on_fake,
                                               const torch::Tensor& attr_pred_real,
                                               const torch::Tensor& alpha_b);

/// One row of losses.csv.
struct LossRecord {
  int64_t step = 0;
  double l_G = 0, l_pixel = 0, l_char = 0, l_CX = 0, l_attr = 0, l_D = 0, l_attr_D = 0;

  bool all_finite() const;
  static std::string csv_header();
  std::string csv_row() const;
  bool operator==(const LossRecord&) const = default;
};

}  // namespace attr2font
