#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "attr2font/attributes.hpp"
#include "attr2font/dataset.hpp"
#include "attr2font/model_state.hpp"

namespace attr2font {

enum class SourcePolicy { Fixed, Nearest };

/// Fixed: `fixed_id` (must exist). Nearest: the labeled font whose attribute
/// vector is closest in L2, ties broken by the lexicographically smallest id.
std::string select_source_font(const std::vector<std::string>& labeled_ids,
                               const std::vector<AttributeVector>& labeled_attrs, const AttributeVector& target,
                               SourcePolicy policy, const std::string& fixed_id = {});

/// (1 - lambda) * a + lambda * b, componentwise clamped to [min(a, b), max(a, b)].
AttributeVector interpolate_attributes(const AttributeVector& a, const AttributeVector& b, double lambda);

/// Copy of `a` with component i replaced by v.
AttributeVector edit_attribute(const AttributeVector& a, std::size_t i, double v);

/// i.i.d. uniform [0, 1] components.
AttributeVector random_attributes(std::mt19937_64& rng, std::size_t n = kDefaultAttributeCount);

/// lambda_j = j / (steps - 1), j = 0..steps-1.
std::vector<double> interpolation_grid(int64_t steps);

/// The first m character indices different from k.
std::vector<int64_t> inference_style_refs(int64_t k, int64_t n_chars, int64_t m);

/// Read-only synthesis over a loaded model and the dataset it was trained on.
class InferenceEngine {
 public:
  InferenceEngine(const ModelState& state, const FontDataset& dataset);

  const FontDataset& dataset() const { return dataset_; }
  const ModelState& state() const { return state_; }

  AttributeVector font_attributes(int64_t font) const;
  int64_t font_index(const std::string& font_id) const;
  std::string default_source_font() const;

  std::string select_source(const AttributeVector& target, SourcePolicy policy,
                            const std::optional<std::string>& fixed_id = std::nullopt) const;

  /// One glyph [H, W]; each call is an independent batch-1 forward pass, so
  /// results do not depend on how requests are grouped.
  torch::Tensor synthesize_char(int64_t source_font, int64_t k, const AttributeVector& target) const;
  /// Glyphs for `chars` (all characters when empty), in the given order.
  std::vector<torch::Tensor> synthesize_charset(int64_t source_font, const AttributeVector& target,
                                                const std::vector<int64_t>& chars = {}) const;
  /// Whole charset in one batch; faster, used by the studies.
  torch::Tensor synthesize_batch(int64_t source_font, const AttributeVector& target) const;

 private:
  const ModelState& state_;
  const FontDataset& dataset_;
};

}  // namespace attr2font
