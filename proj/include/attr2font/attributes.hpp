#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace attr2font {

inline constexpr std::size_t kDefaultAttributeCount = 37;

/// Canonical attribute names, in the fixed order used by the model, the CLI
/// and the HTTP API. Loaded from resources/attribute_names.txt at build time.
const std::vector<std::string>& attribute_names();
int attribute_vocabulary_version();
std::optional<std::size_t> attribute_index(std::string_view name);

/// Continuous attribute values, each in [0, 1].
class AttributeVector {
 public:
  AttributeVector() = default;
  explicit AttributeVector(std::vector<float> values);

  static AttributeVector filled(std::size_t n, float value);
  static AttributeVector from_tensor(const torch::Tensor& t);

  std::size_t size() const noexcept { return values_.size(); }
  float operator[](std::size_t i) const { return values_[i]; }
  std::span<const float> values() const noexcept { return values_; }

  /// 1-D float32 tensor (copy).
  torch::Tensor to_tensor() const;

  bool operator==(const AttributeVector&) const = default;

 private:
  std::vector<float> values_;
};

/// Parses `{name: value, ...}` keyed by the canonical names. Every name must be
/// present, no extra names are allowed, and values must lie in [0, 1]; the
/// thrown BadAttributes error lists the offending names.
AttributeVector attributes_from_json(const nlohmann::json& j);
nlohmann::json attributes_to_json(const AttributeVector& a);

}  // namespace attr2font
