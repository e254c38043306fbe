#include "attr2font/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "attr2font/error.hpp"

namespace attr2font {

std::string select_source_font(const std::vector<std::string>& labeled_ids,
                               const std::vector<AttributeVector>& labeled_attrs, const AttributeVector& target,
                               SourcePolicy policy, const std::string& fixed_id) {
  if (labeled_ids.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled fonts to choose a source from");
  if (policy == SourcePolicy::Fixed) {
    if (std::find(labeled_ids.begin(), labeled_ids.end(), fixed_id) == labeled_ids.end()) {
      throw Error(ErrorCode::UnknownFont, "source font '" + fixed_id + "' is not a labeled font");
    }
    return fixed_id;
  }
  if (labeled_attrs.size() != labeled_ids.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one attribute vector per labeled font is required");
  }
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < labeled_ids.size(); ++f) {
    const auto& a = labeled_attrs[f];
    if (a.size() != target.size()) throw Error(ErrorCode::ShapeMismatch, "attribute vectors differ in length");
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = static_cast<double>(a[i]) - target[i];
      d += diff * diff;
    }
    if (d < best_d || (d == best_d && labeled_ids[f] < best)) {
      best_d = d;
      best = labeled_ids[f];
    }
  }
  return best;
}

AttributeVector interpolate_attributes(const AttributeVector& a, const AttributeVector& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::LambdaOutOfRange, fmt::format("interpolation coefficient {} outside [0, 1]", lambda));
  }
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "attribute vectors differ in length");
  const auto l = static_cast<float>(lambda);
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float v = (1.0f - l) * a[i] + l * b[i];
    out[i] = std::clamp(v, std::min(a[i], b[i]), std::max(a[i], b[i]));
  }
  return AttributeVector(std::move(out));
}

AttributeVector edit_attribute(const AttributeVector& a, std::size_t i, double v) {
  if (i >= a.size()) throw Error(ErrorCode::IndexOutOfRange, fmt::format("attribute index {} out of range", i));
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::ValueOutOfRange, fmt::format("value {} outside [0, 1]", v));
  std::vector<float> out(a.values().begin(), a.values().end());
  out[i] = static_cast<float>(v);
  return AttributeVector(std::move(out));
}

AttributeVector random_attributes(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> out(n);
  for (auto& v : out) v = u(rng);
  return AttributeVector(std::move(out));
}

std::vector<double> interpolation_grid(int64_t steps) {
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "interpolation needs at least 2 steps");
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int64_t j = 0; j < steps; ++j) out[j] = static_cast<double>(j) / static_cast<double>(steps - 1);
  return out;
}

std::vector<int64_t> inference_style_refs(int64_t k, int64_t n_chars, int64_t m) {
  std::vector<int64_t> out;
  for (int64_t i = 0; i < n_chars && static_cast<int64_t>(out.size()) < m; ++i) {
    if (i != k) out.push_back(i);
  }
  // Tiny charsets: fall back to k itself to reach m references.
  for (int64_t i = 0; static_cast<int64_t>(out.size()) < m && i < n_chars; ++i) out.push_back(i);
  if (static_cast<int64_t>(out.size()) != m) {
    throw Error(ErrorCode::WrongRefCount, fmt::format("cannot pick {} references from {} characters", m, n_chars));
  }
  return out;
}

InferenceEngine::InferenceEngine(const ModelState& state, const FontDataset& dataset)
    : state_(state), dataset_(dataset) {
  std::vector<std::string> ids;
  for (const auto& f : dataset.fonts()) ids.push_back(f.font_id);
  if (ids != state.dataset.font_ids) {
    throw Error(ErrorCode::ConfigMismatch, "dataset fonts differ from those the checkpoint was trained on");
  }
  if (dataset.n_chars() != state.model_config.n_chars || dataset.resolution() != state.model_config.resolution) {
    throw Error(ErrorCode::ConfigMismatch, "dataset does not match the model configuration");
  }
}

AttributeVector InferenceEngine::font_attributes(int64_t font) const {
  return dataset_.attributes(font, &state_.pseudo);
}

int64_t InferenceEngine::font_index(const std::string& font_id) const {
  auto i = dataset_.index_of(font_id);
  if (!i) throw Error(ErrorCode::UnknownFont, "unknown font '" + font_id + "'");
  return *i;
}

std::string InferenceEngine::default_source_font() const {
  if (!state_.dataset.default_source_font.empty()) return state_.dataset.default_source_font;
  return dataset_.font(dataset_.labeled().at(0)).font_id;
}

std::string InferenceEngine::select_source(const AttributeVector& target, SourcePolicy policy,
                                           const std::optional<std::string>& fixed_id) const {
  std::vector<std::string> ids;
  std::vector<AttributeVector> attrs;
  for (int64_t i : dataset_.labeled()) {
    ids.push_back(dataset_.font(i).font_id);
    attrs.push_back(*dataset_.font(i).attributes);
  }
  return select_source_font(ids, attrs, target, policy, fixed_id.value_or(default_source_font()));
}

torch::Tensor InferenceEngine::synthesize_char(int64_t source_font, int64_t k, const AttributeVector& target) const {
  if (static_cast<int64_t>(target.size()) != state_.model_config.n_attrs) {
    throw Error(ErrorCode::ShapeMismatch, "target attribute vector has the wrong length");
  }
  const auto& src = dataset_.font(source_font);
  const auto refs_idx = inference_style_refs(k, dataset_.n_chars(), state_.model_config.m);
  std::vector<torch::Tensor> refs;
  for (int64_t r : refs_idx) refs.push_back(src.glyph(r));
  torch::NoGradGuard guard;
  auto alpha_a = font_attributes(source_font).to_tensor().unsqueeze(0);
  auto alpha_b = target.to_tensor().unsqueeze(0);
  auto generator = state_.generator;
  auto out = generator->forward(src.glyph(k).unsqueeze(0).unsqueeze(0), torch::stack(refs).unsqueeze(0),
                                       alpha_a, alpha_b);
  return out.image[0][0].contiguous();
}

std::vector<torch::Tensor> InferenceEngine::synthesize_charset(int64_t source_font, const AttributeVector& target,
                                                               const std::vector<int64_t>& chars) const {
  std::vector<torch::Tensor> out;
  if (chars.empty()) {
    for (int64_t k = 0; k < dataset_.n_chars(); ++k) out.push_back(synthesize_char(source_font, k, target));
  } else {
    for (int64_t k : chars) {
      if (k < 0 || k >= dataset_.n_chars()) throw Error(ErrorCode::IndexOutOfRange, "character outside the charset");
      out.push_back(synthesize_char(source_font, k, target));
    }
  }
  return out;
}

torch::Tensor InferenceEngine::synthesize_batch(int64_t source_font, const AttributeVector& target) const {
  const auto& src = dataset_.font(source_font);
  const int64_t n = dataset_.n_chars();
  std::vector<torch::Tensor> sources, refs;
  for (int64_t k = 0; k < n; ++k) {
    sources.push_back(src.glyph(k));
    std::vector<torch::Tensor> r;
    for (int64_t i : inference_style_refs(k, n, state_.model_config.m)) r.push_back(src.glyph(i));
    refs.push_back(torch::stack(r));
  }
  torch::NoGradGuard guard;
  auto alpha_a = font_attributes(source_font).to_tensor().unsqueeze(0).expand({n, -1});
  auto alpha_b = target.to_tensor().unsqueeze(0).expand({n, -1});
  auto generator = state_.generator;
  auto out = generator->forward(torch::stack(sources).unsqueeze(1), torch::stack(refs), alpha_a, alpha_b);
  return out.image.squeeze(1);
}

}  // namespace attr2font
