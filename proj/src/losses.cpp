#include "attr2font/losses.hpp"

#include <cmath>

#include <fmt/format.h>

#include "attr2font/error.hpp"

namespace F = torch::nn::functional;

namespace attr2font {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": operands differ in shape");
}

torch::Tensor as_image_batch(const torch::Tensor& x) {
  if (x.dim() == 2) return x.unsqueeze(0).unsqueeze(0);
  if (x.dim() == 3) return x.unsqueeze(1);
  if (x.dim() == 4 && x.size(1) == 1) return x;
  throw Error(ErrorCode::ShapeMismatch, "expected [H, W], [B, H, W] or [B, 1, H, W] images");
}

torch::Tensor safe_log(const torch::Tensor& p) { return torch::log(p.clamp(kProbEps, 1.0 - kProbEps)); }

}  // namespace

torch::Tensor pixel_loss(const torch::Tensor& x_hat, const torch::Tensor& x) {
  require_same_shape(x_hat, x, "pixel_loss");
  return (x_hat - x).abs().mean();
}

torch::Tensor char_loss(const torch::Tensor& logits, const torch::Tensor& targets) {
  auto z = logits.dim() == 1 ? logits.unsqueeze(0) : logits;
  auto t = targets.dim() == 0 ? targets.unsqueeze(0) : targets;
  if (z.dim() != 2 || t.dim() != 1 || t.size(0) != z.size(0)) {
    throw Error(ErrorCode::ShapeMismatch, "char_loss expects logits [B, N_c] and targets [B]");
  }
  if (t.numel() > 0 && (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() >= z.size(1))) {
    throw Error(ErrorCode::IndexOutOfRange, "character index outside the charset");
  }
  return -torch::log_softmax(z, 1).gather(1, t.to(torch::kInt64).unsqueeze(1)).mean();
}

torch::Tensor char_loss(const torch::Tensor& logits, int64_t k) {
  return char_loss(logits, torch::tensor(std::vector<int64_t>{k}));
}

torch::Tensor smooth_l1(const torch::Tensor& d) {
  auto a = d.abs();
  return torch::where(a <= 1.0, 0.5 * d * d, a - 0.5).mean();
}

torch::Tensor attr_loss(const torch::Tensor& predicted, const torch::Tensor& target) {
  require_same_shape(predicted, target, "attr_loss");
  return smooth_l1(predicted - target);
}

torch::Tensor extract_patches(const torch::Tensor& images, const ContextualOptions& options) {
  auto x = as_image_batch(images);
  auto cols = F::unfold(x, F::UnfoldFuncOptions({options.patch, options.patch}).stride(options.stride));
  return cols.transpose(1, 2);  // [B, N, P]
}

torch::Tensor contextual_loss_features(const torch::Tensor& x_hat_features, const torch::Tensor& x_features,
                                       const ContextualOptions& options) {
  if (x_hat_features.dim() != 2 || x_features.dim() != 2 || x_hat_features.size(1) != x_features.size(1)) {
    throw Error(ErrorCode::ShapeMismatch, "contextual loss expects feature sets [N, P] and [M, P]");
  }
  auto mu = x_features.mean(0, /*keepdim=*/true);
  auto y = x_features - mu;
  // All target patches identical: nothing to match against.
  if (y.abs().max().item<double>() == 0.0) return torch::zeros({}, x_hat_features.options());
  auto xh = x_hat_features - mu;
  auto nx = F::normalize(xh, F::NormalizeFuncOptions().dim(1));
  auto ny = F::normalize(y, F::NormalizeFuncOptions().dim(1));
  auto d = 1.0 - torch::matmul(nx, ny.transpose(0, 1));  // [N, M]
  auto d_min = std::get<0>(d.min(1, /*keepdim=*/true));
  auto d_tilde = d / (d_min + options.eps);
  auto w = torch::exp((1.0 - d_tilde) / options.bandwidth);
  auto cx = w / w.sum(1, /*keepdim=*/true);
  auto best = std::get<0>(cx.max(0));  // over generated patches, per target patch
  return -torch::log(best.mean());
}

torch::Tensor contextual_loss(const torch::Tensor& x_hat, const torch::Tensor& x, const ContextualOptions& options) {
  auto a = as_image_batch(x_hat), b = as_image_batch(x);
  require_same_shape(a, b, "contextual_loss");
  auto pa = extract_patches(a, options), pb = extract_patches(b, options);
  std::vector<torch::Tensor> per_image;
  for (int64_t i = 0; i < a.size(0); ++i) per_image.push_back(contextual_loss_features(pa[i], pb[i], options));
  return torch::stack(per_image).mean();
}

torch::Tensor adversarial_generator_loss(const torch::Tensor& p_real_on_fake) {
  return -safe_log(p_real_on_fake).mean();
}

torch::Tensor generator_objective(const GeneratorLossParts& parts, const LossWeights& w) {
  return w.adversarial * parts.adversarial + w.pixel * parts.pixel + w.character * parts.character +
         w.contextual * parts.contextual + w.attribute * parts.attribute;
}

DiscriminatorLossParts discriminator_objective(const torch::Tensor& p_real_on_real,
                                               const torch::Tensor& p_real_on_fake,
                                               const torch::Tensor& attr_pred_real,
                                               const torch::Tensor& alpha_b) {
  DiscriminatorLossParts out;
  out.adversarial = -safe_log(p_real_on_real).mean() - torch::log1p(-p_real_on_fake.clamp(kProbEps, 1.0 - kProbEps)).mean();
  out.attribute = attr_loss(attr_pred_real, alpha_b);
  out.total = out.adversarial + out.attribute;
  return out;
}

bool LossRecord::all_finite() const {
  for (double v : {l_G, l_pixel, l_char, l_CX, l_attr, l_D, l_attr_D}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string LossRecord::csv_header() { return "step,l_G,l_pixel,l_char,l_CX,l_attr,l_D,l'_attr"; }

std::string LossRecord::csv_row() const {
  return fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", step, l_G, l_pixel, l_char, l_CX, l_attr,
                     l_D, l_attr_D);
}

}  // namespace attr2font
