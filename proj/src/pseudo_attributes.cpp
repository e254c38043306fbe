#include "attr2font/pseudo_attributes.hpp"

#include <algorithm>
#include <cmath>

#include "attr2font/error.hpp"

namespace attr2font {

PseudoAttributeStore::PseudoAttributeStore(int64_t rows, int64_t n_attrs) {
  logits_ = torch::zeros({rows, n_attrs}, torch::kFloat32).set_requires_grad(true);
  exp_avg_ = torch::zeros({rows, n_attrs}, torch::kFloat32);
  exp_avg_sq_ = torch::zeros({rows, n_attrs}, torch::kFloat32);
  steps_ = torch::zeros({rows}, torch::kInt64);
}

PseudoAttributeStore PseudoAttributeStore::initialize(std::mt19937_64& rng, int64_t rows, int64_t n_attrs) {
  PseudoAttributeStore store(rows, n_attrs);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  torch::NoGradGuard guard;
  float* p = store.logits_.data_ptr<float>();
  for (int64_t i = 0; i < rows * n_attrs; ++i) p[i] = normal(rng);
  return store;
}

torch::Tensor PseudoAttributeStore::view(int64_t row) const {
  if (row < 0 || row >= rows()) throw Error(ErrorCode::IndexOutOfRange, "pseudo-attribute row out of range");
  return torch::sigmoid(logits_[row].clamp(-kLogitLimit, kLogitLimit));
}

torch::Tensor PseudoAttributeStore::values() const {
  torch::NoGradGuard guard;
  return torch::sigmoid(logits_.detach().clamp(-kLogitLimit, kLogitLimit));
}

AttributeVector PseudoAttributeStore::attributes(int64_t row) const {
  torch::NoGradGuard guard;
  return AttributeVector::from_tensor(view(row));
}

void PseudoAttributeStore::zero_grad() {
  if (logits_.grad().defined()) logits_.mutable_grad().zero_();
}

void PseudoAttributeStore::step(const std::vector<int64_t>& rows, double lr, double beta1, double beta2,
                                double eps) {
  if (!logits_.grad().defined() || rows.empty()) return;
  torch::NoGradGuard guard;
  std::vector<int64_t> unique(rows);
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  auto grad = logits_.grad();
  auto steps = steps_.accessor<int64_t, 1>();
  for (int64_t r : unique) {
    if (r < 0 || r >= this->rows()) throw Error(ErrorCode::IndexOutOfRange, "pseudo-attribute row out of range");
    const int64_t t = ++steps[r];
    auto g = grad[r];
    auto m = exp_avg_[r];
    auto v = exp_avg_sq_[r];
    m.mul_(beta1).add_(g, 1.0 - beta1);
    v.mul_(beta2).addcmul_(g, g, 1.0 - beta2);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto denom = (v / bc2).sqrt_().add_(eps);
    auto row = logits_[r];
    row.addcdiv_(m, denom, -lr / bc1);
    row.clamp_(-kLogitLimit, kLogitLimit);
  }
}

}  // namespace attr2font
