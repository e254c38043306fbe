#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "attr2font/attributes.hpp"

namespace attr2font {

/// Learnable attribute values for unlabeled fonts, stored as logits and
/// exposed through a sigmoid so the values can never leave (0, 1).
///
/// Updates use a row-sparse Adam: only rows that took part in the current
/// batch are advanced, each with its own step counter, so a batch without
/// unlabeled fonts leaves the whole store bit-identical.
class PseudoAttributeStore {
 public:
  /// Logits are clamped to +-kLogitLimit before the sigmoid; in float32 the
  /// view then stays strictly inside (0, 1).
  static constexpr double kLogitLimit = 15.0;

  PseudoAttributeStore() : PseudoAttributeStore(0, 0) {}
  PseudoAttributeStore(int64_t rows, int64_t n_attrs);

  /// z ~ N(0, 1) per entry.
  static PseudoAttributeStore initialize(std::mt19937_64& rng, int64_t rows, int64_t n_attrs);

  int64_t rows() const { return logits_.size(0); }
  int64_t n_attrs() const { return logits_.size(1); }

  /// Differentiable [N_a] view of one row.
  torch::Tensor view(int64_t row) const;
  /// Detached [rows, N_a] values.
  torch::Tensor values() const;
  AttributeVector attributes(int64_t row) const;

  torch::Tensor& logits() { return logits_; }
  const torch::Tensor& logits() const { return logits_; }

  void zero_grad();
  void step(const std::vector<int64_t>& rows, double lr, double beta1, double beta2, double eps = 1e-8);

  // Optimizer state, exposed for checkpointing.
  torch::Tensor& exp_avg() { return exp_avg_; }
  torch::Tensor& exp_avg_sq() { return exp_avg_sq_; }
  torch::Tensor& steps() { return steps_; }
  const torch::Tensor& exp_avg() const { return exp_avg_; }
  const torch::Tensor& exp_avg_sq() const { return exp_avg_sq_; }
  const torch::Tensor& steps() const { return steps_; }

 private:
  torch::Tensor logits_;
  torch::Tensor exp_avg_;
  torch::Tensor exp_avg_sq_;
  torch::Tensor steps_;  // int64 [rows]
};

}  // namespace attr2font
