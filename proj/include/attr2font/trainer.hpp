#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "attr2font/dataset.hpp"
#include "attr2font/losses.hpp"
#include "attr2font/model_state.hpp"

namespace attr2font {

/// z ~ N(0, 1) logits for every unlabeled font.
PseudoAttributeStore init_pseudo_attributes(std::mt19937_64& rng, int64_t n_unlabeled, int64_t n_attrs);

/// N_f * N_c / N_bs, at least one.
int64_t steps_per_epoch(int64_t n_fonts, int64_t n_chars, int64_t batch_size);

/// Stacked tensors of one batch. Attribute rows of unlabeled fonts stay
/// differentiable views onto the pseudo-attribute store.
struct Batch {
  torch::Tensor source;   // [B, 1, H, W]
  torch::Tensor refs;     // [B, m, H, W]
  torch::Tensor target;   // [B, 1, H, W]
  torch::Tensor chars;    // int64 [B]
  torch::Tensor alpha_a;  // [B, N_a]
  torch::Tensor alpha_b;  // [B, N_a]
  std::vector<int64_t> pseudo_rows;  // pseudo-store rows touched by this batch
};

Batch collate(const FontDataset& dataset, const std::vector<PairDraw>& draws, const PseudoAttributeStore& pseudo);

class Trainer {
 public:
  Trainer(ModelState& state, const FontDataset& dataset);

  std::vector<PairDraw> next_draws();
  /// One discriminator update followed by one generator update. Throws
  /// NonFiniteLoss (after writing a diagnostic dump when a directory is set).
  LossRecord train_step(const std::vector<PairDraw>& draws);

  struct Options {
    std::filesystem::path out_dir;  // losses.csv, checkpoints, diagnostics
    bool write_checkpoints = true;
    std::function<void(const LossRecord&)> on_step;
  };
  /// Runs until state.epoch reaches train_config.epochs, appending to losses.csv.
  void train(const Options& options);

  void set_diagnostics_dir(std::filesystem::path dir) { diagnostics_dir_ = std::move(dir); }

 private:
  [[noreturn]] void fail_non_finite(const LossRecord& record, const std::vector<PairDraw>& draws, const char* phase);

  ModelState& state_;
  const FontDataset& dataset_;
  PairSampler sampler_;
  std::optional<std::filesystem::path> diagnostics_dir_;
};

}  // namespace attr2font
