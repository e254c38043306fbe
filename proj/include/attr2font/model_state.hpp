#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "attr2font/config.hpp"
#include "attr2font/dataset.hpp"
#include "attr2font/discriminator.hpp"
#include "attr2font/generator.hpp"
#include "attr2font/pseudo_attributes.hpp"

namespace attr2font {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

/// What a checkpoint remembers about the dataset it was trained on.
struct DatasetInfo {
  std::string data_dir;
  std::string charset;  // UTF-8
  std::vector<std::string> font_ids;
  std::vector<std::string> labeled_ids;
  std::string default_source_font;

  static DatasetInfo from(const FontDataset& dataset, const std::string& data_dir);
  bool operator==(const DatasetInfo&) const = default;
};

/// Every learnable parameter group, optimizer moments, counters and the
/// configuration snapshot.
class ModelState {
 public:
  /// Fresh model. Parameters are drawn from torch's generator seeded with
  /// `train.seed`; pseudo-attributes from a separate mt19937_64 stream.
  ModelState(const ModelConfig& model, const TrainConfig& train, DatasetInfo info, int64_t n_unlabeled);

  ModelConfig model_config;
  TrainConfig train_config;
  DatasetInfo dataset;

  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  PseudoAttributeStore pseudo;
  std::unique_ptr<torch::optim::Adam> generator_optimizer;
  std::unique_ptr<torch::optim::Adam> discriminator_optimizer;
  /// Fixed attribute vectors of labeled fonts, aligned with dataset.labeled_ids.
  std::vector<AttributeVector> labeled_attributes;

  int64_t epoch = 0;
  int64_t step = 0;
  std::mt19937_64 rng;

  void rebuild_optimizers();
  void set_train_config(const TrainConfig& train);
};

/// Fresh state for training on `dataset`.
std::unique_ptr<ModelState> make_model_state(const FontDataset& dataset, const std::string& data_dir,
                                             const ModelConfig& model, const TrainConfig& train);

/// Binary checkpoint: magic, format version, fixed header of the structural
/// dimensions, a JSON metadata blob and named raw tensors. Writes are atomic.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
std::unique_ptr<ModelState> load_checkpoint(const std::filesystem::path& path);
/// Rejects checkpoints whose structural dimensions differ from `expected`.
std::unique_ptr<ModelState> load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// 64-bit FNV-1a over the raw file bytes.
uint64_t file_fingerprint(const std::filesystem::path& path);

}  // namespace attr2font
