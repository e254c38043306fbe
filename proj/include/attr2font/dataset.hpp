#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "attr2font/attributes.hpp"
#include "attr2font/image.hpp"

namespace attr2font {

class PseudoAttributeStore;

enum class LabelStatus { Labeled, Unlabeled };

std::string_view to_string(LabelStatus s);

struct FontRecord {
  std::string font_id;
  torch::Tensor glyph_bytes;  // uint8 [N_c, H, W]
  LabelStatus status = LabelStatus::Unlabeled;
  std::optional<AttributeVector> attributes;  // present iff labeled
  int64_t pseudo_row = -1;                    // row in the pseudo-attribute store iff unlabeled

  int64_t n_chars() const { return glyph_bytes.size(0); }
  /// Float [H, W] glyph in [-1, 1].
  torch::Tensor glyph(int64_t k) const;
};

/// Reads `font_id,a1,...,aN` rows (raw 0..100) and rescales to [0, 1].
std::map<std::string, AttributeVector> load_attribute_annotations(const std::filesystem::path& path,
                                                                  std::size_t n_attrs = kDefaultAttributeCount);

/// UTF-8 string to code points.
std::u32string decode_utf8(const std::string& s);
std::string encode_utf8(const std::u32string& s);

/// Glyph images of every font plus attribute labels. Fonts are ordered by id;
/// unlabeled fonts get consecutive pseudo-attribute rows in that order.
class FontDataset {
 public:
  FontDataset() = default;
  FontDataset(std::u32string charset, int64_t resolution, std::vector<FontRecord> fonts,
              std::vector<std::string> validation_ids = {});

  /// Loads the canonical on-disk layout (images/, attributes.csv, charset.txt,
  /// optional validation.txt).
  static FontDataset load(const std::filesystem::path& root, std::size_t n_attrs = kDefaultAttributeCount);
  void save(const std::filesystem::path& root) const;

  const std::u32string& charset() const { return charset_; }
  int64_t n_chars() const { return static_cast<int64_t>(charset_.size()); }
  int64_t resolution() const { return resolution_; }
  int64_t size() const { return static_cast<int64_t>(fonts_.size()); }
  const FontRecord& font(int64_t i) const { return fonts_.at(static_cast<std::size_t>(i)); }
  const std::vector<FontRecord>& fonts() const { return fonts_; }
  std::optional<int64_t> index_of(const std::string& font_id) const;

  const std::vector<int64_t>& labeled() const { return labeled_; }
  const std::vector<int64_t>& unlabeled() const { return unlabeled_; }
  /// Held-out fonts for evaluation; the labeled fonts unless a list was given.
  std::vector<int64_t> validation() const;
  const std::vector<std::string>& validation_ids() const { return validation_ids_; }

  /// Attribute tensor [N_a] of a font: fixed for labeled fonts, a
  /// differentiable pseudo-store view for unlabeled fonts.
  torch::Tensor attribute_tensor(int64_t font, const PseudoAttributeStore* pseudo) const;
  AttributeVector attributes(int64_t font, const PseudoAttributeStore* pseudo) const;

 private:
  std::u32string charset_;
  int64_t resolution_ = 0;
  std::vector<FontRecord> fonts_;
  std::vector<std::string> validation_ids_;
  std::vector<int64_t> labeled_;
  std::vector<int64_t> unlabeled_;
  std::map<std::string, int64_t> index_;
};

/// Builds a dataset from a directory holding per-font image folders
/// (`<font_id>/<k>.png`) and/or TrueType files. Fonts missing from the
/// annotations are unlabeled.
FontDataset build_dataset(const std::filesystem::path& fonts_dir,
                          const std::optional<std::filesystem::path>& annotations, const std::string& charset,
                          int out_size = 64, int render_size = 128, std::size_t n_attrs = kDefaultAttributeCount);

/// Indices of one training instance.
struct PairDraw {
  int64_t source = 0;
  int64_t target = 0;
  int64_t k = 0;
  std::vector<int64_t> refs;
};

/// Source fonts are uniform over all fonts; target fonts come from the labeled
/// or unlabeled class with equal probability (labeled only when there are no
/// unlabeled fonts), uniform within the class. Style references are m distinct
/// character indices; they may include k.
class PairSampler {
 public:
  PairSampler(std::vector<int64_t> labeled, std::vector<int64_t> unlabeled, int64_t n_chars, int64_t m);
  explicit PairSampler(const FontDataset& dataset, int64_t m);

  PairDraw draw(std::mt19937_64& rng) const;
  bool is_labeled(int64_t font) const;

 private:
  std::vector<int64_t> labeled_;
  std::vector<int64_t> unlabeled_;
  std::vector<int64_t> all_;
  int64_t n_chars_;
  int64_t m_;
};

struct TransferSample {
  GlyphImage source;
  std::vector<GlyphImage> refs;
  GlyphImage target;
  int64_t source_font = 0;
  int64_t target_font = 0;
  AttributeVector source_attrs;
  AttributeVector target_attrs;
  LabelStatus source_status = LabelStatus::Labeled;
  LabelStatus target_status = LabelStatus::Labeled;
};

TransferSample materialize(const FontDataset& dataset, const PairDraw& draw, const PseudoAttributeStore* pseudo);

TransferSample sample_training_pair(std::mt19937_64& rng, const FontDataset& dataset, int64_t m,
                                    const PseudoAttributeStore* pseudo);

}  // namespace attr2font
