#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "attr2font/config.hpp"
#include "attr2font/dataset.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Stroke-skeleton glyphs: each character is a set of line segments rendered
/// with a font-specific stroke width and slant, anti-aliased by supersampling.
struct StrokeStyle {
  double thickness = 3.0;  // pixels at 64 px resolution, scaled with resolution
  double slant = 0.0;      // horizontal shear per unit height
};
inline constexpr const char* kFixtureCharset = "AEFHILNTVZ";
torch::Tensor stroke_glyph(int char_index, const StrokeStyle& style, int64_t resolution);

struct FixtureFont {
  std::string id;
  StrokeStyle style;
  bool labeled = true;
  float attribute_level = 0.5f;  // labeled fonts: base value of the attribute vector
};

/// Writes the canonical dataset layout (images/, attributes.csv, charset.txt).
void write_fixture(const fs::path& root, const std::vector<FixtureFont>& fonts, int64_t resolution,
                   int64_t n_chars = 10);

/// Two labeled fonts x 10 characters at 64 px.
std::vector<FixtureFont> desk_fonts();
/// Two labeled fonts and one unlabeled font.
std::vector<FixtureFont> semi_supervised_fonts();

/// Attribute vector of a fixture font: deterministic pattern around `level`.
std::vector<float> fixture_attributes(float level, std::size_t n = 37);

/// Small architecture for fast mechanics tests (32 px, 10 characters).
attr2font::ModelConfig tiny_config();
/// Architecture used by the desk-scale overfit run (64 px, 10 characters).
attr2font::ModelConfig desk_config();

/// Norm-wise relative error between analytic and central-difference gradients
/// of `f` with respect to `x` (double precision, every entry perturbed).
double gradient_error(const std::function<torch::Tensor()>& f, torch::Tensor x, double h = 1e-6);

}  // namespace testing_support
