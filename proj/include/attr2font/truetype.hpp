#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "attr2font/image.hpp"

namespace attr2font {

struct OutlinePoint {
  double x = 0.0;
  double y = 0.0;
  bool on_curve = true;
};

using Contour = std::vector<OutlinePoint>;

/// Minimal reader for TrueType (glyf) outline fonts: cmap formats 4 and 12,
/// simple and composite glyphs. CFF-flavoured OpenType is rejected.
class TrueTypeFont {
 public:
  explicit TrueTypeFont(std::vector<uint8_t> data);
  static TrueTypeFont load(const std::filesystem::path& path);

  int units_per_em() const noexcept { return units_per_em_; }
  /// 0 when the font has no glyph for `codepoint`.
  uint32_t glyph_index(char32_t codepoint) const;
  /// Outline in font units (y up). Empty for blank glyphs such as space.
  std::vector<Contour> outline(uint32_t glyph) const;

 private:
  struct Table {
    uint32_t offset = 0;
    uint32_t length = 0;
  };

  uint8_t u8(std::size_t at) const;
  uint16_t u16(std::size_t at) const;
  int16_t i16(std::size_t at) const { return static_cast<int16_t>(u16(at)); }
  uint32_t u32(std::size_t at) const;
  Table table(const char* tag) const;
  uint32_t glyph_offset(uint32_t glyph, uint32_t* length) const;
  void append_outline(uint32_t glyph, const double (&xform)[6], int depth,
                      std::vector<Contour>& out) const;

  std::vector<uint8_t> data_;
  std::size_t base_ = 0;
  int units_per_em_ = 0;
  int index_to_loc_format_ = 0;
  uint32_t num_glyphs_ = 0;
  Table glyf_, loca_;
  std::size_t cmap_subtable_ = 0;
  uint16_t cmap_format_ = 0;
};

/// Anti-aliased nonzero-winding fill of `contours` (already in pixel space,
/// y down) into a [height, width] coverage tensor in [0, 1].
torch::Tensor rasterize(const std::vector<Contour>& contours, int64_t height, int64_t width,
                        int supersample = 4);

/// Area-weighted downscale of a [H, W] tensor to [out, out].
torch::Tensor area_resize(const torch::Tensor& image, int64_t out_h, int64_t out_w);

/// Renders `codepoint` at `render_size` pixels per em, centres its bounding box
/// on a render_size x render_size canvas, downsizes to out_size x out_size and
/// maps coverage to pixels (background +1, ink -1).
GlyphImage render_glyph(const TrueTypeFont& font, char32_t codepoint, int render_size, int out_size);
GlyphImage render_glyph(const std::filesystem::path& font_file, char32_t codepoint, int render_size,
                        int out_size);

}  // namespace attr2font
