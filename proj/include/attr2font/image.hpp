#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace attr2font {

/// Ink convention used everywhere: background = +1, ink = -1.
inline constexpr float kBackground = 1.0f;
inline constexpr float kInk = -1.0f;

/// One character of one font. `pixels` is a float32 [H, W] tensor in [-1, 1].
struct GlyphImage {
  torch::Tensor pixels;
  int char_index = 0;
  std::string font_id;

  int64_t height() const { return pixels.size(0); }
  int64_t width() const { return pixels.size(1); }
};

/// 8-bit grayscale <-> [-1, 1]: 255 maps to +1 (background), 0 to -1 (ink).
torch::Tensor bytes_to_pixels(const std::vector<uint8_t>& bytes, int64_t height, int64_t width);
std::vector<uint8_t> pixels_to_bytes(const torch::Tensor& pixels);

torch::Tensor read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const torch::Tensor& pixels);
std::vector<uint8_t> encode_png_gray(const torch::Tensor& pixels);
torch::Tensor decode_png_gray(const std::vector<uint8_t>& png);

/// Tiles [H, W] images row-major into one image with `pad` background pixels
/// between tiles.
torch::Tensor make_grid(const std::vector<torch::Tensor>& tiles, int64_t columns, int64_t pad = 2);

std::string base64_encode(const std::vector<uint8_t>& data);

}  // namespace attr2font
