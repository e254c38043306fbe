#include "attr2font/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "attr2font/error.hpp"

namespace attr2font {

torch::Tensor bytes_to_pixels(const std::vector<uint8_t>& bytes, int64_t height, int64_t width) {
  if (static_cast<int64_t>(bytes.size()) != height * width) {
    throw Error(ErrorCode::ShapeMismatch, "byte buffer does not match image size");
  }
  auto out = torch::empty({height, width}, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (std::size_t i = 0; i < bytes.size(); ++i) p[i] = static_cast<float>(bytes[i]) / 127.5f - 1.0f;
  return out;
}

std::vector<uint8_t> pixels_to_bytes(const torch::Tensor& pixels) {
  auto t = pixels.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const float* p = t.data_ptr<float>();
  std::vector<uint8_t> out(static_cast<std::size_t>(t.numel()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    float v = std::clamp(p[i], -1.0f, 1.0f);
    out[i] = static_cast<uint8_t>(std::lround((v + 1.0f) * 127.5f));
  }
  return out;
}

namespace {

torch::Tensor finish_read(png_image& image) {
  image.format = PNG_FORMAT_GRAY;
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::UnreadableImage, msg);
  }
  return bytes_to_pixels(buffer, image.height, image.width);
}

png_image gray_image(const torch::Tensor& pixels) {
  if (pixels.dim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a [H, W] image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.size(1));
  image.height = static_cast<png_uint_32>(pixels.size(0));
  image.format = PNG_FORMAT_GRAY;
  return image;
}

}  // namespace

torch::Tensor read_png_gray(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::UnreadableImage, path.string() + ": " + image.message);
  }
  return finish_read(image);
}

torch::Tensor decode_png_gray(const std::vector<uint8_t>& png) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, png.data(), png.size())) {
    throw Error(ErrorCode::UnreadableImage, image.message);
  }
  return finish_read(image);
}

std::vector<uint8_t> encode_png_gray(const torch::Tensor& pixels) {
  png_image image = gray_image(pixels);
  auto bytes = pixels_to_bytes(pixels);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, image.message);
  }
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, image.message);
  }
  out.resize(size);
  return out;
}

void write_png_gray(const std::filesystem::path& path, const torch::Tensor& pixels) {
  auto png = encode_png_gray(pixels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

torch::Tensor make_grid(const std::vector<torch::Tensor>& tiles, int64_t columns, int64_t pad) {
  if (tiles.empty()) throw Error(ErrorCode::ZeroSize, "no tiles");
  columns = std::max<int64_t>(1, std::min<int64_t>(columns, static_cast<int64_t>(tiles.size())));
  const int64_t th = tiles.front().size(0), tw = tiles.front().size(1);
  const int64_t rows = (static_cast<int64_t>(tiles.size()) + columns - 1) / columns;
  auto grid = torch::full({rows * th + (rows + 1) * pad, columns * tw + (columns + 1) * pad},
                          kBackground, torch::kFloat32);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int64_t r = static_cast<int64_t>(i) / columns, c = static_cast<int64_t>(i) % columns;
    const int64_t y = pad + r * (th + pad), x = pad + c * (tw + pad);
    grid.slice(0, y, y + th).slice(1, x, x + tw).copy_(tiles[i].detach().to(torch::kFloat32));
  }
  return grid;
}

std::string base64_encode(const std::vector<uint8_t>& data) {
  static constexpr char kTable[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    uint32_t v = (uint32_t{data[i]} << 16) | (uint32_t{data[i + 1]} << 8) | data[i + 2];
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += kTable[v & 63];
  }
  if (i < data.size()) {
    uint32_t v = uint32_t{data[i]} << 16;
    if (i + 1 < data.size()) v |= uint32_t{data[i + 1]} << 8;
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += (i + 1 < data.size()) ? kTable[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

}  // namespace attr2font
