#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <unistd.h>

#include "attr2font/attributes.hpp"
#include "attr2font/image.hpp"

namespace testing_support {

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

// Skeletons in a unit box, y pointing down, for the characters of kFixtureCharset.
const std::vector<std::vector<Segment>>& skeletons() {
  static const std::vector<std::vector<Segment>> s = {
      {{0.0, 1.0, 0.5, 0.0}, {0.5, 0.0, 1.0, 1.0}, {0.25, 0.55, 0.75, 0.55}},                         // A
      {{0.1, 0.0, 0.1, 1.0}, {0.1, 0.0, 0.9, 0.0}, {0.1, 0.5, 0.7, 0.5}, {0.1, 1.0, 0.9, 1.0}},       // E
      {{0.1, 0.0, 0.1, 1.0}, {0.1, 0.0, 0.9, 0.0}, {0.1, 0.5, 0.7, 0.5}},                             // F
      {{0.1, 0.0, 0.1, 1.0}, {0.9, 0.0, 0.9, 1.0}, {0.1, 0.5, 0.9, 0.5}},                             // H
      {{0.5, 0.0, 0.5, 1.0}, {0.3, 0.0, 0.7, 0.0}, {0.3, 1.0, 0.7, 1.0}},                             // I
      {{0.15, 0.0, 0.15, 1.0}, {0.15, 1.0, 0.85, 1.0}},                                               // L
      {{0.1, 1.0, 0.1, 0.0}, {0.1, 0.0, 0.9, 1.0}, {0.9, 1.0, 0.9, 0.0}},                             // N
      {{0.0, 0.0, 1.0, 0.0}, {0.5, 0.0, 0.5, 1.0}},                                                   // T
      {{0.0, 0.0, 0.5, 1.0}, {0.5, 1.0, 1.0, 0.0}},                                                   // V
      {{0.1, 0.0, 0.9, 0.0}, {0.9, 0.0, 0.1, 1.0}, {0.1, 1.0, 0.9, 1.0}},                             // Z
  };
  return s;
}

double segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (s.x0 + t * dx), py - (s.y0 + t * dy));
}

}  // namespace

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() / fmt::format("attr2font_test_{}_{}_{}", tag, ::getpid(), counter++);
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

torch::Tensor stroke_glyph(int char_index, const StrokeStyle& style, int64_t resolution) {
  const auto& segs = skeletons().at(static_cast<std::size_t>(char_index));
  const double scale = static_cast<double>(resolution) / 64.0;
  const double half = style.thickness * scale / 2.0;
  const double lo = 0.2 * resolution, span = 0.6 * resolution;
  constexpr int kSamples = 4;
  auto out = torch::empty({resolution, resolution}, torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (int64_t r = 0; r < resolution; ++r) {
    for (int64_t c = 0; c < resolution; ++c) {
      int covered = 0;
      for (int sy = 0; sy < kSamples; ++sy) {
        for (int sx = 0; sx < kSamples; ++sx) {
          const double y = r + (sy + 0.5) / kSamples;
          // Undo the shear so the skeleton leans right as y decreases.
          const double x = c + (sx + 0.5) / kSamples + style.slant * (y - resolution / 2.0);
          const double u = (x - lo) / span, v = (y - lo) / span;
          double best = 1e9;
          for (const auto& s : segs) best = std::min(best, segment_distance(u, v, s) * span);
          if (best <= half) ++covered;
        }
      }
      acc[r][c] = 1.0f - 2.0f * static_cast<float>(covered) / (kSamples * kSamples);
    }
  }
  return out;
}

std::vector<float> fixture_attributes(float level, std::size_t n) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float wobble = 0.15f * static_cast<float>((i * 7) % 5) / 4.0f;
    out[i] = std::clamp(level + (i % 2 ? wobble : -wobble), 0.0f, 1.0f);
  }
  return out;
}

void write_fixture(const fs::path& root, const std::vector<FixtureFont>& fonts, int64_t resolution, int64_t n_chars) {
  fs::create_directories(root / "images");
  std::ofstream(root / "charset.txt") << std::string(kFixtureCharset).substr(0, static_cast<std::size_t>(n_chars))
                                      << '\n';
  std::ofstream csv(root / "attributes.csv");
  csv << "font_id";
  for (const auto& name : attr2font::attribute_names()) csv << ',' << name;
  csv << '\n';
  for (const auto& f : fonts) {
    const auto dir = root / "images" / f.id;
    fs::create_directories(dir);
    for (int64_t k = 0; k < n_chars; ++k) {
      attr2font::write_png_gray(dir / fmt::format("{}.png", k), stroke_glyph(static_cast<int>(k), f.style, resolution));
    }
    if (f.labeled) {
      csv << f.id;
      for (float v : fixture_attributes(f.attribute_level)) csv << ',' << fmt::format("{:g}", std::round(v * 100.0f));
      csv << '\n';
    }
  }
}

std::vector<FixtureFont> desk_fonts() {
  return {{"desk_light", {3.0, 0.0}, true, 0.25f}, {"desk_heavy", {7.0, 0.3}, true, 0.75f}};
}

std::vector<FixtureFont> semi_supervised_fonts() {
  return {{"semi_a", {3.0, 0.0}, true, 0.25f}, {"semi_b", {6.0, 0.25}, true, 0.7f}, {"semi_u", {4.5, -0.2}, false}};
}

attr2font::ModelConfig tiny_config() {
  attr2font::ModelConfig c;
  c.n_embed = 8;
  c.n_chars = 10;
  c.resolution = 32;
  c.m = 2;
  c.levels = 4;
  c.n_res_blocks = 2;
  c.style_dim = 16;
  c.base_channels = 8;
  c.max_channels = 32;
  c.style_base_channels = 8;
  c.disc_layers = 3;
  c.disc_base_channels = 8;
  return c;
}

attr2font::ModelConfig desk_config() {
  attr2font::ModelConfig c;
  c.n_chars = 10;
  return c;
}

double gradient_error(const std::function<torch::Tensor()>& f, torch::Tensor x, double h) {
  auto out = f();
  auto analytic = torch::autograd::grad({out}, {x}, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                        /*allow_unused=*/true)[0];
  if (!analytic.defined()) analytic = torch::zeros_like(x);
  analytic = analytic.detach().reshape({-1}).to(torch::kFloat64);
  torch::NoGradGuard guard;
  auto flat = x.view({-1});
  const int64_t n = flat.numel();
  auto numeric = torch::zeros({n}, torch::kFloat64);
  for (int64_t i = 0; i < n; ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f().item<double>();
    flat[i] = orig - h;
    const double down = f().item<double>();
    flat[i] = orig;
    numeric[i] = (up - down) / (2 * h);
  }
  const double scale = std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), 1e-12});
  return (analytic - numeric).norm().item<double>() / scale;
}

}  // namespace testing_support
