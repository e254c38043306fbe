#include "attr2font/truetype.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "attr2font/error.hpp"

namespace attr2font {

namespace {

constexpr uint32_t tag_of(const char* t) {
  return (uint32_t(uint8_t(t[0])) << 24) | (uint32_t(uint8_t(t[1])) << 16) |
         (uint32_t(uint8_t(t[2])) << 8) | uint32_t(uint8_t(t[3]));
}

struct Edge {
  double x0, y0, x1, y1;
};

void flatten_contour(const Contour& c, std::vector<Edge>& edges) {
  const std::size_t n = c.size();
  if (n < 2) return;
  // Rotate so the walk starts on an on-curve point; an all-off-curve contour
  // starts at the implied midpoint of its first two points.
  std::vector<OutlinePoint> pts;
  pts.reserve(n + 1);
  auto first_on = std::find_if(c.begin(), c.end(), [](const OutlinePoint& p) { return p.on_curve; });
  if (first_on == c.end()) {
    pts.push_back({0.5 * (c[0].x + c[1].x), 0.5 * (c[0].y + c[1].y), true});
    for (std::size_t i = 1; i <= n; ++i) pts.push_back(c[i % n]);
  } else {
    const std::size_t s = static_cast<std::size_t>(first_on - c.begin());
    for (std::size_t i = 0; i < n; ++i) pts.push_back(c[(s + i) % n]);
  }
  double px = pts[0].x, py = pts[0].y;
  auto line_to = [&](double x, double y) {
    edges.push_back({px, py, x, y});
    px = x;
    py = y;
  };
  auto quad_to = [&](double cx, double cy, double x, double y) {
    const double len = std::hypot(cx - px, cy - py) + std::hypot(x - cx, y - cy);
    const int steps = std::clamp(static_cast<int>(std::ceil(len / 2.0)), 2, 32);
    const double x0 = px, y0 = py;
    for (int k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) / steps, u = 1.0 - t;
      line_to(u * u * x0 + 2 * u * t * cx + t * t * x, u * u * y0 + 2 * u * t * cy + t * t * y);
    }
  };
  const std::size_t m = pts.size();
  std::size_t i = 1;
  while (i < m) {
    const OutlinePoint& p = pts[i];
    if (p.on_curve) {
      line_to(p.x, p.y);
      ++i;
      continue;
    }
    const OutlinePoint& next = i + 1 < m ? pts[i + 1] : pts[0];
    if (next.on_curve) {
      quad_to(p.x, p.y, next.x, next.y);
      i += 2;
    } else {
      quad_to(p.x, p.y, 0.5 * (p.x + next.x), 0.5 * (p.y + next.y));
      ++i;
    }
  }
  if (px != pts[0].x || py != pts[0].y) line_to(pts[0].x, pts[0].y);
}

}  // namespace

TrueTypeFont::TrueTypeFont(std::vector<uint8_t> data) : data_(std::move(data)) {
  if (data_.size() < 12) throw Error(ErrorCode::UnreadableFont, "file too small");
  uint32_t version = u32(0);
  if (version == tag_of("ttcf")) base_ = u32(12);
  version = u32(base_);
  if (version == tag_of("OTTO")) {
    throw Error(ErrorCode::UnreadableFont, "CFF outlines are not supported");
  }
  if (version != 0x00010000u && version != tag_of("true")) {
    throw Error(ErrorCode::UnreadableFont, "not a TrueType font");
  }
  const Table head = table("head");
  const Table maxp = table("maxp");
  const Table cmap = table("cmap");
  glyf_ = table("glyf");
  loca_ = table("loca");
  if (!head.length || !maxp.length || !cmap.length || !glyf_.length || !loca_.length) {
    throw Error(ErrorCode::UnreadableFont, "missing required table");
  }
  units_per_em_ = u16(head.offset + 18);
  index_to_loc_format_ = i16(head.offset + 50);
  num_glyphs_ = u16(maxp.offset + 4);
  if (units_per_em_ <= 0) throw Error(ErrorCode::UnreadableFont, "bad unitsPerEm");

  // Prefer a full-repertoire format 12 subtable, fall back to BMP format 4.
  int best_rank = 0;
  const uint16_t count = u16(cmap.offset + 2);
  for (uint16_t i = 0; i < count; ++i) {
    const std::size_t rec = cmap.offset + 4 + 8u * i;
    const uint16_t platform = u16(rec), encoding = u16(rec + 2);
    const std::size_t sub = cmap.offset + u32(rec + 4);
    const uint16_t format = u16(sub);
    const bool unicode = platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
    if (!unicode) continue;
    int rank = format == 12 ? 2 : format == 4 ? 1 : 0;
    if (rank > best_rank) {
      best_rank = rank;
      cmap_subtable_ = sub;
      cmap_format_ = format;
    }
  }
  if (best_rank == 0) throw Error(ErrorCode::UnreadableFont, "no Unicode cmap");
}

TrueTypeFont TrueTypeFont::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFont, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return TrueTypeFont(std::move(bytes));
}

uint8_t TrueTypeFont::u8(std::size_t at) const {
  if (at >= data_.size()) throw Error(ErrorCode::UnreadableFont, "read past end of file");
  return data_[at];
}

uint16_t TrueTypeFont::u16(std::size_t at) const {
  return static_cast<uint16_t>((u8(at) << 8) | u8(at + 1));
}

uint32_t TrueTypeFont::u32(std::size_t at) const {
  return (uint32_t{u16(at)} << 16) | u16(at + 2);
}

TrueTypeFont::Table TrueTypeFont::table(const char* tag) const {
  const uint16_t n = u16(base_ + 4);
  const uint32_t want = tag_of(tag);
  for (uint16_t i = 0; i < n; ++i) {
    const std::size_t rec = base_ + 12 + 16u * i;
    if (u32(rec) == want) return {u32(rec + 8), u32(rec + 12)};
  }
  return {};
}

uint32_t TrueTypeFont::glyph_index(char32_t cp) const {
  const std::size_t sub = cmap_subtable_;
  if (cmap_format_ == 12) {
    const uint32_t groups = u32(sub + 12);
    for (uint32_t g = 0; g < groups; ++g) {
      const std::size_t at = sub + 16 + 12u * g;
      const uint32_t first = u32(at), last = u32(at + 4);
      if (cp >= first && cp <= last) return u32(at + 8) + (cp - first);
    }
    return 0;
  }
  if (cp > 0xFFFF) return 0;
  const uint16_t seg_x2 = u16(sub + 6);
  const std::size_t ends = sub + 14, starts = ends + seg_x2 + 2, deltas = starts + seg_x2,
                    ranges = deltas + seg_x2;
  for (uint16_t s = 0; s < seg_x2; s += 2) {
    const uint16_t end = u16(ends + s);
    if (cp > end) continue;
    const uint16_t start = u16(starts + s);
    if (cp < start) return 0;
    const uint16_t delta = u16(deltas + s);
    const uint16_t range = u16(ranges + s);
    if (range == 0) return static_cast<uint16_t>(cp + delta);
    const uint16_t g = u16(ranges + s + range + 2 * (cp - start));
    return g == 0 ? 0 : static_cast<uint16_t>(g + delta);
  }
  return 0;
}

uint32_t TrueTypeFont::glyph_offset(uint32_t glyph, uint32_t* length) const {
  *length = 0;
  if (glyph >= num_glyphs_) return 0;
  uint32_t a, b;
  if (index_to_loc_format_ == 0) {
    a = 2u * u16(loca_.offset + 2 * glyph);
    b = 2u * u16(loca_.offset + 2 * glyph + 2);
  } else {
    a = u32(loca_.offset + 4 * glyph);
    b = u32(loca_.offset + 4 * glyph + 4);
  }
  if (b < a) throw Error(ErrorCode::UnreadableFont, "bad loca entry");
  *length = b - a;
  return glyf_.offset + a;
}

std::vector<Contour> TrueTypeFont::outline(uint32_t glyph) const {
  std::vector<Contour> out;
  const double identity[6] = {1, 0, 0, 1, 0, 0};
  append_outline(glyph, identity, 0, out);
  return out;
}

void TrueTypeFont::append_outline(uint32_t glyph, const double (&m)[6], int depth,
                                  std::vector<Contour>& out) const {
  if (depth > 8) throw Error(ErrorCode::UnreadableFont, "composite glyph nesting too deep");
  uint32_t length = 0;
  const std::size_t g = glyph_offset(glyph, &length);
  if (length == 0) return;
  const int16_t contours = i16(g);
  if (contours >= 0) {
    std::vector<uint16_t> ends(contours);
    for (int c = 0; c < contours; ++c) ends[c] = u16(g + 10 + 2 * c);
    const std::size_t points = contours ? std::size_t{ends.back()} + 1 : 0;
    std::size_t p = g + 10 + 2u * contours;
    p += 2 + u16(p);
    std::vector<uint8_t> flags;
    flags.reserve(points);
    while (flags.size() < points) {
      const uint8_t f = u8(p++);
      flags.push_back(f);
      if (f & 8) {
        for (uint8_t r = u8(p++); r > 0 && flags.size() < points; --r) flags.push_back(f);
      }
    }
    std::vector<double> xs(points), ys(points);
    int32_t v = 0;
    for (std::size_t i = 0; i < points; ++i) {
      if (flags[i] & 2) {
        const int d = u8(p++);
        v += (flags[i] & 16) ? d : -d;
      } else if (!(flags[i] & 16)) {
        v += i16(p);
        p += 2;
      }
      xs[i] = v;
    }
    v = 0;
    for (std::size_t i = 0; i < points; ++i) {
      if (flags[i] & 4) {
        const int d = u8(p++);
        v += (flags[i] & 32) ? d : -d;
      } else if (!(flags[i] & 32)) {
        v += i16(p);
        p += 2;
      }
      ys[i] = v;
    }
    std::size_t first = 0;
    for (int c = 0; c < contours; ++c) {
      Contour contour;
      for (std::size_t i = first; i <= ends[c] && i < points; ++i) {
        contour.push_back({m[0] * xs[i] + m[2] * ys[i] + m[4], m[1] * xs[i] + m[3] * ys[i] + m[5],
                           (flags[i] & 1) != 0});
      }
      first = std::size_t{ends[c]} + 1;
      if (!contour.empty()) out.push_back(std::move(contour));
    }
    return;
  }

  auto f2dot14 = [this](std::size_t at) { return i16(at) / 16384.0; };
  std::size_t p = g + 10;
  for (;;) {
    const uint16_t flags = u16(p);
    const uint16_t child = u16(p + 2);
    p += 4;
    double dx = 0, dy = 0;
    if (flags & 1) {
      dx = i16(p);
      dy = i16(p + 2);
      p += 4;
    } else {
      dx = static_cast<int8_t>(u8(p));
      dy = static_cast<int8_t>(u8(p + 1));
      p += 2;
    }
    if (!(flags & 2)) dx = dy = 0;  // point-matched placement is not supported
    double a = 1, b = 0, c = 0, d = 1;
    if (flags & 8) {
      a = d = f2dot14(p);
      p += 2;
    } else if (flags & 0x40) {
      a = f2dot14(p);
      d = f2dot14(p + 2);
      p += 4;
    } else if (flags & 0x80) {
      a = f2dot14(p);
      b = f2dot14(p + 2);
      c = f2dot14(p + 4);
      d = f2dot14(p + 6);
      p += 8;
    }
    const double composed[6] = {m[0] * a + m[2] * b, m[1] * a + m[3] * b,
                                m[0] * c + m[2] * d, m[1] * c + m[3] * d,
                                m[0] * dx + m[2] * dy + m[4], m[1] * dx + m[3] * dy + m[5]};
    append_outline(child, composed, depth + 1, out);
    if (!(flags & 0x20)) break;
  }
}

torch::Tensor rasterize(const std::vector<Contour>& contours, int64_t height, int64_t width,
                        int supersample) {
  std::vector<Edge> edges;
  for (const auto& c : contours) flatten_contour(c, edges);
  auto coverage = torch::zeros({height, width}, torch::kFloat64);
  double* cov = coverage.data_ptr<double>();
  const int s = std::max(1, supersample);
  const double weight = 1.0 / (s * s);
  struct Crossing {
    double x;
    int dir;
  };
  std::vector<Crossing> xs;
  for (int64_t sy = 0; sy < height * s; ++sy) {
    const double y = (sy + 0.5) / s;
    xs.clear();
    for (const Edge& e : edges) {
      if (e.y0 == e.y1) continue;
      const double lo = std::min(e.y0, e.y1), hi = std::max(e.y0, e.y1);
      if (y < lo || y >= hi) continue;
      xs.push_back({e.x0 + (y - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0), e.y1 > e.y0 ? 1 : -1});
    }
    std::sort(xs.begin(), xs.end(), [](const Crossing& a, const Crossing& b) { return a.x < b.x; });
    int winding = 0;
    double* row = cov + (sy / s) * width;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      winding += xs[i].dir;
      if (winding == 0) continue;
      const int64_t a = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(xs[i].x * s - 0.5)));
      const int64_t b =
          std::min<int64_t>(width * s, static_cast<int64_t>(std::ceil(xs[i + 1].x * s - 0.5)));
      for (int64_t sx = a; sx < b; ++sx) row[sx / s] += weight;
    }
  }
  return coverage.clamp(0.0, 1.0).to(torch::kFloat32);
}

namespace {

torch::Tensor area_weights(int64_t in, int64_t out) {
  auto w = torch::zeros({out, in}, torch::kFloat64);
  auto acc = w.accessor<double, 2>();
  const double f = static_cast<double>(in) / out;
  for (int64_t o = 0; o < out; ++o) {
    const double lo = o * f, hi = (o + 1) * f;
    for (int64_t i = static_cast<int64_t>(std::floor(lo)); i < std::min<int64_t>(in, std::ceil(hi));
         ++i) {
      const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (overlap > 0) acc[o][i] = overlap / f;
    }
  }
  return w;
}

}  // namespace

torch::Tensor area_resize(const torch::Tensor& image, int64_t out_h, int64_t out_w) {
  if (out_h <= 0 || out_w <= 0) throw Error(ErrorCode::ZeroSize, "resize target is empty");
  auto img = image.to(torch::kFloat64);
  auto rh = area_weights(img.size(0), out_h);
  auto rw = area_weights(img.size(1), out_w);
  return torch::matmul(torch::matmul(rh, img), rw.t()).to(torch::kFloat32);
}

GlyphImage render_glyph(const TrueTypeFont& font, char32_t codepoint, int render_size, int out_size) {
  if (render_size <= 0 || out_size <= 0) throw Error(ErrorCode::ZeroSize, "render size must be positive");
  const uint32_t glyph = font.glyph_index(codepoint);
  if (glyph == 0) {
    throw Error(ErrorCode::MissingGlyph, "codepoint U+" + std::to_string(static_cast<uint32_t>(codepoint)) +
                                             " not in font");
  }
  auto contours = font.outline(glyph);
  GlyphImage out;
  if (contours.empty()) {
    out.pixels = torch::full({out_size, out_size}, kBackground, torch::kFloat32);
    return out;
  }
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& c : contours) {
    for (const auto& p : c) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  double scale = static_cast<double>(render_size) / font.units_per_em();
  const double extent = std::max(x1 - x0, y1 - y0) * scale;
  const double limit = 0.95 * render_size;
  if (extent > limit) scale *= limit / extent;
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1), half = 0.5 * render_size;
  for (auto& c : contours) {
    for (auto& p : c) {
      p.x = (p.x - cx) * scale + half;
      p.y = half - (p.y - cy) * scale;
    }
  }
  auto coverage = rasterize(contours, render_size, render_size, 4);
  if (render_size != out_size) coverage = area_resize(coverage, out_size, out_size);
  out.pixels = (1.0f - 2.0f * coverage).clamp(-1.0f, 1.0f).contiguous();
  return out;
}

GlyphImage render_glyph(const std::filesystem::path& font_file, char32_t codepoint, int render_size,
                        int out_size) {
  auto font = TrueTypeFont::load(font_file);
  auto g = render_glyph(font, codepoint, render_size, out_size);
  g.font_id = font_file.stem().string();
  return g;
}

}  // namespace attr2font
