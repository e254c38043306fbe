#include "attr2font/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <unistd.h>

#include "attr2font/error.hpp"
#include "attr2font/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace attr2font {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kDynamicRange = 2.0;

torch::Tensor as_image(const torch::Tensor& x) {
  auto t = x.detach().to(torch::kCPU, torch::kFloat64);
  while (t.dim() > 2 && t.size(0) == 1) t = t.squeeze(0);
  if (t.dim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a single [H, W] image");
  return t.contiguous();
}

void require_same(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw Error(ErrorCode::ShapeMismatch, "images differ in shape");
}

const std::array<double, kSsimWindow * kSsimWindow>& gaussian_window() {
  static const auto w = [] {
    std::array<double, kSsimWindow * kSsimWindow> out{};
    const int r = kSsimWindow / 2;
    double total = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
      for (int j = 0; j < kSsimWindow; ++j) {
        const double d2 = (i - r) * (i - r) + (j - r) * (j - r);
        out[i * kSsimWindow + j] = std::exp(-d2 / (2 * kSsimSigma * kSsimSigma));
        total += out[i * kSsimWindow + j];
      }
    }
    for (auto& v : out) v /= total;
    return out;
  }();
  return w;
}

double nearest(const Point& p, const std::vector<Point>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) best = std::min(best, std::hypot(p.row - q.row, p.col - q.col));
  return best;
}

void require_nonempty(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "point sets must be nonempty");
}

std::vector<int64_t> split_fonts(const FontDataset& d, const std::string& split) {
  if (split == "validation") return d.validation();
  if (split == "labeled") return d.labeled();
  if (split == "unlabeled") return d.unlabeled();
  if (split == "all" || split == "train") {
    std::vector<int64_t> all(static_cast<std::size_t>(d.size()));
    for (int64_t i = 0; i < d.size(); ++i) all[i] = i;
    return all;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + split + "'");
}

void write_images(const fs::path& dir, const torch::Tensor& stack) {
  fs::create_directories(dir);
  for (int64_t k = 0; k < stack.size(0); ++k) write_png_gray(dir / fmt::format("{}.png", k), stack[k]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void set_pixel(torch::Tensor& img, int64_t r, int64_t c, float v) {
  if (r >= 0 && c >= 0 && r < img.size(0) && c < img.size(1)) img[r][c] = v;
}

}  // namespace

double pix_acc(const torch::Tensor& x_hat, const torch::Tensor& x) {
  auto a = as_image(x_hat), b = as_image(x);
  require_same(a, b);
  return (a < 0).eq(b < 0).to(torch::kFloat64).mean().item<double>();
}

double pix_diff(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = as_image(a), y = as_image(b);
  require_same(x, y);
  return (x - y).abs().mean().item<double>();
}

double ssim(const torch::Tensor& x_hat, const torch::Tensor& x) {
  auto a = as_image(x_hat), b = as_image(x);
  require_same(a, b);
  const int64_t H = a.size(0), W = a.size(1);
  if (H < kSsimWindow || W < kSsimWindow) {
    throw Error(ErrorCode::ShapeMismatch, "SSIM needs images of at least 11x11 pixels");
  }
  const double c1 = std::pow(0.01 * kDynamicRange, 2), c2 = std::pow(0.03 * kDynamicRange, 2);
  const auto& w = gaussian_window();
  const double* pa = a.data_ptr<double>();
  const double* pb = b.data_ptr<double>();
  double total = 0;
  int64_t count = 0;
  for (int64_t r = 0; r + kSsimWindow <= H; ++r) {
    for (int64_t c = 0; c + kSsimWindow <= W; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kSsimWindow; ++i) {
        for (int j = 0; j < kSsimWindow; ++j) {
          const double g = w[i * kSsimWindow + j];
          const double u = pa[(r + i) * W + c + j], v = pb[(r + i) * W + c + j];
          mx += g * u;
          my += g * v;
          sxx += g * u * u;
          syy += g * v * v;
          sxy += g * u * v;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<Point> contour_points(const torch::Tensor& x) {
  auto img = as_image(x);
  const int64_t H = img.size(0), W = img.size(1);
  const double* p = img.data_ptr<double>();
  auto ink = [&](int64_t r, int64_t c) { return r >= 0 && c >= 0 && r < H && c < W && p[r * W + c] < 0; };
  std::vector<Point> out;
  for (int64_t r = 0; r < H; ++r) {
    for (int64_t c = 0; c < W; ++c) {
      if (!ink(r, c)) continue;
      if (!ink(r - 1, c) || !ink(r + 1, c) || !ink(r, c - 1) || !ink(r, c + 1)) {
        out.push_back({static_cast<double>(r), static_cast<double>(c)});
      }
    }
  }
  return out;
}

double hausdorff(const std::vector<Point>& a, const std::vector<Point>& b) {
  require_nonempty(a, b);
  double h = 0;
  for (const auto& p : a) h = std::max(h, nearest(p, b));
  for (const auto& q : b) h = std::max(h, nearest(q, a));
  return h;
}

double chamfer(const std::vector<Point>& a, const std::vector<Point>& b) {
  require_nonempty(a, b);
  double s = 0;
  for (const auto& p : a) s += nearest(p, b);
  for (const auto& q : b) s += nearest(q, a);
  return s;
}

Eigen::MatrixXd attribute_correlation_matrix(const Eigen::MatrixXd& table, std::vector<std::size_t>* zero_variance) {
  if (table.rows() < 2) throw Error(ErrorCode::InvalidArgument, "correlation needs at least two fonts");
  const Eigen::MatrixXd centred = table.rowwise() - table.colwise().mean();
  const Eigen::VectorXd norms = centred.colwise().norm().transpose();
  const auto n = table.cols();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms[i] == 0.0 && zero_variance) zero_variance->push_back(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        corr(i, j) = 1.0;
      } else if (norms[i] > 0.0 && norms[j] > 0.0) {
        corr(i, j) = centred.col(i).dot(centred.col(j)) / (norms[i] * norms[j]);
      }
    }
  }
  return corr;
}

Eigen::MatrixXd pca_projection(const Eigen::MatrixXd& table) {
  if (table.rows() < 3) throw Error(ErrorCode::InvalidArgument, "PCA needs at least three fonts");
  const Eigen::MatrixXd centred = table.rowwise() - table.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(table.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd vectors = solver.eigenvectors();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.rows(), 2);
  for (int c = 0; c < 2 && c < table.cols(); ++c) {
    const Eigen::Index idx = table.cols() - 1 - c;
    if (values[idx] <= 1e-12 * scale) continue;
    Eigen::VectorXd v = vectors.col(idx);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (std::abs(v[k]) > 1e-12) {
        if (v[k] < 0) v = -v;
        break;
      }
    }
    out.col(c) = centred * v;
  }
  return out;
}

double PerceptualPlugin::score(const fs::path& generated, const fs::path& reference) const {
  const auto cmd = fmt::format("{} '{}' '{}'", command, generated.string(), reference.string());
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw Error(ErrorCode::Io, "cannot run perceptual plug-in: " + command);
  std::string output;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get())) output += buf.data();
  try {
    return json::parse(output).at("score").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("perceptual plug-in output is not {\"score\": x}: ") + e.what());
  }
}

std::vector<ImpactRow> attribute_impact_study(const InferenceEngine& engine, const std::vector<int64_t>& fonts,
                                              const std::vector<double>& values,
                                              const std::optional<PerceptualPlugin>& plugin) {
  if (values.size() < 2) throw Error(ErrorCode::InvalidArgument, "a sweep needs at least two values");
  if (fonts.empty()) throw Error(ErrorCode::EmptyDataset, "no fonts for the impact study");
  const auto& names = attribute_names();
  const auto n_attrs = static_cast<std::size_t>(engine.state().model_config.n_attrs);
  const auto source = engine.font_index(engine.default_source_font());
  std::vector<ImpactRow> rows;
  const fs::path scratch = fs::temp_directory_path() / fmt::format("attr2font_impact_{}", ::getpid());
  for (std::size_t i = 0; i < n_attrs; ++i) {
    ImpactRow row;
    row.attribute = i < names.size() && n_attrs == names.size() ? names[i] : fmt::format("a{}", i + 1);
    std::vector<double> diffs, ssims, perceptual;
    for (int64_t f : fonts) {
      const auto base = engine.font_attributes(f);
      torch::Tensor previous;
      for (std::size_t s = 0; s < values.size(); ++s) {
        auto current = engine.synthesize_batch(source, edit_attribute(base, i, values[s]));
        if (s > 0) {
          for (int64_t k = 0; k < current.size(0); ++k) {
            diffs.push_back(pix_diff(current[k], previous[k]));
            ssims.push_back(ssim(current[k], previous[k]));
          }
          if (plugin) {
            write_images(scratch / "current", current);
            write_images(scratch / "previous", previous);
            perceptual.push_back(plugin->score(scratch / "current", scratch / "previous"));
          }
        }
        previous = current;
      }
    }
    row.pix_diff = mean_of(diffs);
    row.ssim = mean_of(ssims);
    if (plugin) row.perceptual = mean_of(perceptual);
    rows.push_back(row);
  }
  if (plugin) fs::remove_all(scratch);
  return rows;
}

GlyphScores score_glyph(const torch::Tensor& generated, const torch::Tensor& reference) {
  GlyphScores s;
  s.pix_acc = pix_acc(generated, reference);
  s.ssim = ssim(generated, reference);
  const auto a = contour_points(generated), b = contour_points(reference);
  s.generated_points = a.size();
  s.reference_points = b.size();
  if (!a.empty() && !b.empty()) {
    s.hausdorff = hausdorff(a, b);
    s.chamfer = chamfer(a, b);
  }
  return s;
}

torch::Tensor render_heatmap(const Eigen::MatrixXd& m, int64_t cell) {
  auto img = torch::empty({m.rows() * cell, m.cols() * cell}, torch::kFloat32);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float v = -static_cast<float>(std::clamp(m(i, j), -1.0, 1.0));
      img.slice(0, i * cell, (i + 1) * cell).slice(1, j * cell, (j + 1) * cell).fill_(v);
    }
  }
  return img;
}

torch::Tensor render_scatter(const Eigen::MatrixXd& points, const std::vector<bool>& highlighted, int64_t size) {
  auto img = torch::full({size, size}, kBackground);
  if (points.rows() == 0) return img;
  const Eigen::Vector2d lo = points.colwise().minCoeff(), hi = points.colwise().maxCoeff();
  const double margin = 8, span = static_cast<double>(size) - 2 * margin;
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const double x = hi[0] > lo[0] ? (points(p, 0) - lo[0]) / (hi[0] - lo[0]) : 0.5;
    const double y = hi[1] > lo[1] ? (points(p, 1) - lo[1]) / (hi[1] - lo[1]) : 0.5;
    const auto c = static_cast<int64_t>(std::lround(margin + x * span));
    const auto r = static_cast<int64_t>(std::lround(margin + (1.0 - y) * span));
    const bool strong = p < static_cast<Eigen::Index>(highlighted.size()) && highlighted[p];
    const int64_t radius = strong ? 2 : 1;
    for (int64_t dr = -radius; dr <= radius; ++dr) {
      for (int64_t dc = -radius; dc <= radius; ++dc) set_pixel(img, r + dr, c + dc, strong ? kInk : 0.0f);
    }
  }
  return img;
}

torch::Tensor render_bars(const std::vector<double>& values, int64_t height, int64_t bar) {
  const auto n = static_cast<int64_t>(values.size());
  auto img = torch::full({height, std::max<int64_t>(1, n * (bar + 2))}, kBackground);
  double top = 0;
  for (double v : values) top = std::max(top, std::abs(v));
  for (int64_t i = 0; i < n; ++i) {
    const auto h = top > 0 ? static_cast<int64_t>(std::lround(std::abs(values[i]) / top * (height - 1))) : 0;
    img.slice(0, height - h, height).slice(1, i * (bar + 2) + 1, i * (bar + 2) + 1 + bar).fill_(kInk);
  }
  return img;
}

json evaluate(const InferenceEngine& engine, const EvalOptions& options) {
  const auto& data = engine.dataset();
  const auto fonts = split_fonts(data, options.split);
  if (fonts.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + options.split + "' has no fonts");
  const auto source_id = options.source_font.value_or(engine.default_source_font());
  const auto source = engine.font_index(source_id);
  const fs::path out_dir = options.report.has_parent_path() ? options.report.parent_path() : fs::path(".");
  fs::create_directories(out_dir);

  json report;
  report["split"] = options.split;
  report["source_font"] = source_id;
  report["fonts"] = json::array();
  std::vector<double> acc, sim, haus, cham;
  for (int64_t f : fonts) {
    const auto& font = data.font(f);
    auto generated = engine.synthesize_batch(source, engine.font_attributes(f));
    std::vector<double> f_acc, f_sim, f_haus, f_cham;
    for (int64_t k = 0; k < data.n_chars(); ++k) {
      const auto s = score_glyph(generated[k], font.glyph(k));
      f_acc.push_back(s.pix_acc);
      f_sim.push_back(s.ssim);
      if (s.hausdorff) f_haus.push_back(*s.hausdorff);
      if (s.chamfer) f_cham.push_back(*s.chamfer);
    }
    json entry = {{"font_id", font.font_id},
                  {"status", std::string(to_string(font.status))},
                  {"pix_acc", mean_of(f_acc)},
                  {"ssim", mean_of(f_sim)},
                  {"hausdorff", f_haus.empty() ? json(nullptr) : json(mean_of(f_haus))},
                  {"chamfer", f_cham.empty() ? json(nullptr) : json(mean_of(f_cham))},
                  {"scored_contours", f_haus.size()}};
    if (options.plugin) {
      const auto dir = out_dir / "perceptual" / font.font_id;
      write_images(dir / "generated", generated);
      std::vector<torch::Tensor> refs;
      for (int64_t k = 0; k < data.n_chars(); ++k) refs.push_back(font.glyph(k));
      write_images(dir / "reference", torch::stack(refs));
      entry["perceptual"] = options.plugin->score(dir / "generated", dir / "reference");
    }
    report["fonts"].push_back(entry);
    acc.push_back(mean_of(f_acc));
    sim.push_back(mean_of(f_sim));
    if (!f_haus.empty()) haus.push_back(mean_of(f_haus));
    if (!f_cham.empty()) cham.push_back(mean_of(f_cham));
  }
  report["aggregate"] = {{"pix_acc", mean_of(acc)},
                         {"ssim", mean_of(sim)},
                         {"hausdorff", haus.empty() ? json(nullptr) : json(mean_of(haus))},
                         {"chamfer", cham.empty() ? json(nullptr) : json(mean_of(cham))},
                         {"fonts", fonts.size()}};

  // Attribute distribution studies over every font (labeled values and learned pseudo-attributes).
  const auto n_attrs = engine.state().model_config.n_attrs;
  Eigen::MatrixXd table(data.size(), n_attrs);
  std::vector<bool> labeled(static_cast<std::size_t>(data.size()));
  for (int64_t f = 0; f < data.size(); ++f) {
    const auto a = engine.font_attributes(f);
    for (int64_t i = 0; i < n_attrs; ++i) table(f, i) = a[static_cast<std::size_t>(i)];
    labeled[f] = data.font(f).status == LabelStatus::Labeled;
  }
  json studies;
  if (data.size() >= 2) {
    std::vector<std::size_t> flat;
    const auto corr = attribute_correlation_matrix(table, &flat);
    std::ofstream csv(out_dir / "correlation.csv");
    for (int64_t i = 0; i < n_attrs; ++i) {
      for (int64_t j = 0; j < n_attrs; ++j) csv << (j ? "," : "") << fmt::format("{:.9g}", corr(i, j));
      csv << '\n';
    }
    write_png_gray(out_dir / "correlation.png", render_heatmap(corr));
    studies["correlation"] = {{"csv", "correlation.csv"}, {"plot", "correlation.png"}, {"zero_variance", flat}};
    if (!flat.empty()) fmt::print(stderr, "warning: {} attributes have zero variance across fonts\n", flat.size());
  }
  if (data.size() >= 3) {
    const auto proj = pca_projection(table);
    std::ofstream csv(out_dir / "pca.csv");
    csv << "font_id,status,pc1,pc2\n";
    for (int64_t f = 0; f < data.size(); ++f) {
      csv << fmt::format("{},{},{:.9g},{:.9g}\n", data.font(f).font_id, to_string(data.font(f).status), proj(f, 0),
                         proj(f, 1));
    }
    write_png_gray(out_dir / "pca.png", render_scatter(proj, labeled));
    studies["pca"] = {{"csv", "pca.csv"}, {"plot", "pca.png"}};
  }
  if (options.impact_study) {
    const auto rows = attribute_impact_study(engine, fonts, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, options.plugin);
    std::ofstream csv(out_dir / "impact.csv");
    csv << "attribute,pix_diff,ssim" << (options.plugin ? ",perceptual" : "") << '\n';
    std::vector<double> bars;
    for (const auto& r : rows) {
      csv << fmt::format("{},{:.9g},{:.9g}", r.attribute, r.pix_diff, r.ssim);
      if (r.perceptual) csv << fmt::format(",{:.9g}", *r.perceptual);
      csv << '\n';
      bars.push_back(r.pix_diff);
    }
    write_png_gray(out_dir / "impact.png", render_bars(bars));
    studies["impact"] = {{"csv", "impact.csv"}, {"plot", "impact.png"}};
  }
  report["studies"] = studies;
  std::ofstream(options.report) << report.dump(2) << '\n';
  return report;
}

}  // namespace attr2font
