#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "attr2font/inference.hpp"

namespace attr2font {

struct Point {
  double row = 0;
  double col = 0;
  bool operator==(const Point&) const = default;
};

/// Fraction of pixels whose ink/background class (threshold 0) agrees.
double pix_acc(const torch::Tensor& x_hat, const torch::Tensor& x);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) with
/// C1 = (0.01 R)^2, C2 = (0.03 R)^2 and dynamic range R = 2.
double ssim(const torch::Tensor& x_hat, const torch::Tensor& x);

/// Ink pixels (value < 0) with at least one background 4-neighbour; pixels
/// outside the image count as background. Row-major order.
std::vector<Point> contour_points(const torch::Tensor& x);

double hausdorff(const std::vector<Point>& a, const std::vector<Point>& b);
/// Sum of nearest-neighbour distances in both directions.
double chamfer(const std::vector<Point>& a, const std::vector<Point>& b);

/// Mean |a - b| over pixels.
double pix_diff(const torch::Tensor& a, const torch::Tensor& b);

/// Pearson correlation of the columns of `table` (rows = fonts). Columns
/// with zero variance correlate 0 with every other column; their diagonal
/// entry stays 1. Names of such columns are appended to `zero_variance`.
Eigen::MatrixXd attribute_correlation_matrix(const Eigen::MatrixXd& table,
                                             std::vector<std::size_t>* zero_variance = nullptr);

/// Projection of the centred rows onto the top two principal components of
/// the sample covariance. Each component's first nonzero loading is positive;
/// components with (numerically) zero variance give zero coordinates.
Eigen::MatrixXd pca_projection(const Eigen::MatrixXd& table);

/// External perceptual scorer: `command <generated_dir> <reference_dir>` must
/// print a JSON object with a numeric "score" field.
struct PerceptualPlugin {
  std::string command;
  double score(const std::filesystem::path& generated, const std::filesystem::path& reference) const;
};

struct ImpactRow {
  std::string attribute;
  double pix_diff = 0;
  double ssim = 0;
  std::optional<double> perceptual;
};

/// For each attribute i, target vectors equal the validation font's own
/// attributes with component i swept over `values`; the metrics compare glyphs
/// of consecutive sweep points and are averaged over fonts, characters and the
/// consecutive pairs.
std::vector<ImpactRow> attribute_impact_study(const InferenceEngine& engine, const std::vector<int64_t>& fonts,
                                              const std::vector<double>& values = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0},
                                              const std::optional<PerceptualPlugin>& plugin = std::nullopt);

struct GlyphScores {
  double pix_acc = 0;
  double ssim = 0;
  std::optional<double> hausdorff;  // absent when either contour is empty
  std::optional<double> chamfer;
  std::size_t generated_points = 0;
  std::size_t reference_points = 0;
};

GlyphScores score_glyph(const torch::Tensor& generated, const torch::Tensor& reference);

struct EvalOptions {
  std::filesystem::path report;  // report.json; studies are written next to it
  std::string split = "validation";
  std::optional<std::string> source_font;
  std::optional<PerceptualPlugin> plugin;
  bool impact_study = true;
};

/// Reconstructs every font of the split from its attribute vector and scores
/// it against the ground truth, then runs the studies. Returns the report.
nlohmann::json evaluate(const InferenceEngine& engine, const EvalOptions& options);

/// Minimal grayscale renderings for the report.
torch::Tensor render_heatmap(const Eigen::MatrixXd& m, int64_t cell = 8);
torch::Tensor render_scatter(const Eigen::MatrixXd& points, const std::vector<bool>& highlighted, int64_t size = 256);
torch::Tensor render_bars(const std::vector<double>& values, int64_t height = 160, int64_t bar = 6);

}  // namespace attr2font
