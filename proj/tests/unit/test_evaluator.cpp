#include <doctest.h>

#include <fstream>

#include "attr2font/error.hpp"
#include "attr2font/evaluator.hpp"
#include "attr2font/model_state.hpp"
#include "support.hpp"

using namespace attr2font;
using namespace testing_support;

TEST_CASE("pixel accuracy and difference") {
  auto a = torch::ones({4, 4});
  auto b = torch::ones({4, 4});
  b[0][0] = -1;
  CHECK(pix_acc(a, a) == 1.0);
  CHECK(pix_acc(a, b) == doctest::Approx(15.0 / 16.0));
  CHECK(pix_diff(a, b) == doctest::Approx(2.0 / 16.0));
}

TEST_CASE("SSIM properties") {
  auto x = torch::rand({20, 20}) * 2 - 1, y = torch::rand({20, 20}) * 2 - 1;
  CHECK(ssim(x, x) == doctest::Approx(1.0));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)));
  CHECK(ssim(x, y) < 1.0);
  CHECK_THROWS_AS(ssim(torch::rand({8, 8}), torch::rand({8, 8})), Error);
}

TEST_CASE("contour extraction") {
  auto img = torch::ones({7, 7});
  img.slice(0, 1, 6).slice(1, 1, 6).fill_(-1);
  const auto pts = contour_points(img);
  CHECK(pts.size() == 16);  // ring of a 5x5 square
  auto full = -torch::ones({3, 3});
  CHECK(contour_points(full).size() == 8);  // outside counts as background
  CHECK(contour_points(torch::ones({5, 5})).empty());
  CHECK_THROWS_AS(hausdorff({}, {{0, 0}}), Error);
  CHECK_THROWS_AS(chamfer({{0, 0}}, {}), Error);
}

TEST_CASE("glyph scores skip empty contours") {
  const auto s = score_glyph(torch::ones({16, 16}), stroke_glyph(3, {}, 16));
  CHECK_FALSE(s.hausdorff.has_value());
  CHECK(s.reference_points > 0);
}

TEST_CASE("correlation handles zero-variance columns") {
  Eigen::MatrixXd t(4, 3);
  t << 0.1, 0.5, 0.2, 0.4, 0.5, 0.8, 0.3, 0.5, 0.6, 0.9, 0.5, 0.1;
  std::vector<std::size_t> zero;
  const auto c = attribute_correlation_matrix(t, &zero);
  CHECK(zero == std::vector<std::size_t>{1});
  CHECK(c(1, 1) == 1.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(0, 2) == doctest::Approx(c(2, 0)));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(std::abs(c(i, j)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("PCA sign convention and degenerate data") {
  Eigen::MatrixXd t(3, 2);
  t << 0, 0, 1, 1, 2, 2;
  const auto p = pca_projection(t);
  CHECK(p.cols() == 2);
  CHECK(p(2, 0) > 0);  // first loading positive, so the largest point projects positively
  CHECK(p.col(1).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("perceptual plug-in protocol") {
  TempDir dir("plugin");
  const auto script = dir.path() / "score.sh";
  std::ofstream(script) << "#!/bin/sh\necho '{\"score\": 0.25}'\n";
  fs::permissions(script, fs::perms::owner_all);
  CHECK(PerceptualPlugin{script.string()}.score(dir.path(), dir.path()) == 0.25);
  const auto bad = dir.path() / "bad.sh";
  std::ofstream(bad) << "#!/bin/sh\necho nope\n";
  fs::permissions(bad, fs::perms::owner_all);
  CHECK_THROWS_AS(PerceptualPlugin{bad.string()}.score(dir.path(), dir.path()), Error);
}

TEST_CASE("evaluate writes the report and studies") {
  torch::set_num_threads(1);
  TempDir dir("eval");
  write_fixture(dir.path() / "data", semi_supervised_fonts(), 32);
  const auto data = FontDataset::load(dir.path() / "data");
  auto state = make_model_state(data, (dir.path() / "data").string(), tiny_config(), TrainConfig{});
  InferenceEngine engine(*state, data);
  EvalOptions o;
  o.report = dir.path() / "out" / "report.json";
  o.split = "all";
  const auto report = evaluate(engine, o);
  CHECK(report["fonts"].size() == 3);
  CHECK(report["aggregate"]["pix_acc"].get<double>() >= 0.0);
  CHECK(fs::exists(o.report));
  for (const char* f : {"correlation.csv", "correlation.png", "pca.csv", "pca.png", "impact.csv", "impact.png"}) {
    CHECK_MESSAGE(fs::exists(dir.path() / "out" / f), f);
  }
  std::ifstream impact(dir.path() / "out" / "impact.csv");
  int lines = 0;
  for (std::string line; std::getline(impact, line);) ++lines;
  CHECK(lines == 38);
  o.split = "bogus";
  CHECK_THROWS_AS(evaluate(engine, o), Error);
}
