#include <doctest.h>

#include <cmath>

#include "attr2font/error.hpp"
#include "attr2font/losses.hpp"

using namespace attr2font;

TEST_CASE("pixel loss properties") {
  for (int trial = 0; trial < 5; ++trial) {
    auto a = torch::rand({2, 1, 16, 16}) * 2 - 1, b = torch::rand({2, 1, 16, 16}) * 2 - 1;
    CHECK(pixel_loss(a, b).item<float>() == doctest::Approx(pixel_loss(b, a).item<float>()));
    CHECK(pixel_loss(a, b).item<float>() >= 0.0f);
    CHECK(pixel_loss(a, b).item<float>() <= 2.0f);
  }
  CHECK_THROWS_AS(pixel_loss(torch::rand({2, 1, 8, 8}), torch::rand({2, 1, 4, 4})), Error);
}

TEST_CASE("character loss bounds") {
  CHECK_THROWS_AS(char_loss(torch::zeros({5}), 5), Error);
  CHECK_THROWS_AS(char_loss(torch::zeros({5}), -1), Error);
  auto confident = torch::full({5}, -20.0);
  confident[2] = 20.0;
  CHECK(char_loss(confident, 2).item<double>() < 1e-6);
}

TEST_CASE("patch extraction layout") {
  auto img = torch::arange(49, torch::kFloat32).reshape({7, 7});
  auto p = extract_patches(img);
  CHECK(p.sizes() == torch::IntArrayRef({1, 4, 25}));
  CHECK(p[0][1][0].item<float>() == 2.0f);   // second patch starts at column 2
  CHECK(p[0][2][0].item<float>() == 14.0f);  // third patch starts at row 2
  CHECK(p[0][0][5].item<float>() == 7.0f);   // row-major inside a patch
}

TEST_CASE("contextual loss properties") {
  torch::manual_seed(5);
  auto x = torch::rand({2, 1, 16, 16}) * 2 - 1;
  CHECK(contextual_loss(x, x).item<float>() < 1e-3f);
  auto y = torch::rand({2, 1, 16, 16}) * 2 - 1;
  CHECK(contextual_loss(y, x).item<float>() > contextual_loss(x, x).item<float>());
  CHECK(contextual_loss(y, x).item<float>() >= 0.0f);
  // A target made of identical patches carries no context.
  CHECK(contextual_loss(y, torch::ones({2, 1, 16, 16})).item<float>() == 0.0f);
  // Patch order does not matter: shuffling generated patches leaves the loss unchanged.
  auto fx = torch::rand({6, 4}), fy = torch::rand({5, 4});
  auto perm = torch::randperm(6);
  CHECK(contextual_loss_features(fx.index_select(0, perm), fy).item<float>() ==
        doctest::Approx(contextual_loss_features(fx, fy).item<float>()).epsilon(1e-5));
}

TEST_CASE("adversarial terms are clamped and monotone") {
  CHECK(std::isfinite(adversarial_generator_loss(torch::zeros({2})).item<float>()));
  CHECK(adversarial_generator_loss(torch::full({2}, 0.9)).item<float>() <
        adversarial_generator_loss(torch::full({2}, 0.1)).item<float>());
  auto attrs = torch::rand({2, 3});
  auto good = discriminator_objective(torch::full({2}, 0.9), torch::full({2}, 0.1), attrs, attrs);
  auto bad = discriminator_objective(torch::full({2}, 0.1), torch::full({2}, 0.9), attrs, attrs);
  CHECK(good.adversarial.item<float>() < bad.adversarial.item<float>());
  CHECK(good.attribute.item<float>() == 0.0f);
  CHECK(std::isfinite(discriminator_objective(torch::ones({2}), torch::ones({2}), attrs, attrs).total.item<float>()));
}

TEST_CASE("generator objective weights") {
  GeneratorLossParts p{torch::tensor(1.0), torch::tensor(2.0), torch::tensor(3.0), torch::tensor(4.0),
                       torch::tensor(5.0)};
  CHECK(generator_objective(p, LossWeights{1, 1, 1, 1, 1}).item<double>() == doctest::Approx(15.0));
  CHECK(generator_objective(p, LossWeights{}).item<double>() == doctest::Approx(5 + 100 + 15 + 20 + 100));
}

TEST_CASE("loss record CSV") {
  CHECK(LossRecord::csv_header() == "step,l_G,l_pixel,l_char,l_CX,l_attr,l_D,l'_attr");
  LossRecord r;
  r.step = 7;
  r.l_G = 0.5;
  CHECK(r.csv_row().rfind("7,0.5,", 0) == 0);
  CHECK(r.all_finite());
  r.l_CX = NAN;
  CHECK_FALSE(r.all_finite());
}
