#include <doctest.h>

#include "attr2font/aam.hpp"
#include "attr2font/discriminator.hpp"
#include "attr2font/error.hpp"
#include "attr2font/generator.hpp"
#include "attr2font/vst.hpp"
#include "support.hpp"

using namespace attr2font;
using namespace testing_support;

TEST_CASE("attribute feature difference and outer products by hand") {
  auto emb = torch::tensor({{1.0, 2.0}, {3.0, -1.0}});
  auto a = torch::tensor({0.2, 0.5}), b = torch::tensor({0.7, 0.5});
  auto beta = attribute_feature_difference(a, b, emb);
  CHECK(beta.sizes() == torch::IntArrayRef({1, 2, 2}));
  CHECK(torch::allclose(beta[0], torch::tensor({{0.5, 1.0}, {0.0, 0.0}}, torch::kFloat64).to(beta.dtype())));
  auto gamma = outer_product_maps(beta);
  CHECK(torch::allclose(gamma[0][0], torch::tensor({{0.25, 0.5}, {0.5, 1.0}}).to(gamma.dtype())));
  CHECK(gamma[0][1].abs().sum().item<double>() == 0.0);
  CHECK_THROWS_AS(attribute_feature_difference(torch::rand({3}), torch::rand({3}), emb), Error);
}

TEST_CASE("identical attribute vectors give zero maps") {
  AttributeAttention aam(37, 16, 2, 8);
  auto a = torch::rand({3, 37});
  CHECK(aam->gamma(a, a).abs().max().item<float>() == 0.0f);
}

TEST_CASE("channel attention gate and resize") {
  ChannelAttention ca(6, 2);
  auto x = torch::randn({2, 6, 5, 5});
  auto out = ca->forward(x);
  CHECK(out.map.sizes() == torch::IntArrayRef({2, 6, 1, 1}));
  CHECK(torch::allclose(out.refined, x * out.map));
  CHECK_THROWS_AS(ca->forward(torch::randn({2, 5, 5, 5})), Error);
  auto maps = torch::rand({1, 3, 8, 8});
  CHECK(rescale_for_stage(maps, 16, 16).sizes() == torch::IntArrayRef({1, 3, 16, 16}));
  auto area = rescale_for_stage(maps, 4, 4, ResizeMode::Area);
  CHECK(area[0][0][0][0].item<float>() == doctest::Approx(maps[0][0].slice(0, 0, 2).slice(1, 0, 2).mean().item<float>()));
  CHECK(torch::equal(rescale_for_stage(maps, 8, 8), maps));
  CHECK_THROWS_AS(rescale_for_stage(maps, 0, 4), Error);
}

TEST_CASE("style encoder and transformer shapes") {
  const auto cfg = tiny_config();
  StyleEncoder enc(cfg);
  CHECK(enc->forward(torch::rand({3, cfg.m, 32, 32})).sizes() == torch::IntArrayRef({3, cfg.style_dim}));
  CHECK_THROWS_AS(enc->forward(torch::rand({3, cfg.m + 1, 32, 32})), Error);
  CHECK_THROWS_AS(enc->forward(torch::rand({3, cfg.m, 64, 64})), Error);

  StyleTransformer vst(cfg);
  CHECK(vst->blocks().size() == static_cast<std::size_t>(cfg.n_res_blocks));
  auto s = torch::rand({2, cfg.style_dim});
  CHECK(vst->forward(s, torch::zeros({2, cfg.n_attrs})).sizes() == s.sizes());
  CHECK_THROWS_AS(vst->forward(s, torch::zeros({2, 3})), Error);
}

TEST_CASE("residual block is identity when its branch is zeroed") {
  ResidualBlock block(8);
  {
    torch::NoGradGuard g;
    block->fc2->weight.zero_();
    block->fc2->bias.zero_();
  }
  auto x = torch::randn({4, 8});
  CHECK(torch::equal(block->forward(x), x));
}

TEST_CASE("generator on the tiny configuration") {
  const auto cfg = tiny_config();
  Generator g(cfg);
  auto source = torch::rand({2, 1, 32, 32}) * 2 - 1;
  auto refs = torch::rand({2, cfg.m, 32, 32}) * 2 - 1;
  auto out = g->forward(source, refs, torch::rand({2, 37}), torch::rand({2, 37}));
  CHECK(out.image.sizes() == torch::IntArrayRef({2, 1, 32, 32}));
  CHECK(out.class_logits.sizes() == torch::IntArrayRef({2, cfg.n_chars}));
  CHECK(out.style.sizes() == torch::IntArrayRef({2, cfg.style_dim}));
  CHECK(g->decoder->attention_sizes() == std::vector<int64_t>({4, 8, 16}));

  // 1-D attribute vectors broadcast over a batch of one.
  auto one = g->forward(source.slice(0, 0, 1), refs.slice(0, 0, 1), torch::rand({37}), torch::rand({37}));
  CHECK(one.image.size(0) == 1);

  auto ablated = g->forward(source, refs, torch::rand({2, 37}), torch::rand({2, 37}), DecoderOptions{true});
  CHECK(ablated.image.sizes() == out.image.sizes());
  CHECK_THROWS_AS(g->forward(torch::rand({2, 1, 64, 64}), refs, torch::rand({2, 37}), torch::rand({2, 37})), Error);
}

TEST_CASE("generator initialisation keeps the tanh head out of saturation") {
  torch::manual_seed(0);
  Generator g(ModelConfig{});
  torch::NoGradGuard guard;
  auto out = g->forward(torch::rand({2, 1, 64, 64}) * 2 - 1, torch::rand({2, 4, 64, 64}) * 2 - 1,
                        torch::rand({2, 37}), torch::rand({2, 37}));
  const double saturated = (out.image.abs() > 0.99).to(torch::kFloat32).mean().item<double>();
  CHECK(saturated < 0.05);
}

TEST_CASE("discriminator heads") {
  const auto cfg = tiny_config();
  Discriminator d(cfg);
  auto out = d->forward(torch::rand({3, 1, 32, 32}));
  CHECK(out.p_real.sizes() == torch::IntArrayRef({3}));
  CHECK(out.attr_pred.sizes() == torch::IntArrayRef({3, 37}));
  CHECK(out.p_real.min().item<float>() > 0.0f);
  CHECK(out.p_real.max().item<float>() < 1.0f);
  CHECK_THROWS_AS(d->forward(torch::rand({3, 2, 32, 32})), Error);
}
