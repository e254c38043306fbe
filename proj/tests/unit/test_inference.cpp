#include <doctest.h>

#include <random>

#include "attr2font/error.hpp"
#include "attr2font/inference.hpp"
#include "attr2font/model_state.hpp"
#include "support.hpp"

using namespace attr2font;
using namespace testing_support;

namespace {

struct Engine {
  TempDir dir{"infer"};
  FontDataset data;
  std::unique_ptr<ModelState> state;
  std::unique_ptr<InferenceEngine> engine;

  Engine() {
    torch::set_num_threads(1);
    write_fixture(dir.path(), semi_supervised_fonts(), 32);
    data = FontDataset::load(dir.path());
    state = make_model_state(data, dir.path().string(), tiny_config(), TrainConfig{});
    engine = std::make_unique<InferenceEngine>(*state, data);
  }
};

AttributeVector level(float v) { return AttributeVector::filled(37, v); }

}  // namespace

TEST_CASE("interpolation stays inside the segment") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_attributes(rng), b = random_attributes(rng);
    for (double lambda : interpolation_grid(7)) {
      const auto c = interpolate_attributes(a, b, lambda);
      for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i] >= std::min(a[i], b[i]));
        CHECK(c[i] <= std::max(a[i], b[i]));
      }
    }
  }
  CHECK_THROWS_AS(interpolate_attributes(level(0), level(1), -0.01), Error);
  CHECK_THROWS_AS(interpolate_attributes(level(0), AttributeVector::filled(3, 0), 0.5), Error);
  CHECK_THROWS_AS(interpolation_grid(1), Error);
}

TEST_CASE("attribute editing errors") {
  CHECK_THROWS_WITH_AS(edit_attribute(level(0.5f), 37, 0.5), doctest::Contains("IndexOutOfRange"), Error);
  CHECK_THROWS_WITH_AS(edit_attribute(level(0.5f), 3, 1.5), doctest::Contains("ValueOutOfRange"), Error);
}

TEST_CASE("style references avoid the target character") {
  CHECK(inference_style_refs(0, 10, 4) == std::vector<int64_t>{1, 2, 3, 4});
  CHECK(inference_style_refs(2, 10, 4) == std::vector<int64_t>{0, 1, 3, 4});
  const auto tiny = inference_style_refs(0, 2, 2);
  CHECK(tiny.size() == 2);
}

TEST_CASE("source font selection") {
  const std::vector<std::string> ids = {"b", "a", "c"};
  const std::vector<AttributeVector> attrs = {level(0.5f), level(0.5f), level(0.9f)};
  CHECK(select_source_font(ids, attrs, level(0.45f), SourcePolicy::Nearest) == "a");
  CHECK(select_source_font(ids, attrs, level(0.8f), SourcePolicy::Nearest) == "c");
  CHECK(select_source_font(ids, attrs, level(0.1f), SourcePolicy::Fixed, "c") == "c");
  CHECK_THROWS_WITH_AS(select_source_font(ids, attrs, level(0.1f), SourcePolicy::Fixed, "zz"),
                       doctest::Contains("UnknownFont"), Error);
  CHECK_THROWS_WITH_AS(select_source_font({}, {}, level(0.1f), SourcePolicy::Nearest),
                       doctest::Contains("EmptyDataset"), Error);
}

TEST_CASE("engine synthesis is deterministic and consistent") {
  Engine e;
  CHECK(e.engine->default_source_font() == "semi_a");
  const auto target = level(0.3f);
  const auto a = e.engine->synthesize_char(0, 4, target);
  const auto b = e.engine->synthesize_char(0, 4, target);
  CHECK(a.sizes() == torch::IntArrayRef({32, 32}));
  CHECK(torch::equal(a, b));
  const auto all = e.engine->synthesize_charset(0, target);
  CHECK(all.size() == 10);
  CHECK(torch::equal(all[4], a));
  const auto some = e.engine->synthesize_charset(0, target, {7, 1});
  CHECK(torch::equal(some[0], all[7]));
  const auto batch = e.engine->synthesize_batch(0, target);
  CHECK(batch.size(0) == 10);
  CHECK(torch::allclose(batch[4], a, 1e-4, 1e-4));
  CHECK_THROWS_AS(e.engine->font_index("missing"), Error);
  // Unlabeled fonts report their learned pseudo-attributes.
  CHECK(e.engine->font_attributes(2).size() == 37);
}

TEST_CASE("engine refuses a dataset the checkpoint was not trained on") {
  Engine e;
  TempDir other("infer_other");
  write_fixture(other.path(), desk_fonts(), 32);
  const auto data = FontDataset::load(other.path());
  CHECK_THROWS_WITH_AS(InferenceEngine(*e.state, data), doctest::Contains("ConfigMismatch"), Error);
}
