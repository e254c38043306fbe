#include <doctest.h>

#include <functional>
#include <fstream>
#include <set>

#include "attr2font/dataset.hpp"
#include "attr2font/error.hpp"
#include "attr2font/pseudo_attributes.hpp"
#include "attr2font/trainer.hpp"
#include "support.hpp"

using namespace attr2font;
using namespace testing_support;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("UTF-8 round trip") {
  const std::string s = "Aé€😀";
  const auto cps = decode_utf8(s);
  REQUIRE(cps.size() == 4);
  CHECK(cps[1] == U'é');
  CHECK(cps[3] == U'\U0001F600');
  CHECK(encode_utf8(cps) == s);
  CHECK_THROWS_AS(decode_utf8("\xC3"), Error);
}

TEST_CASE("annotation CSV parsing") {
  TempDir dir("csv");
  const auto p = dir.path() / "a.csv";
  write_text(p, "font_id,x,y,z\nb,10,20,30\na,0,100,50\n");
  const auto ann = load_attribute_annotations(p, 3);
  REQUIRE(ann.size() == 2);
  CHECK(ann.at("b")[1] == doctest::Approx(0.2f));
  CHECK(ann.at("a")[1] == 1.0f);

  write_text(p, "font_id,x,y,z\nb,10,20\n");
  CHECK(code_of([&] { load_attribute_annotations(p, 3); }) == ErrorCode::BadRowLength);
  write_text(p, "font_id,x,y,z\nb,10,20,101\n");
  CHECK(code_of([&] { load_attribute_annotations(p, 3); }) == ErrorCode::OutOfRange);
  write_text(p, "font_id,x,y,z\nb,10,abc,1\n");
  CHECK(code_of([&] { load_attribute_annotations(p, 3); }) == ErrorCode::OutOfRange);
  write_text(p, "font_id,x,y,z\nb,1,2,3\nb,1,2,3\n");
  CHECK(code_of([&] { load_attribute_annotations(p, 3); }) == ErrorCode::DuplicateFontId);
}

TEST_CASE("dataset layout load/save round trip") {
  TempDir dir("ds");
  write_fixture(dir.path() / "a", semi_supervised_fonts(), 32);
  write_text(dir.path() / "a" / "validation.txt", "semi_b\n");
  const auto ds = FontDataset::load(dir.path() / "a");
  CHECK(ds.size() == 3);
  CHECK(ds.n_chars() == 10);
  CHECK(ds.resolution() == 32);
  CHECK(ds.labeled() == std::vector<int64_t>{0, 1});
  CHECK(ds.unlabeled() == std::vector<int64_t>{2});
  CHECK(ds.font(2).pseudo_row == 0);
  CHECK(ds.validation() == std::vector<int64_t>{1});
  CHECK(ds.index_of("semi_u") == 2);

  ds.save(dir.path() / "b");
  const auto again = FontDataset::load(dir.path() / "b");
  REQUIRE(again.size() == ds.size());
  for (int64_t f = 0; f < ds.size(); ++f) {
    CHECK(torch::equal(again.font(f).glyph_bytes, ds.font(f).glyph_bytes));
    CHECK(again.font(f).attributes == ds.font(f).attributes);
  }
  CHECK(again.validation_ids() == ds.validation_ids());
}

TEST_CASE("dataset errors") {
  TempDir dir("dserr");
  write_fixture(dir.path(), desk_fonts(), 32);
  fs::remove(dir.path() / "images" / "desk_heavy" / "7.png");
  CHECK(code_of([&] { FontDataset::load(dir.path()); }) == ErrorCode::InconsistentCharset);
  CHECK(code_of([&] { FontDataset::load(dir.path() / "nothing"); }) == ErrorCode::Io);
}

TEST_CASE("attribute lookup for labeled and unlabeled fonts") {
  TempDir dir("attrs");
  write_fixture(dir.path(), semi_supervised_fonts(), 32);
  const auto ds = FontDataset::load(dir.path());
  CHECK(ds.attribute_tensor(0, nullptr).size(0) == 37);
  CHECK_THROWS_AS(ds.attribute_tensor(2, nullptr), Error);
  PseudoAttributeStore store(1, 37);
  const auto v = ds.attribute_tensor(2, &store);
  CHECK(v.requires_grad());
  CHECK(torch::allclose(v, torch::full({37}, 0.5f)));
}

TEST_CASE("build from glyph folders and font files") {
  TempDir dir("build");
  write_fixture(dir.path() / "src", desk_fonts(), 64, 3);
  const auto ds = build_dataset(dir.path() / "src" / "images", dir.path() / "src" / "attributes.csv", "AEF", 32);
  CHECK(ds.size() == 2);
  CHECK(ds.resolution() == 32);
  CHECK(ds.labeled().size() == 2);

  const fs::path ttf = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf";
  if (fs::exists(ttf)) {
    fs::create_directories(dir.path() / "ttf");
    fs::copy_file(ttf, dir.path() / "ttf" / "sans.ttf");
    const auto rendered = build_dataset(dir.path() / "ttf", std::nullopt, "AB", 64);
    CHECK(rendered.font(0).font_id == "sans");
    CHECK(rendered.unlabeled().size() == 1);
    CHECK(rendered.font(0).glyph_bytes.sizes() == torch::IntArrayRef({2, 64, 64}));
    CHECK(code_of([&] { build_dataset(dir.path() / "ttf", std::nullopt, "A\u4E00", 64); }) ==
          ErrorCode::InconsistentCharset);
  }
}

TEST_CASE("pair sampler contract") {
  PairSampler only_labeled({0, 1, 2}, {}, 10, 4);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto d = only_labeled.draw(rng);
    CHECK(d.target < 3);
    std::set<int64_t> refs(d.refs.begin(), d.refs.end());
    CHECK(refs.size() == 4);
  }
  PairSampler all_refs({0}, {1}, 4, 4);
  const auto d = all_refs.draw(rng);
  CHECK(std::set<int64_t>(d.refs.begin(), d.refs.end()).size() == 4);
  CHECK(code_of([] { PairSampler({}, {1}, 4, 2); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] { PairSampler({0}, {}, 4, 5); }) == ErrorCode::WrongRefCount);

  std::mt19937_64 a(11), b(11);
  for (int i = 0; i < 20; ++i) {
    const auto x = only_labeled.draw(a), y = only_labeled.draw(b);
    CHECK(x.refs == y.refs);
    CHECK(x.k == y.k);
  }
}

TEST_CASE("collate builds aligned batch tensors") {
  TempDir dir("collate");
  write_fixture(dir.path(), semi_supervised_fonts(), 32);
  const auto ds = FontDataset::load(dir.path());
  PseudoAttributeStore store(1, 37);
  const auto batch = collate(ds, {{0, 2, 3, {1, 4}}, {1, 0, 5, {0, 9}}}, store);
  CHECK(batch.source.sizes() == torch::IntArrayRef({2, 1, 32, 32}));
  CHECK(batch.refs.sizes() == torch::IntArrayRef({2, 2, 32, 32}));
  CHECK(torch::equal(batch.target[0][0], ds.font(2).glyph(3)));
  CHECK(torch::equal(batch.refs[1][1], ds.font(1).glyph(9)));  // references come from the source font
  CHECK(batch.chars[0].item<int64_t>() == 3);
  CHECK(batch.chars[1].item<int64_t>() == 5);
  CHECK(batch.pseudo_rows == std::vector<int64_t>{0});
  CHECK(batch.alpha_b.requires_grad());
}
