#include <doctest.h>

#include <thread>

#include "attr2font/model_state.hpp"
#include "attr2font/service.hpp"
#include "support.hpp"

// Last: resolv.h, pulled in by httplib, defines a `_res` macro that breaks Eigen.
#include <httplib.h>

using namespace attr2font;
using namespace testing_support;
using nlohmann::json;

namespace {

struct Loaded {
  TempDir dir{"service"};
  InferenceService service;

  Loaded() {
    torch::set_num_threads(1);
    write_fixture(dir.path(), semi_supervised_fonts(), 32);
    auto data = std::make_unique<FontDataset>(FontDataset::load(dir.path()));
    auto state = make_model_state(*data, dir.path().string(), tiny_config(), TrainConfig{});
    service.load(std::move(state), std::move(data), 0xabcdefULL);
  }
};

json attrs(float v) {
  json j;
  for (const auto& n : attribute_names()) j[n] = v;
  return j;
}

}  // namespace

TEST_CASE("routing and status codes") {
  InferenceService empty;
  CHECK(empty.handle("GET", "/api/attributes", "").status == 503);
  CHECK(empty.handle("GET", "/api/nowhere", "").status == 404);
  Loaded l;
  CHECK(l.service.handle("GET", "/api/nowhere", "").status == 404);
  CHECK(l.service.handle("GET", "/api/generate", "").status == 404);
  CHECK(l.service.handle("POST", "/api/generate", "{not json").status == 400);
  CHECK(l.service.handle("POST", "/api/generate", "[]").status == 400);
}

TEST_CASE("health and fonts") {
  Loaded l;
  const auto h = l.service.handle("GET", "/api/health", "");
  CHECK(h.status == 200);
  CHECK(h.body["version"] == kServiceVersion);
  CHECK(h.body["checkpoint_hash"] == "0000000000abcdef");
  const auto f = l.service.handle("GET", "/api/fonts", "");
  REQUIRE(f.body["fonts"].size() == 3);
  CHECK(f.body["fonts"][0]["default"] == true);
  CHECK(f.body["fonts"][2]["status"] == "unlabeled");
}

TEST_CASE("generate request options") {
  Loaded l;
  const auto r = l.service.handle("POST", "/api/generate", json{{"attributes", attrs(0.4f)}, {"chars", "TA"}}.dump());
  REQUIRE(r.status == 200);
  CHECK(r.body["images"].size() == 2);
  CHECK(r.body["images"][0]["char"] == "T");
  CHECK(r.body["source_font"] == "semi_a");
  const auto other = l.service.handle(
      "POST", "/api/generate", json{{"attributes", attrs(0.4f)}, {"source_font", "semi_b"}}.dump());
  CHECK(other.body["source_font"] == "semi_b");
  CHECK(l.service.handle("POST", "/api/generate", json{{"attributes", attrs(0.4f)}, {"chars", "?"}}.dump()).status ==
        400);
  CHECK(l.service.handle("POST", "/api/generate", json{{"attributes", attrs(0.4f)}, {"source_font", "x"}}.dump())
            .status == 400);
  CHECK(l.service.handle("POST", "/api/generate", json{{"chars", "A"}}.dump()).status == 400);
}

TEST_CASE("interpolate request validation") {
  Loaded l;
  auto req = json{{"from", attrs(0.1f)}, {"to", attrs(0.9f)}, {"steps", 3}, {"char", "E"}};
  const auto r = l.service.handle("POST", "/api/interpolate", req.dump());
  REQUIRE(r.status == 200);
  CHECK(r.body["images"].size() == 3);
  CHECK(r.body["images"][1]["lambda"].get<double>() == doctest::Approx(0.5));
  for (auto steps : {json(1), json(102), json(2.5)}) {
    req["steps"] = steps;
    CHECK(l.service.handle("POST", "/api/interpolate", req.dump()).status == 400);
  }
  req.erase("steps");
  CHECK(l.service.handle("POST", "/api/interpolate", req.dump()).status == 400);
}

TEST_CASE("HTTP transport and CORS") {
  Loaded l;
  const int port = l.service.bind("127.0.0.1", 0);
  std::thread server([&] { l.service.listen(); });
  httplib::Client client("127.0.0.1", port);
  auto r = client.Get("/api/attributes");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  auto pre = client.Options("/api/generate");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  auto missing = client.Get("/elsewhere");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  l.service.stop();
  server.join();
}
