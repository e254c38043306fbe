#include "attr2font/service.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "attr2font/error.hpp"
#include "attr2font/image.hpp"

using nlohmann::json;

namespace attr2font {

namespace {

ServiceResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", code}, {"message", message}}};
}

std::string png_base64(const torch::Tensor& pixels) { return base64_encode(encode_png_gray(pixels)); }

}  // namespace

struct InferenceService::Http {
  httplib::Server server;
};

InferenceService::InferenceService() : http_(std::make_unique<Http>()) {
  auto& server = http_->server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto out = handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(R"(/api/.*)", route);
  server.Post(R"(/api/.*)", route);
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

InferenceService::~InferenceService() { stop(); }

void InferenceService::load(std::unique_ptr<ModelState> state, std::unique_ptr<FontDataset> dataset,
                            uint64_t checkpoint_hash, std::optional<std::string> source_font) {
  auto engine = std::make_unique<InferenceEngine>(*state, *dataset);
  source_font_ = source_font.value_or(engine->default_source_font());
  engine->font_index(source_font_);
  std::lock_guard lock(model_mutex_);
  state_ = std::move(state);
  dataset_ = std::move(dataset);
  engine_ = std::move(engine);
  checkpoint_hash_ = checkpoint_hash;
}

ServiceResponse InferenceService::handle(const std::string& method, const std::string& path,
                                         const std::string& body) const {
  const bool get = method == "GET", post = method == "POST";
  const bool known = (get && (path == "/api/attributes" || path == "/api/fonts" || path == "/api/health")) ||
                     (post && (path == "/api/generate" || path == "/api/interpolate"));
  if (!known) return error_response(404, "NotFound", method + " " + path + " is not an endpoint");
  if (!loaded()) return error_response(503, "ModelNotLoaded", "no checkpoint is loaded");
  try {
    if (path == "/api/attributes") {
      return {200, {{"attributes", attribute_names()}, {"version", attribute_vocabulary_version()}}};
    }
    if (path == "/api/fonts") return fonts();
    if (path == "/api/health") return health();
    json request;
    try {
      request = json::parse(body);
    } catch (const json::exception& e) {
      return error_response(400, "InvalidArgument", std::string("request body is not JSON: ") + e.what());
    }
    if (!request.is_object()) return error_response(400, "InvalidArgument", "request body must be a JSON object");
    return path == "/api/generate" ? generate(request) : interpolate(request);
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::Io ? 500 : 400;
    return error_response(status, to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "InvalidArgument", e.what());
  }
}

int64_t InferenceService::resolve_source(const json& request) const {
  if (!request.contains("source_font") || request["source_font"].is_null()) return engine_->font_index(source_font_);
  return engine_->font_index(request.at("source_font").get<std::string>());
}

int64_t InferenceService::resolve_char(const std::string& utf8) const {
  const auto cps = decode_utf8(utf8);
  if (cps.size() != 1) throw Error(ErrorCode::InvalidArgument, "'" + utf8 + "' is not a single character");
  const auto pos = dataset_->charset().find(cps[0]);
  if (pos == std::u32string::npos) throw Error(ErrorCode::InvalidArgument, "'" + utf8 + "' is not in the charset");
  return static_cast<int64_t>(pos);
}

ServiceResponse InferenceService::generate(const json& request) const {
  if (!request.contains("attributes")) throw Error(ErrorCode::BadAttributes, "missing 'attributes'");
  const auto target = attributes_from_json(request.at("attributes"));
  const auto source = resolve_source(request);
  std::vector<int64_t> chars;
  if (request.contains("chars") && !request["chars"].is_null()) {
    for (char32_t cp : decode_utf8(request.at("chars").get<std::string>())) {
      chars.push_back(resolve_char(encode_utf8(std::u32string(1, cp))));
    }
    if (chars.empty()) throw Error(ErrorCode::InvalidArgument, "'chars' is empty");
  } else {
    for (int64_t k = 0; k < dataset_->n_chars(); ++k) chars.push_back(k);
  }
  std::vector<torch::Tensor> glyphs;
  {
    std::lock_guard lock(model_mutex_);
    glyphs = engine_->synthesize_charset(source, target, chars);
  }
  json images = json::array();
  for (std::size_t i = 0; i < chars.size(); ++i) {
    images.push_back({{"char", encode_utf8(std::u32string(1, dataset_->charset()[chars[i]]))},
                      {"png", png_base64(glyphs[i])}});
  }
  const auto columns = std::min<int64_t>(static_cast<int64_t>(glyphs.size()), 13);
  return {200,
          {{"images", images},
           {"font_grid", png_base64(make_grid(glyphs, columns))},
           {"source_font", dataset_->font(source).font_id}}};
}

ServiceResponse InferenceService::interpolate(const json& request) const {
  for (const char* key : {"from", "to", "steps", "char"}) {
    if (!request.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing '") + key + "'");
  }
  const auto from = attributes_from_json(request.at("from"));
  const auto to = attributes_from_json(request.at("to"));
  if (!request.at("steps").is_number_integer()) throw Error(ErrorCode::InvalidArgument, "'steps' must be an integer");
  const auto steps = request.at("steps").get<int64_t>();
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "'steps' must be at least 2");
  if (steps > 101) throw Error(ErrorCode::InvalidArgument, "'steps' must be at most 101");
  const auto k = resolve_char(request.at("char").get<std::string>());
  const auto source = resolve_source(request);
  json images = json::array();
  for (double lambda : interpolation_grid(steps)) {
    torch::Tensor glyph;
    {
      std::lock_guard lock(model_mutex_);
      glyph = engine_->synthesize_char(source, k, interpolate_attributes(from, to, lambda));
    }
    images.push_back({{"lambda", lambda}, {"png", png_base64(glyph)}});
  }
  return {200, {{"images", images}, {"char", request.at("char")}, {"source_font", dataset_->font(source).font_id}}};
}

ServiceResponse InferenceService::fonts() const {
  json out = json::array();
  for (const auto& f : dataset_->fonts()) {
    out.push_back({{"id", f.font_id}, {"status", to_string(f.status)}, {"default", f.font_id == source_font_}});
  }
  return {200, {{"fonts", out}}};
}

ServiceResponse InferenceService::health() const {
  return {200,
          {{"status", "ok"},
           {"version", kServiceVersion},
           {"checkpoint_hash", fmt::format("{:016x}", checkpoint_hash_)},
           {"attribute_vocabulary_version", attribute_vocabulary_version()}}};
}

int InferenceService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    return bound;
  }
  if (!http_->server.bind_to_port(host, port)) throw Error(ErrorCode::Io, fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void InferenceService::listen() { http_->server.listen_after_bind(); }

void InferenceService::stop() {
  if (http_ && http_->server.is_running()) http_->server.stop();
}

}  // namespace attr2font
