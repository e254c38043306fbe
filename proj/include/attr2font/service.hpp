#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "attr2font/dataset.hpp"
#include "attr2font/inference.hpp"
#include "attr2font/model_state.hpp"

namespace attr2font {

inline constexpr const char* kServiceVersion = "attr2font/1.0";

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP inference API over one loaded checkpoint. Request handling is a pure
/// function of (checkpoint, request); model access is serialized.
class InferenceService {
 public:
  InferenceService();
  ~InferenceService();

  void load(std::unique_ptr<ModelState> state, std::unique_ptr<FontDataset> dataset, uint64_t checkpoint_hash,
            std::optional<std::string> source_font = std::nullopt);
  bool loaded() const { return engine_ != nullptr; }

  /// Dispatches one request without any socket involved.
  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  /// Binds to host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  ServiceResponse generate(const nlohmann::json& request) const;
  ServiceResponse interpolate(const nlohmann::json& request) const;
  ServiceResponse health() const;
  ServiceResponse fonts() const;
  int64_t resolve_source(const nlohmann::json& request) const;
  int64_t resolve_char(const std::string& utf8) const;

  std::unique_ptr<ModelState> state_;
  std::unique_ptr<FontDataset> dataset_;
  std::unique_ptr<InferenceEngine> engine_;
  uint64_t checkpoint_hash_ = 0;
  std::string source_font_;
  mutable std::mutex model_mutex_;

  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace attr2font
