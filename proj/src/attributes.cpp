#include "attr2font/attributes.hpp"

#include <algorithm>
#include <sstream>

#include "attr2font/error.hpp"
#include "attribute_names_resource.hpp"

namespace attr2font {

namespace {

struct Vocabulary {
  int version = 0;
  std::vector<std::string> names;
};

const Vocabulary& vocabulary() {
  static const Vocabulary vocab = [] {
    Vocabulary v;
    std::istringstream in{std::string(kAttributeNamesResource)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line.front() == '#') {
        auto pos = line.find("version");
        if (pos != std::string::npos) v.version = std::stoi(line.substr(pos + 7));
        continue;
      }
      v.names.push_back(line);
    }
    return v;
  }();
  return vocab;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingGlyph: return "MissingGlyph";
    case ErrorCode::UnreadableFont: return "UnreadableFont";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::BadRowLength: return "BadRowLength";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DuplicateFontId: return "DuplicateFontId";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InconsistentCharset: return "InconsistentCharset";
    case ErrorCode::NoFonts: return "NoFonts";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroSize: return "ZeroSize";
    case ErrorCode::WrongRefCount: return "WrongRefCount";
    case ErrorCode::WrongResolution: return "WrongResolution";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::BadAttributes: return "BadAttributes";
    case ErrorCode::UnknownFont: return "UnknownFont";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

const std::vector<std::string>& attribute_names() { return vocabulary().names; }

int attribute_vocabulary_version() { return vocabulary().version; }

std::optional<std::size_t> attribute_index(std::string_view name) {
  const auto& names = attribute_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

AttributeVector::AttributeVector(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0f && values_[i] <= 1.0f)) {
      throw Error(ErrorCode::ValueOutOfRange,
                  "attribute " + std::to_string(i) + " = " + std::to_string(values_[i]) +
                      " outside [0,1]");
    }
  }
}

AttributeVector AttributeVector::filled(std::size_t n, float value) {
  return AttributeVector(std::vector<float>(n, value));
}

AttributeVector AttributeVector::from_tensor(const torch::Tensor& t) {
  auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous().reshape({-1});
  const float* p = flat.data_ptr<float>();
  return AttributeVector(std::vector<float>(p, p + flat.numel()));
}

torch::Tensor AttributeVector::to_tensor() const {
  return torch::tensor(std::vector<float>(values_.begin(), values_.end()), torch::kFloat32);
}

AttributeVector attributes_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadAttributes, "attributes must be a JSON object");
  const auto& names = attribute_names();
  std::vector<std::string> missing, extra, bad;
  std::vector<float> values(names.size(), 0.0f);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = j.find(names[i]);
    if (it == j.end()) {
      missing.push_back(names[i]);
      continue;
    }
    if (!it->is_number()) {
      bad.push_back(names[i]);
      continue;
    }
    double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
      bad.push_back(names[i]);
      continue;
    }
    values[i] = static_cast<float>(v);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!attribute_index(it.key())) extra.push_back(it.key());
  }
  if (!missing.empty() || !extra.empty() || !bad.empty()) {
    std::string msg;
    auto append = [&msg](const char* label, const std::vector<std::string>& v) {
      if (v.empty()) return;
      if (!msg.empty()) msg += "; ";
      msg += label;
      for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : " ") + v[i];
    };
    append("missing:", missing);
    append("unknown:", extra);
    append("out of range or not a number:", bad);
    throw Error(ErrorCode::BadAttributes, msg);
  }
  return AttributeVector(std::move(values));
}

nlohmann::json attributes_to_json(const AttributeVector& a) {
  const auto& names = attribute_names();
  if (a.size() != names.size()) {
    throw Error(ErrorCode::ShapeMismatch, "attribute vector length " + std::to_string(a.size()) +
                                              " does not match vocabulary size " +
                                              std::to_string(names.size()));
  }
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = a[i];
  return j;
}

}  // namespace attr2font
