#include "attr2font/model_state.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "attr2font/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace attr2font {

namespace {

constexpr char kMagic[8] = {'A', '2', 'F', 'C', 'K', 'P', 'T', '\0'};

uint64_t fnv1a(const char* data, std::size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

enum class DType : uint8_t { Float32 = 0, Float64 = 1, Int64 = 2, UInt8 = 3 };

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::Float32;
    case torch::kFloat64: return DType::Float64;
    case torch::kInt64: return DType::Int64;
    case torch::kUInt8: return DType::UInt8;
    default: throw Error(ErrorCode::InvalidArgument, "unsupported tensor type in checkpoint");
  }
}

torch::ScalarType scalar_type(DType d) {
  switch (d) {
    case DType::Float32: return torch::kFloat32;
    case DType::Float64: return torch::kFloat64;
    case DType::Int64: return torch::kInt64;
    case DType::UInt8: return torch::kUInt8;
  }
  throw Error(ErrorCode::CorruptCheckpoint, "unknown tensor type");
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    put<uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    str(name);
    put<uint8_t>(static_cast<uint8_t>(dtype_of(c)));
    put<uint32_t>(static_cast<uint32_t>(c.dim()));
    for (auto s : c.sizes()) put<int64_t>(s);
    const std::size_t n = c.numel() * c.element_size();
    put<uint64_t>(n);
    bytes(c.data_ptr(), n);
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* p, std::size_t n) : p_(p), n_(n) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > n_ - pos_) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
    const char* at = p_ + pos_;
    pos_ += n;
    return at;
  }
  std::string str() {
    const auto n = get<uint64_t>();
    return std::string(take(n), n);
  }
  torch::Tensor tensor(std::string& name) {
    name = str();
    const auto type = scalar_type(static_cast<DType>(get<uint8_t>()));
    const auto dims = get<uint32_t>();
    if (dims > 8) throw Error(ErrorCode::CorruptCheckpoint, "tensor rank out of range");
    std::vector<int64_t> shape(dims);
    int64_t numel = 1;
    for (auto& s : shape) {
      s = get<int64_t>();
      if (s < 0) throw Error(ErrorCode::CorruptCheckpoint, "negative tensor extent");
      numel *= s;
    }
    const auto n = get<uint64_t>();
    auto t = torch::empty(shape, type);
    if (n != static_cast<uint64_t>(numel) * t.element_size()) {
      throw Error(ErrorCode::CorruptCheckpoint, "tensor '" + name + "' has inconsistent byte length");
    }
    std::memcpy(t.data_ptr(), take(n), n);
    return t;
  }
  bool done() const { return pos_ == n_; }

 private:
  const char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::vector<uint32_t> structural_header(const ModelConfig& c) {
  return {static_cast<uint32_t>(c.n_attrs), static_cast<uint32_t>(c.n_embed),    static_cast<uint32_t>(c.n_chars),
          static_cast<uint32_t>(c.resolution), static_cast<uint32_t>(c.m), static_cast<uint32_t>(c.levels),
          static_cast<uint32_t>(c.n_res_blocks)};
}

void write_optimizer(Writer& w, const std::string& prefix, torch::optim::Adam& opt,
                     const std::vector<std::pair<std::string, torch::Tensor>>& params) {
  auto& state = opt.state();
  for (const auto& [name, p] : params) {
    auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) continue;
    auto& s = static_cast<torch::optim::AdamParamState&>(*it->second);
    w.tensor(prefix + name + ".exp_avg", s.exp_avg());
    w.tensor(prefix + name + ".exp_avg_sq", s.exp_avg_sq());
    w.tensor(prefix + name + ".step", torch::tensor(s.step(), torch::kInt64));
  }
}

void read_optimizer(std::map<std::string, torch::Tensor>& tensors, const std::string& prefix,
                    torch::optim::Adam& opt, const std::vector<std::pair<std::string, torch::Tensor>>& params) {
  for (const auto& [name, p] : params) {
    auto m = tensors.find(prefix + name + ".exp_avg");
    if (m == tensors.end()) continue;
    auto v = tensors.find(prefix + name + ".exp_avg_sq");
    auto s = tensors.find(prefix + name + ".step");
    if (v == tensors.end() || s == tensors.end() || m->second.sizes() != p.sizes() ||
        v->second.sizes() != p.sizes()) {
      throw Error(ErrorCode::CorruptCheckpoint, "incomplete optimizer state for '" + name + "'");
    }
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(s->second.item<int64_t>());
    st->exp_avg(m->second);
    st->exp_avg_sq(v->second);
    opt.state()[p.unsafeGetTensorImpl()] = std::move(st);
    tensors.erase(m);
    tensors.erase(v);
    tensors.erase(s);
  }
}

std::vector<std::pair<std::string, torch::Tensor>> ordered_parameters(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : m.named_parameters()) out.emplace_back(item.key(), item.value());
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> ordered_buffers(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : m.named_buffers()) out.emplace_back(item.key(), item.value());
  return out;
}

void copy_into(std::map<std::string, torch::Tensor>& tensors, const std::string& name, torch::Tensor& dst) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint lacks '" + name + "'");
  if (it->second.sizes() != dst.sizes() || it->second.scalar_type() != dst.scalar_type()) {
    throw Error(ErrorCode::CorruptCheckpoint, "'" + name + "' has the wrong shape or type");
  }
  torch::NoGradGuard guard;
  dst.copy_(it->second);
  tensors.erase(it);
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

DatasetInfo DatasetInfo::from(const FontDataset& dataset, const std::string& data_dir) {
  DatasetInfo info;
  info.data_dir = data_dir;
  info.charset = encode_utf8(dataset.charset());
  for (const auto& f : dataset.fonts()) info.font_ids.push_back(f.font_id);
  for (int64_t i : dataset.labeled()) info.labeled_ids.push_back(dataset.font(i).font_id);
  info.default_source_font = info.labeled_ids.empty() ? std::string() : info.labeled_ids.front();
  return info;
}

ModelState::ModelState(const ModelConfig& model, const TrainConfig& train, DatasetInfo info, int64_t n_unlabeled)
    : model_config(model), train_config(train), dataset(std::move(info)), rng(train.seed) {
  model.validate();
  train.validate();
  torch::manual_seed(train.seed);
  generator = Generator(model);
  discriminator = Discriminator(model);
  std::mt19937_64 pseudo_rng(train.seed ^ 0x9e3779b97f4a7c15ULL);
  pseudo = PseudoAttributeStore::initialize(pseudo_rng, n_unlabeled, model.n_attrs);
  rebuild_optimizers();
}

void ModelState::rebuild_optimizers() {
  auto options = torch::optim::AdamOptions(train_config.lr).betas({train_config.beta1, train_config.beta2});
  generator_optimizer = std::make_unique<torch::optim::Adam>(generator->parameters(), options);
  discriminator_optimizer = std::make_unique<torch::optim::Adam>(discriminator->parameters(), options);
}

void ModelState::set_train_config(const TrainConfig& train) {
  train.validate();
  train_config = train;
  for (auto* opt : {generator_optimizer.get(), discriminator_optimizer.get()}) {
    for (auto& group : opt->param_groups()) {
      auto& o = static_cast<torch::optim::AdamOptions&>(group.options());
      o.lr(train.lr);
      o.betas({train.beta1, train.beta2});
    }
  }
}

std::unique_ptr<ModelState> make_model_state(const FontDataset& dataset, const std::string& data_dir,
                                             const ModelConfig& model, const TrainConfig& train) {
  if (model.n_chars != dataset.n_chars()) {
    throw Error(ErrorCode::ConfigMismatch,
                fmt::format("model expects {} characters, dataset has {}", model.n_chars, dataset.n_chars()));
  }
  if (model.resolution != dataset.resolution()) {
    throw Error(ErrorCode::ConfigMismatch, "model and dataset resolutions differ");
  }
  auto state = std::make_unique<ModelState>(model, train, DatasetInfo::from(dataset, data_dir),
                                            static_cast<int64_t>(dataset.unlabeled().size()));
  for (int64_t i : dataset.labeled()) {
    const auto& a = *dataset.font(i).attributes;
    if (static_cast<int64_t>(a.size()) != model.n_attrs) {
      throw Error(ErrorCode::ConfigMismatch, "annotation width differs from the model's attribute count");
    }
    state->labeled_attributes.push_back(a);
  }
  return state;
}

void save_checkpoint(const ModelState& state, const fs::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<uint32_t>(kCheckpointFormatVersion);
  for (uint32_t v : structural_header(state.model_config)) w.put<uint32_t>(v);

  json meta;
  meta["model"] = state.model_config;
  meta["train"] = state.train_config;
  meta["data_dir"] = state.dataset.data_dir;
  meta["charset"] = state.dataset.charset;
  meta["font_ids"] = state.dataset.font_ids;
  meta["labeled_ids"] = state.dataset.labeled_ids;
  meta["default_source_font"] = state.dataset.default_source_font;
  meta["epoch"] = state.epoch;
  meta["step"] = state.step;
  meta["rng"] = rng_state(state.rng);
  w.str(meta.dump());

  const auto g_params = ordered_parameters(*state.generator);
  const auto d_params = ordered_parameters(*state.discriminator);
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  for (const auto& [n, t] : g_params) tensors.emplace_back("G." + n, t);
  for (const auto& [n, t] : ordered_buffers(*state.generator)) tensors.emplace_back("G.buffer." + n, t);
  for (const auto& [n, t] : d_params) tensors.emplace_back("D." + n, t);
  for (const auto& [n, t] : ordered_buffers(*state.discriminator)) tensors.emplace_back("D.buffer." + n, t);
  tensors.emplace_back("pseudo.logits", state.pseudo.logits());
  tensors.emplace_back("pseudo.exp_avg", state.pseudo.exp_avg());
  tensors.emplace_back("pseudo.exp_avg_sq", state.pseudo.exp_avg_sq());
  tensors.emplace_back("pseudo.steps", state.pseudo.steps());
  std::vector<torch::Tensor> labeled;
  for (const auto& a : state.labeled_attributes) labeled.push_back(a.to_tensor());
  tensors.emplace_back("labeled.attributes", labeled.empty()
                                                 ? torch::zeros({0, state.model_config.n_attrs})
                                                 : torch::stack(labeled));

  Writer body;
  for (const auto& [n, t] : tensors) body.tensor(n, t);
  write_optimizer(body, "optG.", *state.generator_optimizer, g_params);
  write_optimizer(body, "optD.", *state.discriminator_optimizer, d_params);
  w.put<uint64_t>(body.buffer().size());
  w.bytes(body.buffer().data(), body.buffer().size());
  const uint64_t hash = fnv1a(w.buffer().data(), w.buffer().size());
  w.put<uint64_t>(hash);

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::unique_ptr<ModelState> load_impl(const fs::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) + 8 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + " is not a checkpoint");
  }
  uint64_t stored_hash;
  std::memcpy(&stored_hash, data.data() + data.size() - 8, 8);
  if (fnv1a(data.data(), data.size() - 8) != stored_hash) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + " fails its integrity check");
  }
  Reader r(data.data() + sizeof(kMagic), data.size() - sizeof(kMagic) - 8);
  const auto version = r.get<uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::CorruptCheckpoint, fmt::format("unsupported checkpoint format {}", version));
  }
  std::vector<uint32_t> header(7);
  for (auto& v : header) v = r.get<uint32_t>();

  json meta;
  try {
    meta = json::parse(r.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("bad metadata: ") + e.what());
  }
  ModelConfig model;
  TrainConfig train;
  DatasetInfo info;
  try {
    model = meta.at("model").get<ModelConfig>();
    train = meta.at("train").get<TrainConfig>();
    info.data_dir = meta.at("data_dir").get<std::string>();
    info.charset = meta.at("charset").get<std::string>();
    info.font_ids = meta.at("font_ids").get<std::vector<std::string>>();
    info.labeled_ids = meta.at("labeled_ids").get<std::vector<std::string>>();
    info.default_source_font = meta.at("default_source_font").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("bad metadata: ") + e.what());
  }
  if (structural_header(model) != header) {
    throw Error(ErrorCode::CorruptCheckpoint, "header disagrees with the stored configuration");
  }
  if (expected) {
    const auto want = structural_header(*expected);
    static const char* names[] = {"N_a", "N_e", "N_c", "resolution", "m", "L", "N_rb"};
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (want[i] != header[i]) {
        throw Error(ErrorCode::ConfigMismatch,
                    fmt::format("checkpoint has {} = {}, expected {}", names[i], header[i], want[i]));
      }
    }
  }

  const auto body_size = r.get<uint64_t>();
  Reader body(r.take(body_size), body_size);
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after tensor section");
  std::map<std::string, torch::Tensor> tensors;
  while (!body.done()) {
    std::string name;
    auto t = body.tensor(name);
    if (!tensors.emplace(name, t).second) throw Error(ErrorCode::CorruptCheckpoint, "duplicate tensor " + name);
  }

  auto logits = tensors.find("pseudo.logits");
  if (logits == tensors.end() || logits->second.dim() != 2) {
    throw Error(ErrorCode::CorruptCheckpoint, "checkpoint lacks pseudo-attributes");
  }
  auto state = std::make_unique<ModelState>(model, train, info, logits->second.size(0));
  state->epoch = meta.value("epoch", int64_t{0});
  state->step = meta.value("step", int64_t{0});
  std::istringstream rng_in(meta.value("rng", std::string()));
  rng_in >> state->rng;
  if (!rng_in) throw Error(ErrorCode::CorruptCheckpoint, "bad sampler state");

  auto g_params = ordered_parameters(*state->generator);
  auto d_params = ordered_parameters(*state->discriminator);
  for (auto& [n, t] : g_params) copy_into(tensors, "G." + n, t);
  for (auto& [n, t] : ordered_buffers(*state->generator)) copy_into(tensors, "G.buffer." + n, t);
  for (auto& [n, t] : d_params) copy_into(tensors, "D." + n, t);
  for (auto& [n, t] : ordered_buffers(*state->discriminator)) copy_into(tensors, "D.buffer." + n, t);
  copy_into(tensors, "pseudo.logits", state->pseudo.logits());
  copy_into(tensors, "pseudo.exp_avg", state->pseudo.exp_avg());
  copy_into(tensors, "pseudo.exp_avg_sq", state->pseudo.exp_avg_sq());
  copy_into(tensors, "pseudo.steps", state->pseudo.steps());

  auto labeled = tensors.find("labeled.attributes");
  if (labeled == tensors.end() || labeled->second.dim() != 2 ||
      labeled->second.size(0) != static_cast<int64_t>(info.labeled_ids.size()) ||
      labeled->second.size(1) != model.n_attrs) {
    throw Error(ErrorCode::CorruptCheckpoint, "labeled attribute table is missing or malformed");
  }
  for (int64_t i = 0; i < labeled->second.size(0); ++i) {
    state->labeled_attributes.push_back(AttributeVector::from_tensor(labeled->second[i]));
  }
  tensors.erase(labeled);

  read_optimizer(tensors, "optG.", *state->generator_optimizer, g_params);
  read_optimizer(tensors, "optD.", *state->discriminator_optimizer, d_params);
  if (!tensors.empty()) {
    throw Error(ErrorCode::CorruptCheckpoint, "unexpected tensor '" + tensors.begin()->first + "'");
  }
  return state;
}

}  // namespace

std::unique_ptr<ModelState> load_checkpoint(const fs::path& path) { return load_impl(path, nullptr); }

std::unique_ptr<ModelState> load_checkpoint(const fs::path& path, const ModelConfig& expected) {
  return load_impl(path, &expected);
}

uint64_t file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace attr2font
