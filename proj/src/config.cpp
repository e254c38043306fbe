#include "attr2font/config.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

#include "attr2font/error.hpp"

namespace attr2font {

int64_t ModelConfig::content_channels(int64_t i) const {
  return std::min(max_channels, base_channels << (i - 1));
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(n_attrs > 0 && n_embed > 0 && n_chars > 0, "attribute, embedding and charset sizes must be positive");
  require(m > 0, "m must be positive");
  require(levels >= 2, "at least two scales are required");
  require(resolution > 0 && (resolution >> levels) >= 1 && (resolution % (int64_t{1} << levels)) == 0,
          "resolution must be divisible by 2^levels");
  require(disc_layers >= 1 && (resolution >> disc_layers) >= 1, "discriminator too deep for resolution");
  require(n_res_blocks >= 0 && style_dim > 0 && base_channels > 0 && style_base_channels > 0 &&
              disc_base_channels > 0 && max_channels >= base_channels,
          "layer widths must be positive");
  require(attention_ratio >= 1, "attention ratio must be >= 1");
}

void LossWeights::validate() const {
  for (double w : {adversarial, pixel, character, contextual, attribute}) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || batch_size <= 0 || epochs <= 0) {
    throw Error(ErrorCode::InvalidArgument, "lr, batch size and epochs must be positive");
  }
  if (checkpoint_every <= 0) throw Error(ErrorCode::InvalidArgument, "checkpoint_every must be positive");
  lambdas.validate();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"n_attrs", c.n_attrs},
       {"n_embed", c.n_embed},
       {"n_chars", c.n_chars},
       {"resolution", c.resolution},
       {"m", c.m},
       {"levels", c.levels},
       {"n_res_blocks", c.n_res_blocks},
       {"style_dim", c.style_dim},
       {"base_channels", c.base_channels},
       {"max_channels", c.max_channels},
       {"style_base_channels", c.style_base_channels},
       {"disc_layers", c.disc_layers},
       {"disc_base_channels", c.disc_base_channels},
       {"attention_ratio", c.attention_ratio}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.n_attrs = j.value("n_attrs", d.n_attrs);
  c.n_embed = j.value("n_embed", d.n_embed);
  c.n_chars = j.value("n_chars", d.n_chars);
  c.resolution = j.value("resolution", d.resolution);
  c.m = j.value("m", d.m);
  c.levels = j.value("levels", d.levels);
  c.n_res_blocks = j.value("n_res_blocks", d.n_res_blocks);
  c.style_dim = j.value("style_dim", d.style_dim);
  c.base_channels = j.value("base_channels", d.base_channels);
  c.max_channels = j.value("max_channels", d.max_channels);
  c.style_base_channels = j.value("style_base_channels", d.style_base_channels);
  c.disc_layers = j.value("disc_layers", d.disc_layers);
  c.disc_base_channels = j.value("disc_base_channels", d.disc_base_channels);
  c.attention_ratio = j.value("attention_ratio", d.attention_ratio);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {w.adversarial, w.pixel, w.character, w.contextual, w.attribute};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  if (!j.is_array() || j.size() != 5) throw Error(ErrorCode::InvalidArgument, "expected 5 loss weights");
  w = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<double>()};
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"lambdas", c.lambdas},
       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr = j.value("lr", d.lr);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.lambdas = j.contains("lambdas") ? j.at("lambdas").get<LossWeights>() : d.lambdas;
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
}

LossWeights parse_loss_weights(const std::string& csv) {
  std::vector<double> v;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad loss weight '" + item + "'");
    }
  }
  if (v.size() != 5) throw Error(ErrorCode::InvalidArgument, "expected 5 comma-separated loss weights");
  LossWeights w{v[0], v[1], v[2], v[3], v[4]};
  w.validate();
  return w;
}

}  // namespace attr2font
