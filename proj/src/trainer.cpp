#include "attr2font/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "attr2font/error.hpp"

namespace fs = std::filesystem;

namespace attr2font {

namespace {

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

struct FrozenScope {
  FrozenScope(torch::nn::Module& m) : module(m) { set_requires_grad(module, false); }
  ~FrozenScope() { set_requires_grad(module, true); }
  torch::nn::Module& module;
};

}  // namespace

PseudoAttributeStore init_pseudo_attributes(std::mt19937_64& rng, int64_t n_unlabeled, int64_t n_attrs) {
  return PseudoAttributeStore::initialize(rng, n_unlabeled, n_attrs);
}

int64_t steps_per_epoch(int64_t n_fonts, int64_t n_chars, int64_t batch_size) {
  if (batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  return std::max<int64_t>(1, n_fonts * n_chars / batch_size);
}

Batch collate(const FontDataset& dataset, const std::vector<PairDraw>& draws, const PseudoAttributeStore& pseudo) {
  if (draws.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  std::vector<torch::Tensor> source, refs, target, alpha_a, alpha_b;
  std::vector<int64_t> chars;
  Batch b;
  for (const auto& d : draws) {
    const auto& src = dataset.font(d.source);
    const auto& tgt = dataset.font(d.target);
    source.push_back(src.glyph(d.k));
    std::vector<torch::Tensor> r;
    for (int64_t k : d.refs) r.push_back(src.glyph(k));
    refs.push_back(torch::stack(r));
    target.push_back(tgt.glyph(d.k));
    chars.push_back(d.k);
    alpha_a.push_back(dataset.attribute_tensor(d.source, &pseudo));
    alpha_b.push_back(dataset.attribute_tensor(d.target, &pseudo));
    for (const auto* f : {&src, &tgt}) {
      if (f->pseudo_row >= 0) b.pseudo_rows.push_back(f->pseudo_row);
    }
  }
  b.source = torch::stack(source).unsqueeze(1);
  b.refs = torch::stack(refs);
  b.target = torch::stack(target).unsqueeze(1);
  b.chars = torch::tensor(chars, torch::kInt64);
  b.alpha_a = torch::stack(alpha_a);
  b.alpha_b = torch::stack(alpha_b);
  std::sort(b.pseudo_rows.begin(), b.pseudo_rows.end());
  b.pseudo_rows.erase(std::unique(b.pseudo_rows.begin(), b.pseudo_rows.end()), b.pseudo_rows.end());
  return b;
}

Trainer::Trainer(ModelState& state, const FontDataset& dataset)
    : state_(state), dataset_(dataset), sampler_(dataset, state.model_config.m) {
  if (dataset.n_chars() != state.model_config.n_chars || dataset.resolution() != state.model_config.resolution) {
    throw Error(ErrorCode::ConfigMismatch, "dataset does not match the model configuration");
  }
  if (static_cast<int64_t>(dataset.unlabeled().size()) != state.pseudo.rows()) {
    throw Error(ErrorCode::ConfigMismatch, "pseudo-attribute store does not match the dataset's unlabeled fonts");
  }
}

std::vector<PairDraw> Trainer::next_draws() {
  std::vector<PairDraw> out;
  for (int64_t i = 0; i < state_.train_config.batch_size; ++i) out.push_back(sampler_.draw(state_.rng));
  return out;
}

void Trainer::fail_non_finite(const LossRecord& record, const std::vector<PairDraw>& draws, const char* phase) {
  std::string where;
  if (diagnostics_dir_) {
    nlohmann::json dump;
    dump["phase"] = phase;
    dump["step"] = record.step;
    dump["epoch"] = state_.epoch;
    dump["losses"] = {{"l_G", record.l_G},   {"l_pixel", record.l_pixel}, {"l_char", record.l_char},
                      {"l_CX", record.l_CX}, {"l_attr", record.l_attr},   {"l_D", record.l_D},
                      {"l'_attr", record.l_attr_D}};
    for (const auto& d : draws) {
      dump["batch"].push_back({{"source", dataset_.font(d.source).font_id},
                               {"target", dataset_.font(d.target).font_id},
                               {"char", d.k},
                               {"refs", d.refs}});
    }
    fs::create_directories(*diagnostics_dir_);
    const auto path = *diagnostics_dir_ / fmt::format("nonfinite_step{}.json", record.step);
    std::ofstream(path) << dump.dump(2) << '\n';
    where = " (diagnostics in " + path.string() + ")";
  }
  throw Error(ErrorCode::NonFiniteLoss, fmt::format("non-finite loss in the {} update at step {}{}", phase,
                                                    record.step, where));
}

LossRecord Trainer::train_step(const std::vector<PairDraw>& draws) {
  auto& G = state_.generator;
  auto& D = state_.discriminator;
  const auto& w = state_.train_config.lambdas;
  LossRecord record;
  record.step = state_.step + 1;

  state_.pseudo.zero_grad();
  auto batch = collate(dataset_, draws, state_.pseudo);

  // Discriminator update on real targets and detached fakes.
  torch::Tensor fake;
  {
    torch::NoGradGuard guard;
    fake = G->forward(batch.source, batch.refs, batch.alpha_a.detach(), batch.alpha_b.detach()).image;
  }
  state_.discriminator_optimizer->zero_grad();
  {
    auto real_out = D->forward(batch.target);
    auto fake_out = D->forward(fake);
    auto parts = discriminator_objective(real_out.p_real, fake_out.p_real, real_out.attr_pred, batch.alpha_b);
    record.l_D = parts.adversarial.item<double>();
    record.l_attr_D = parts.attribute.item<double>();
    if (!std::isfinite(parts.total.item<double>())) fail_non_finite(record, draws, "discriminator");
    parts.total.backward();
  }
  state_.discriminator_optimizer->step();

  // Generator update with the critic frozen. The attribute views are rebuilt
  // because the discriminator backward pass released their graph.
  batch = collate(dataset_, draws, state_.pseudo);
  state_.generator_optimizer->zero_grad();
  {
    FrozenScope frozen(*D);
    auto out = G->forward(batch.source, batch.refs, batch.alpha_a, batch.alpha_b);
    auto critic = D->forward(out.image);
    GeneratorLossParts parts;
    parts.adversarial = adversarial_generator_loss(critic.p_real);
    parts.pixel = pixel_loss(out.image, batch.target);
    parts.character = char_loss(out.class_logits, batch.chars);
    parts.contextual = contextual_loss(out.image, batch.target);
    parts.attribute = attr_loss(critic.attr_pred, batch.alpha_b);
    auto total = generator_objective(parts, w);
    record.l_G = parts.adversarial.item<double>();
    record.l_pixel = parts.pixel.item<double>();
    record.l_char = parts.character.item<double>();
    record.l_CX = parts.contextual.item<double>();
    record.l_attr = parts.attribute.item<double>();
    if (!std::isfinite(total.item<double>()) || !record.all_finite()) fail_non_finite(record, draws, "generator");
    total.backward();
  }
  state_.generator_optimizer->step();
  state_.pseudo.step(batch.pseudo_rows, state_.train_config.lr, state_.train_config.beta1,
                     state_.train_config.beta2);
  state_.pseudo.zero_grad();
  state_.step = record.step;
  return record;
}

void Trainer::train(const Options& options) {
  const auto& cfg = state_.train_config;
  const int64_t per_epoch = steps_per_epoch(dataset_.size(), dataset_.n_chars(), cfg.batch_size);
  std::unique_ptr<std::ofstream> log;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    diagnostics_dir_ = options.out_dir;
    const auto path = options.out_dir / "losses.csv";
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    log = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*log) throw Error(ErrorCode::Io, "cannot write " + path.string());
    if (fresh) *log << LossRecord::csv_header() << '\n';
  }
  fmt::print(stderr, "training {} epochs x {} steps (batch {}), starting at epoch {}\n", cfg.epochs, per_epoch,
               cfg.batch_size, state_.epoch);
  while (state_.epoch < cfg.epochs) {
    LossRecord last;
    for (int64_t s = 0; s < per_epoch; ++s) {
      last = train_step(next_draws());
      if (log) *log << last.csv_row() << '\n';
      if (options.on_step) options.on_step(last);
    }
    if (log) log->flush();
    ++state_.epoch;
    fmt::print(stderr, "epoch {} step {}: l_pixel {:.4f} l_G {:.4f} l_D {:.4f}\n", state_.epoch, state_.step, last.l_pixel,
                 last.l_G, last.l_D);
    const bool due = cfg.checkpoint_every > 0 && state_.epoch % cfg.checkpoint_every == 0;
    if (options.write_checkpoints && !options.out_dir.empty() && (due || state_.epoch == cfg.epochs)) {
      save_checkpoint(state_, options.out_dir / "latest.a2f");
    }
  }
}

}  // namespace attr2font
