// attr2font command-line tool: ingest, train, generate, interpolate, edit, eval, serve.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "attr2font/attributes.hpp"
#include "attr2font/dataset.hpp"
#include "attr2font/error.hpp"
#include "attr2font/evaluator.hpp"
#include "attr2font/image.hpp"
#include "attr2font/inference.hpp"
#include "attr2font/model_state.hpp"
#include "attr2font/service.hpp"
#include "attr2font/trainer.hpp"

namespace fs = std::filesystem;
using namespace attr2font;
using nlohmann::json;

namespace {

struct Loaded {
  std::unique_ptr<ModelState> state;
  std::unique_ptr<FontDataset> data;
};

Loaded load_model(const fs::path& ckpt, const std::string& data_override) {
  Loaded l;
  l.state = load_checkpoint(ckpt);
  const fs::path data_dir = data_override.empty() ? fs::path(l.state->dataset.data_dir) : fs::path(data_override);
  l.data = std::make_unique<FontDataset>(FontDataset::load(data_dir, static_cast<std::size_t>(l.state->model_config.n_attrs)));
  return l;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, p.string() + ": " + e.what());
  }
}

// CSV attribute files hold a header of attribute names and one row of values in [0, 1].
AttributeVector read_attributes(const fs::path& p) {
  if (p.extension() != ".csv") return attributes_from_json(read_json(p));
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      out.push_back(cell);
    }
    return out;
  };
  const auto names = split(header), values = split(row);
  if (names.size() != values.size()) {
    throw Error(ErrorCode::BadRowLength, p.string() + ": header and value row differ in length");
  }
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      j[names[i]] = std::stod(values[i]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadAttributes, p.string() + ": '" + names[i] + "' is not a number");
    }
  }
  return attributes_from_json(j);
}

// A target vector comes from an attribute file or from a font in the dataset.
AttributeVector target_attributes(const InferenceEngine& engine, const std::string& attrs_file,
                                  const std::string& font) {
  if (!attrs_file.empty()) return read_attributes(attrs_file);
  if (!font.empty()) return engine.font_attributes(engine.font_index(font));
  throw Error(ErrorCode::InvalidArgument, "give --attrs FILE or --font ID");
}

std::vector<int64_t> char_indices(const FontDataset& data, const std::string& chars) {
  std::vector<int64_t> out;
  for (char32_t cp : decode_utf8(chars)) {
    const auto pos = data.charset().find(cp);
    if (pos == std::u32string::npos) {
      throw Error(ErrorCode::InvalidArgument, "'" + encode_utf8(std::u32string(1, cp)) + "' is not in the charset");
    }
    out.push_back(static_cast<int64_t>(pos));
  }
  return out;
}

// Writes <k>.png per character plus grid.png (13 columns at most).
void write_glyphs(const fs::path& dir, const std::vector<int64_t>& chars, const std::vector<torch::Tensor>& glyphs) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const auto k = chars.empty() ? static_cast<int64_t>(i) : chars[i];
    write_png_gray(dir / fmt::format("{}.png", k), glyphs[i]);
  }
  write_png_gray(dir / "grid.png", make_grid(glyphs, std::min<int64_t>(13, static_cast<int64_t>(glyphs.size()))));
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  for (std::string cell; std::getline(ss, cell, ',');) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "'" + cell + "' is not a number");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "--values is empty");
  return out;
}

InferenceService* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-conditioned glyph synthesis"};
  app.require_subcommand(1);

  // ingest
  std::string fonts_dir, attrs_csv, charset, out_dir;
  int size = 64;
  auto* ingest = app.add_subcommand("ingest", "Build a dataset from font files or glyph folders");
  ingest->add_option("--fonts", fonts_dir, "Directory of .ttf/.ttc files or per-font glyph folders")->required();
  ingest->add_option("--attrs", attrs_csv, "attributes.csv with raw 0..100 values");
  ingest->add_option("--charset", charset, "Characters to render (UTF-8)")
      ->default_val("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz");
  ingest->add_option("--out", out_dir, "Dataset directory")->required();
  ingest->add_option("--size", size, "Glyph resolution")->default_val(64);

  // train
  std::string data_dir, run_dir, resume, lambdas;
  TrainConfig train;
  ModelConfig model;
  auto* train_cmd = app.add_subcommand("train", "Train or resume a model");
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", run_dir, "Run directory (losses.csv, latest.a2f)")->required();
  train_cmd->add_option("--epochs", train.epochs)->default_val(train.epochs);
  train_cmd->add_option("--batch-size", train.batch_size)->default_val(train.batch_size);
  train_cmd->add_option("--lr", train.lr)->default_val(train.lr);
  train_cmd->add_option("--seed", train.seed)->default_val(train.seed);
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every, "Epochs between checkpoints")
      ->default_val(train.checkpoint_every);
  train_cmd->add_option("--m", model.m, "Style reference glyphs")->default_val(model.m);
  train_cmd->add_option("--n-rb", model.n_res_blocks, "Residual blocks in the style transformer")
      ->default_val(model.n_res_blocks);
  train_cmd->add_option("--n-e", model.n_embed, "Attribute embedding size")->default_val(model.n_embed);
  train_cmd->add_option("--lambda", lambdas, "Loss weights adv,pixel,char,cx,attr")->default_val("5,50,5,5,20");
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  // shared model options
  std::string ckpt, data_override, attrs_file, font, source_font, chars;
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    cmd->add_option("--data", data_override, "Dataset directory (defaults to the one used in training)");
    cmd->add_option("--source-font", source_font, "Content source font (default: first labeled font)");
  };

  std::string grid;
  auto* generate = app.add_subcommand("generate", "Synthesize glyphs for an attribute vector");
  add_model(generate);
  generate->add_option("--attrs", attrs_file, "Attribute file: JSON object or CSV header + one row");
  generate->add_option("--font", font, "Use this font's attribute vector");
  generate->add_option("--chars", chars, "Characters to generate (default: whole charset)");
  generate->add_option("--out-dir,--out", out_dir, "Output directory")->required();
  generate->add_option("--grid", grid, "Also write the glyph grid to this PNG");

  std::string from_file, to_file;
  int64_t steps = 11;
  auto* interpolate = app.add_subcommand("interpolate", "Sweep between two attribute vectors");
  add_model(interpolate);
  interpolate->add_option("--from", from_file, "Attribute file (lambda = 0)")->required();
  interpolate->add_option("--to", to_file, "Attribute file (lambda = 1)")->required();
  interpolate->add_option("--steps", steps)->default_val(11);
  interpolate->add_option("--chars,--char", chars, "Characters to generate (default: whole charset)");
  interpolate->add_option("--out-dir,--out", out_dir, "Output directory")->required();

  std::string attr_name, values = "0,0.2,0.4,0.6,0.8,1.0";
  auto* edit = app.add_subcommand("edit", "Sweep one attribute of a font over a list of values");
  add_model(edit);
  edit->add_option("--font", font, "Start from this font's attribute vector");
  edit->add_option("--attrs", attrs_file, "Or start from an attribute file");
  edit->add_option("--attr", attr_name, "Attribute to change")->required();
  edit->add_option("--values", values, "Comma-separated values in [0, 1]")->default_val(values);
  edit->add_option("--chars", chars, "Characters to generate (default: whole charset)");
  edit->add_option("--out-dir,--out", out_dir, "Output directory")->required();

  std::string report, split = "validation", plugin;
  bool no_impact = false;
  auto* eval = app.add_subcommand("eval", "Score reconstructions and write the attribute studies");
  add_model(eval);
  eval->add_option("--out,--report", report, "Report JSON path")->required();
  eval->add_option("--split", split, "validation, labeled, unlabeled, all or train")->default_val("validation");
  eval->add_option("--perceptual-plugin", plugin, "Command printing {\"score\": x} for two image folders");
  eval->add_flag("--no-impact", no_impact, "Skip the attribute impact sweep");

  std::string host = "127.0.0.1";
  int port = 8750;
  auto* serve = app.add_subcommand("serve", "Run the HTTP inference API");
  add_model(serve);
  serve->add_option("--host", host)->default_val(host);
  serve->add_option("--port", port)->default_val(port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      std::optional<fs::path> ann;
      if (!attrs_csv.empty()) ann = attrs_csv;
      const auto ds = build_dataset(fonts_dir, ann, charset, size);
      ds.save(out_dir);
      fmt::print(stderr, "{} fonts ({} labeled) x {} characters at {} px -> {}\n", ds.size(), ds.labeled().size(),
                 ds.n_chars(), ds.resolution(), out_dir);
    } else if (*train_cmd) {
      train.lambdas = parse_loss_weights(lambdas);
      train.validate();
      const auto dataset = FontDataset::load(data_dir);
      std::unique_ptr<ModelState> state;
      if (!resume.empty()) {
        state = load_checkpoint(resume);
        auto cfg = state->train_config;
        cfg.epochs = train.epochs;
        state->set_train_config(cfg);
      } else {
        model.n_chars = dataset.n_chars();
        model.resolution = dataset.resolution();
        state = make_model_state(dataset, data_dir, model, train);
      }
      Trainer trainer(*state, dataset);
      Trainer::Options options;
      options.out_dir = run_dir;
      trainer.train(options);
    } else if (*generate) {
      auto l = load_model(ckpt, data_override);
      InferenceEngine engine(*l.state, *l.data);
      const auto target = target_attributes(engine, attrs_file, font);
      const auto src = engine.font_index(source_font.empty() ? engine.default_source_font() : source_font);
      const auto ks = char_indices(*l.data, chars);
      const auto glyphs = engine.synthesize_charset(src, target, ks);
      write_glyphs(out_dir, ks, glyphs);
      if (!grid.empty()) write_png_gray(grid, make_grid(glyphs, std::min<int64_t>(13, static_cast<int64_t>(glyphs.size()))));
      std::ofstream(fs::path(out_dir) / "attributes.json") << attributes_to_json(target).dump(2) << '\n';
      fmt::print(stderr, "wrote {} glyphs to {}\n", glyphs.size(), out_dir);
    } else if (*interpolate) {
      auto l = load_model(ckpt, data_override);
      InferenceEngine engine(*l.state, *l.data);
      const auto from = read_attributes(from_file);
      const auto to = read_attributes(to_file);
      const auto src = engine.font_index(source_font.empty() ? engine.default_source_font() : source_font);
      const auto ks = char_indices(*l.data, chars);
      const auto lambdas = interpolation_grid(steps);
      std::vector<torch::Tensor> rows;
      for (std::size_t j = 0; j < lambdas.size(); ++j) {
        const auto glyphs = engine.synthesize_charset(src, interpolate_attributes(from, to, lambdas[j]), ks);
        write_glyphs(fs::path(out_dir) / fmt::format("step_{:03d}", j), ks, glyphs);
        rows.insert(rows.end(), glyphs.begin(), glyphs.end());
      }
      // One row per step, one column per character.
      write_png_gray(fs::path(out_dir) / "sweep.png", make_grid(rows, static_cast<int64_t>(rows.size() / lambdas.size())));
      fmt::print(stderr, "wrote {} interpolation steps to {}\n", lambdas.size(), out_dir);
    } else if (*edit) {
      auto l = load_model(ckpt, data_override);
      InferenceEngine engine(*l.state, *l.data);
      const auto base = target_attributes(engine, attrs_file, font);
      const auto idx = attribute_index(attr_name);
      if (!idx) throw Error(ErrorCode::BadAttributes, "unknown attribute '" + attr_name + "'");
      const auto src = engine.font_index(source_font.empty() ? engine.default_source_font() : source_font);
      const auto ks = char_indices(*l.data, chars);
      const auto vs = parse_values(values);
      std::vector<torch::Tensor> rows;
      for (std::size_t j = 0; j < vs.size(); ++j) {
        const auto glyphs = engine.synthesize_charset(src, edit_attribute(base, *idx, vs[j]), ks);
        write_glyphs(fs::path(out_dir) / fmt::format("{}_{:03d}", attr_name, j), ks, glyphs);
        rows.insert(rows.end(), glyphs.begin(), glyphs.end());
      }
      write_png_gray(fs::path(out_dir) / "sweep.png", make_grid(rows, static_cast<int64_t>(rows.size() / vs.size())));
      fmt::print(stderr, "wrote {} edits of '{}' to {}\n", vs.size(), attr_name, out_dir);
    } else if (*eval) {
      auto l = load_model(ckpt, data_override);
      InferenceEngine engine(*l.state, *l.data);
      EvalOptions o;
      o.report = report;
      o.split = split;
      if (!source_font.empty()) o.source_font = source_font;
      if (!plugin.empty()) o.plugin = PerceptualPlugin{plugin};
      o.impact_study = !no_impact;
      const auto r = evaluate(engine, o);
      std::cout << r["aggregate"].dump(2) << '\n';
    } else if (*serve) {
      auto l = load_model(ckpt, data_override);
      InferenceService service;
      std::optional<std::string> src;
      if (!source_font.empty()) src = source_font;
      service.load(std::move(l.state), std::move(l.data), file_fingerprint(ckpt), src);
      const int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      fmt::print(stderr, "serving on http://{}:{}\n", host, bound);
      service.listen();
      g_service = nullptr;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
