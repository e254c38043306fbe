#include "attr2font/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "attr2font/error.hpp"
#include "attr2font/pseudo_attributes.hpp"
#include "attr2font/truetype.hpp"

namespace fs = std::filesystem;

namespace attr2font {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const torch::Tensor& byte_lut() {
  static const torch::Tensor lut = [] {
    std::vector<uint8_t> all(256);
    for (int i = 0; i < 256; ++i) all[i] = static_cast<uint8_t>(i);
    return bytes_to_pixels(all, 1, 256).reshape({256});
  }();
  return lut;
}

torch::Tensor to_bytes_tensor(const torch::Tensor& pixels) {
  auto bytes = pixels_to_bytes(pixels);
  return torch::from_blob(bytes.data(), {pixels.size(0), pixels.size(1)}, torch::kUInt8).clone();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_font_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ttf" || ext == ".ttc";
}

torch::Tensor load_glyph_folder(const fs::path& dir, int64_t n_chars, int64_t out_size, bool resize) {
  std::vector<torch::Tensor> glyphs;
  for (int64_t k = 0; k < n_chars; ++k) {
    const auto path = dir / fmt::format("{}.png", k);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::InconsistentCharset,
                  fmt::format("font '{}' lacks glyph {}", dir.filename().string(), k));
    }
    auto px = read_png_gray(path);
    if (px.size(0) != out_size || px.size(1) != out_size) {
      if (!resize) {
        throw Error(ErrorCode::WrongResolution, fmt::format("{} is not {}x{}", path.string(), out_size, out_size));
      }
      px = area_resize(px, out_size, out_size);
    }
    glyphs.push_back(to_bytes_tensor(px));
  }
  return torch::stack(glyphs);
}

}  // namespace

std::string_view to_string(LabelStatus s) { return s == LabelStatus::Labeled ? "labeled" : "unlabeled"; }

torch::Tensor FontRecord::glyph(int64_t k) const {
  if (k < 0 || k >= n_chars()) throw Error(ErrorCode::IndexOutOfRange, "character index outside the charset");
  return byte_lut().index({glyph_bytes[k].to(torch::kInt64)});
}

std::map<std::string, AttributeVector> load_attribute_annotations(const fs::path& path, std::size_t n_attrs) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::map<std::string, AttributeVector> out;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (header) {
      header = false;
      if (!fields.empty() && fields[0] == "font_id") continue;
    }
    if (fields.size() != n_attrs + 1) {
      throw Error(ErrorCode::BadRowLength, fmt::format("{}:{}: expected {} attribute values, got {}", path.string(),
                                                       line_no, n_attrs, fields.size() - 1));
    }
    std::vector<float> values(n_attrs);
    for (std::size_t i = 0; i < n_attrs; ++i) {
      double raw = 0;
      try {
        std::size_t used = 0;
        raw = std::stod(fields[i + 1], &used);
        if (used != fields[i + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(ErrorCode::OutOfRange, fmt::format("{}:{}: '{}' is not a number", path.string(), line_no,
                                                       fields[i + 1]));
      }
      if (!(raw >= 0.0 && raw <= 100.0)) {
        throw Error(ErrorCode::OutOfRange,
                    fmt::format("{}:{}: raw value {} outside [0, 100]", path.string(), line_no, fields[i + 1]));
      }
      values[i] = static_cast<float>(raw / 100.0);
    }
    if (!out.emplace(fields[0], AttributeVector(std::move(values))).second) {
      throw Error(ErrorCode::DuplicateFontId, fmt::format("font '{}' annotated twice", fields[0]));
    }
  }
  return out;
}

std::u32string decode_utf8(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = c < 0x80 ? 0 : (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xE ? 2 : (c >> 3) == 0x1E ? 3 : -1;
    if (extra < 0 || i + static_cast<std::size_t>(extra) >= s.size()) {
      throw Error(ErrorCode::InvalidArgument, "invalid UTF-8 in charset");
    }
    char32_t cp = extra == 0 ? c : c & (0x3F >> extra);
    for (int j = 1; j <= extra; ++j) {
      const auto cc = static_cast<unsigned char>(s[i + j]);
      if ((cc & 0xC0) != 0x80) throw Error(ErrorCode::InvalidArgument, "invalid UTF-8 in charset");
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::string encode_utf8(const std::u32string& s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

FontDataset::FontDataset(std::u32string charset, int64_t resolution, std::vector<FontRecord> fonts,
                         std::vector<std::string> validation_ids)
    : charset_(std::move(charset)),
      resolution_(resolution),
      fonts_(std::move(fonts)),
      validation_ids_(std::move(validation_ids)) {
  if (fonts_.empty()) throw Error(ErrorCode::NoFonts, "dataset has no fonts");
  if (charset_.empty()) throw Error(ErrorCode::InconsistentCharset, "charset is empty");
  std::sort(fonts_.begin(), fonts_.end(), [](const auto& a, const auto& b) { return a.font_id < b.font_id; });
  int64_t pseudo_row = 0;
  for (std::size_t i = 0; i < fonts_.size(); ++i) {
    auto& f = fonts_[i];
    if (!index_.emplace(f.font_id, static_cast<int64_t>(i)).second) {
      throw Error(ErrorCode::DuplicateFontId, "font '" + f.font_id + "' appears twice");
    }
    if (f.glyph_bytes.dim() != 3 || f.n_chars() != n_chars()) {
      throw Error(ErrorCode::InconsistentCharset, "font '" + f.font_id + "' does not cover the charset");
    }
    if (f.glyph_bytes.size(1) != resolution_ || f.glyph_bytes.size(2) != resolution_) {
      throw Error(ErrorCode::WrongResolution, "font '" + f.font_id + "' has the wrong glyph size");
    }
    if (f.attributes) {
      f.status = LabelStatus::Labeled;
      f.pseudo_row = -1;
      labeled_.push_back(static_cast<int64_t>(i));
    } else {
      f.status = LabelStatus::Unlabeled;
      f.pseudo_row = pseudo_row++;
      unlabeled_.push_back(static_cast<int64_t>(i));
    }
  }
  for (const auto& id : validation_ids_) {
    if (!index_.count(id)) throw Error(ErrorCode::UnknownFont, "validation font '" + id + "' is not in the dataset");
  }
}

std::optional<int64_t> FontDataset::index_of(const std::string& font_id) const {
  auto it = index_.find(font_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int64_t> FontDataset::validation() const {
  if (validation_ids_.empty()) return labeled_;
  std::vector<int64_t> out;
  for (const auto& id : validation_ids_) out.push_back(index_.at(id));
  return out;
}

torch::Tensor FontDataset::attribute_tensor(int64_t font, const PseudoAttributeStore* pseudo) const {
  const auto& f = this->font(font);
  if (f.attributes) return f.attributes->to_tensor();
  if (!pseudo || f.pseudo_row >= pseudo->rows()) {
    throw Error(ErrorCode::InvalidArgument, "no pseudo-attributes available for unlabeled font '" + f.font_id + "'");
  }
  return pseudo->view(f.pseudo_row);
}

AttributeVector FontDataset::attributes(int64_t font, const PseudoAttributeStore* pseudo) const {
  torch::NoGradGuard guard;
  return AttributeVector::from_tensor(attribute_tensor(font, pseudo).detach());
}

FontDataset FontDataset::load(const fs::path& root, std::size_t n_attrs) {
  const auto charset_path = root / "charset.txt";
  if (!fs::exists(charset_path)) throw Error(ErrorCode::Io, "missing " + charset_path.string());
  auto text = read_text(charset_path);
  if (auto nl = text.find('\n'); nl != std::string::npos) text.resize(nl);
  if (!text.empty() && text.back() == '\r') text.pop_back();
  auto charset = decode_utf8(text);
  if (charset.empty()) throw Error(ErrorCode::InconsistentCharset, "charset.txt is empty");

  std::map<std::string, AttributeVector> annotations;
  if (fs::exists(root / "attributes.csv")) annotations = load_attribute_annotations(root / "attributes.csv", n_attrs);

  const auto images = root / "images";
  if (!fs::is_directory(images)) throw Error(ErrorCode::NoFonts, "missing " + images.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw Error(ErrorCode::NoFonts, "no font folders under " + images.string());
  std::sort(dirs.begin(), dirs.end());

  int64_t resolution = 0;
  std::vector<FontRecord> fonts;
  for (const auto& dir : dirs) {
    FontRecord rec;
    rec.font_id = dir.filename().string();
    if (resolution == 0) resolution = read_png_gray(dir / "0.png").size(0);
    rec.glyph_bytes = load_glyph_folder(dir, static_cast<int64_t>(charset.size()), resolution, false);
    if (auto it = annotations.find(rec.font_id); it != annotations.end()) rec.attributes = it->second;
    fonts.push_back(std::move(rec));
  }

  std::vector<std::string> validation;
  if (fs::exists(root / "validation.txt")) {
    std::stringstream ss(read_text(root / "validation.txt"));
    std::string line;
    while (std::getline(ss, line)) {
      line = trim(line);
      if (!line.empty()) validation.push_back(line);
    }
  }
  return FontDataset(std::move(charset), resolution, std::move(fonts), std::move(validation));
}

void FontDataset::save(const fs::path& root) const {
  fs::create_directories(root / "images");
  {
    std::ofstream out(root / "charset.txt", std::ios::binary);
    out << encode_utf8(charset_) << '\n';
  }
  std::ofstream csv(root / "attributes.csv", std::ios::binary);
  csv << "font_id";
  const std::size_t n_attrs = labeled_.empty() ? kDefaultAttributeCount : font(labeled_[0]).attributes->size();
  const auto& names = attribute_names();
  for (std::size_t i = 0; i < n_attrs; ++i) csv << ',' << (n_attrs == names.size() ? names[i] : fmt::format("a{}", i + 1));
  csv << '\n';
  for (const auto& f : fonts_) {
    const auto dir = root / "images" / f.font_id;
    fs::create_directories(dir);
    for (int64_t k = 0; k < f.n_chars(); ++k) write_png_gray(dir / fmt::format("{}.png", k), f.glyph(k));
    if (f.attributes) {
      csv << f.font_id;
      for (float v : f.attributes->values()) csv << ',' << fmt::format("{:.9g}", static_cast<double>(v) * 100.0);
      csv << '\n';
    }
  }
  if (!validation_ids_.empty()) {
    std::ofstream out(root / "validation.txt", std::ios::binary);
    for (const auto& id : validation_ids_) out << id << '\n';
  }
}

FontDataset build_dataset(const fs::path& fonts_dir, const std::optional<fs::path>& annotations,
                          const std::string& charset, int out_size, int render_size, std::size_t n_attrs) {
  auto cps = decode_utf8(charset);
  if (cps.empty()) throw Error(ErrorCode::InconsistentCharset, "charset is empty");
  std::map<std::string, AttributeVector> labels;
  if (annotations) labels = load_attribute_annotations(*annotations, n_attrs);
  if (!fs::is_directory(fonts_dir)) throw Error(ErrorCode::NoFonts, fonts_dir.string() + " is not a directory");

  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(fonts_dir)) {
    if (entry.is_directory() || is_font_file(entry.path())) entries.push_back(entry.path());
  }
  std::sort(entries.begin(), entries.end());
  if (entries.empty()) throw Error(ErrorCode::NoFonts, "no fonts under " + fonts_dir.string());

  std::vector<FontRecord> fonts;
  for (const auto& path : entries) {
    FontRecord rec;
    if (fs::is_directory(path)) {
      rec.font_id = path.filename().string();
      rec.glyph_bytes = load_glyph_folder(path, static_cast<int64_t>(cps.size()), out_size, true);
    } else {
      rec.font_id = path.stem().string();
      auto font = TrueTypeFont::load(path);
      std::vector<torch::Tensor> glyphs;
      for (char32_t cp : cps) {
        try {
          glyphs.push_back(to_bytes_tensor(render_glyph(font, cp, render_size, out_size).pixels));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MissingGlyph) throw;
          throw Error(ErrorCode::InconsistentCharset, fmt::format("font '{}' lacks U+{:04X}", rec.font_id,
                                                                  static_cast<uint32_t>(cp)));
        }
      }
      rec.glyph_bytes = torch::stack(glyphs);
    }
    if (auto it = labels.find(rec.font_id); it != labels.end()) rec.attributes = it->second;
    fonts.push_back(std::move(rec));
  }
  return FontDataset(std::move(cps), out_size, std::move(fonts));
}

PairSampler::PairSampler(std::vector<int64_t> labeled, std::vector<int64_t> unlabeled, int64_t n_chars, int64_t m)
    : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)), n_chars_(n_chars), m_(m) {
  if (labeled_.empty()) throw Error(ErrorCode::EmptyDataset, "sampling needs at least one labeled font");
  if (m_ < 0 || m_ > n_chars_) {
    throw Error(ErrorCode::WrongRefCount, fmt::format("cannot draw {} distinct references from {} characters", m_,
                                                      n_chars_));
  }
  all_ = labeled_;
  all_.insert(all_.end(), unlabeled_.begin(), unlabeled_.end());
}

PairSampler::PairSampler(const FontDataset& dataset, int64_t m)
    : PairSampler(dataset.labeled(), dataset.unlabeled(), dataset.n_chars(), m) {}

bool PairSampler::is_labeled(int64_t font) const {
  return std::find(labeled_.begin(), labeled_.end(), font) != labeled_.end();
}

PairDraw PairSampler::draw(std::mt19937_64& rng) const {
  auto pick = [&rng](const std::vector<int64_t>& from) {
    std::uniform_int_distribution<std::size_t> d(0, from.size() - 1);
    return from[d(rng)];
  };
  PairDraw out;
  out.source = pick(all_);
  if (unlabeled_.empty()) {
    out.target = pick(labeled_);
  } else {
    std::bernoulli_distribution coin(0.5);
    out.target = coin(rng) ? pick(labeled_) : pick(unlabeled_);
  }
  out.k = std::uniform_int_distribution<int64_t>(0, n_chars_ - 1)(rng);
  std::vector<int64_t> pool(static_cast<std::size_t>(n_chars_));
  for (int64_t i = 0; i < n_chars_; ++i) pool[i] = i;
  for (int64_t i = 0; i < m_; ++i) {
    std::uniform_int_distribution<int64_t> d(i, n_chars_ - 1);
    std::swap(pool[i], pool[d(rng)]);
  }
  out.refs.assign(pool.begin(), pool.begin() + m_);
  return out;
}

TransferSample materialize(const FontDataset& dataset, const PairDraw& draw, const PseudoAttributeStore* pseudo) {
  const auto& src = dataset.font(draw.source);
  const auto& tgt = dataset.font(draw.target);
  TransferSample s;
  s.source = {src.glyph(draw.k), static_cast<int>(draw.k), src.font_id};
  for (int64_t r : draw.refs) s.refs.push_back({src.glyph(r), static_cast<int>(r), src.font_id});
  s.target = {tgt.glyph(draw.k), static_cast<int>(draw.k), tgt.font_id};
  s.source_font = draw.source;
  s.target_font = draw.target;
  s.source_attrs = dataset.attributes(draw.source, pseudo);
  s.target_attrs = dataset.attributes(draw.target, pseudo);
  s.source_status = src.status;
  s.target_status = tgt.status;
  return s;
}

TransferSample sample_training_pair(std::mt19937_64& rng, const FontDataset& dataset, int64_t m,
                                    const PseudoAttributeStore* pseudo) {
  return materialize(dataset, PairSampler(dataset, m).draw(rng), pseudo);
}

}  // namespace attr2font
