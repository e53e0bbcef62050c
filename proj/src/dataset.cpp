#include "genre/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "genre/error.h"

namespace genre {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(Errc::parse_error, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_params, "Rng::below(0)");
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void Dataset::check() const {
  if (X.rows() != y.size()) throw Error(Errc::schema_mismatch, "feature rows and labels disagree");
  if (!filenames.empty() && filenames.size() != y.size()) {
    throw Error(Errc::schema_mismatch, "filenames and labels disagree");
  }
  if (!std::is_sorted(class_names.begin(), class_names.end()) ||
      std::adjacent_find(class_names.begin(), class_names.end()) != class_names.end()) {
    throw Error(Errc::schema_mismatch, "class names must be sorted and unique");
  }
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_names.size()) {
      throw Error(Errc::schema_mismatch, "label " + std::to_string(label) + " outside the class set");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.X = Matrix(indices.size(), X.cols());
  out.class_names = class_names;
  out.feature_mode = feature_mode;
  out.config_fingerprint = config_fingerprint;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices.at(i);
    std::copy(X.row(src).begin(), X.row(src).end(), out.X.row(i).begin());
    out.y.push_back(y.at(src));
    if (!filenames.empty()) out.filenames.push_back(filenames[src]);
  }
  return out;
}

std::vector<LabeledClip> scan_gtzan(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::io_error, "not a directory: " + root.string());

  std::vector<LabeledClip> clips;
  try {
    for (const auto& genre_dir : fs::directory_iterator(root)) {
      if (!genre_dir.is_directory()) continue;
      const std::string genre = genre_dir.path().filename().string();
      for (const auto& file : fs::directory_iterator(genre_dir.path())) {
        if (file.is_regular_file() && lower(file.path().extension().string()) == ".wav") {
          clips.push_back({file.path(), genre, std::nullopt});
        }
      }
    }
  } catch (const fs::filesystem_error& e) {
    throw Error(Errc::io_error, e.what());
  }
  if (clips.empty()) throw Error(Errc::empty_dataset, "no audio files found under " + root.string());
  std::sort(clips.begin(), clips.end(), [](const LabeledClip& a, const LabeledClip& b) {
    if (a.genre != b.genre) return a.genre < b.genre;
    return a.path.filename().string() < b.path.filename().string();
  });
  return clips;
}

LabelEncoding encode_labels(const std::vector<std::string>& genres) {
  if (genres.empty()) throw Error(Errc::invalid_params, "no labels to encode");
  LabelEncoding enc;
  const std::set<std::string> unique(genres.begin(), genres.end());
  enc.class_names.assign(unique.begin(), unique.end());
  enc.y.reserve(genres.size());
  for (const auto& g : genres) {
    const auto it = std::lower_bound(enc.class_names.begin(), enc.class_names.end(), g);
    enc.y.push_back(static_cast<int>(it - enc.class_names.begin()));
  }
  return enc;
}

SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(Errc::invalid_params, "train fraction must lie in (0, 1)");
  }
  ds.check();
  Rng rng(spec.seed);
  SplitIndices out;

  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    groups.resize(ds.class_names.size());
    for (std::size_t i = 0; i < ds.size(); ++i) groups[static_cast<std::size_t>(ds.y[i])].push_back(i);
  } else {
    groups.emplace_back(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) groups[0][i] = i;
  }

  for (auto& group : groups) {
    if (group.empty()) continue;
    if (spec.stratified && group.size() < 2) {
      throw Error(Errc::invalid_params, "stratified split needs at least two samples per class");
    }
    rng.shuffle(group);
    auto cut = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(group.size())));
    if (spec.stratified) cut = std::clamp<std::size_t>(cut, 1, group.size() - 1);
    out.train.insert(out.train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(cut));
    out.test.insert(out.test.end(), group.begin() + static_cast<std::ptrdiff_t>(cut), group.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

void save_features(const Dataset& ds, const fs::path& path) {
  ds.check();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "filename,label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string name = ds.filenames.empty() ? std::to_string(i) : ds.filenames[i];
    out << csv_escape(name) << ',' << csv_escape(ds.class_names[static_cast<std::size_t>(ds.y[i])]);
    for (double v : ds.X.row(i)) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

Dataset load_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::schema_mismatch, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = csv_split(line, 1);
  if (header.size() < 3 || header[0] != "filename" || header[1] != "label") {
    throw Error(Errc::schema_mismatch, "header must start with filename,label and name at least one feature");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 2] != "f" + std::to_string(j)) {
      throw Error(Errc::schema_mismatch, "unexpected column '" + header[j + 2] + "'");
    }
  }

  std::vector<std::string> names;
  std::vector<std::string> labels;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv_split(line, line_no);
    if (fields.size() != dim + 2) {
      throw Error(Errc::schema_mismatch, "line " + std::to_string(line_no) + " has " +
                                             std::to_string(fields.size()) + " columns, expected " +
                                             std::to_string(dim + 2));
    }
    if (fields[1].empty()) throw Error(Errc::parse_error, "empty label on line " + std::to_string(line_no));
    names.push_back(fields[0]);
    labels.push_back(fields[1]);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto& f = fields[j + 2];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw Error(Errc::parse_error, "bad number '" + f + "' on line " + std::to_string(line_no));
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw Error(Errc::empty_dataset, "feature file has no rows: " + path.string());

  Dataset ds;
  auto enc = encode_labels(labels);
  ds.y = std::move(enc.y);
  ds.class_names = std::move(enc.class_names);
  ds.filenames = std::move(names);
  ds.X = Matrix(ds.y.size(), dim);
  ds.X.data() = std::move(values);
  return ds;
}

}  // namespace genre
