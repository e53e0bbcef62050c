#include "genre/run_config.h"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "genre/error.h"

namespace genre {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt_double(v[i]);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key, const std::string& value) {
  throw Error(Errc::invalid_params, "[" + section + "] " + key + ": cannot parse '" + value + "'");
}

double parse_double(const std::string& section, const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t.empty()) bad_value(section, key, value);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (errno != 0 || end != t.c_str() + t.size()) bad_value(section, key, value);
  return v;
}

std::uint64_t parse_u64(const std::string& section, const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) bad_value(section, key, value);
  return v;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad_value(section, key, value);
}

std::vector<double> parse_list(const std::string& section, const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(section, key, item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

struct Field {
  const char* section;
  const char* key;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(const char* section, const char* key, T RunConfig::*group, std::size_t T::*member) {
  return {section, key,
          [=](RunConfig& c, const std::string& v) {
            (c.*group).*member = static_cast<std::size_t>(parse_u64(section, key, v));
          },
          [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field double_field(const char* section, const char* key, T RunConfig::*group, double T::*member) {
  return {section, key, [=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_double(section, key, v); },
          [=](const RunConfig& c) { return fmt_double((c.*group).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"features", "mode",
                 [](RunConfig& c, const std::string& v) { c.mode = parse_feature_mode(trim(v)); },
                 [](const RunConfig& c) { return std::string(feature_mode_name(c.mode)); }});
    f.push_back({"features", "sample_rate_hz",
                 [](RunConfig& c, const std::string& v) {
                   const auto rate = parse_u64("features", "sample_rate_hz", v);
                   if (rate == 0 || rate > 1'000'000) bad_value("features", "sample_rate_hz", v);
                   c.features.sample_rate_hz = static_cast<int>(rate);
                 },
                 [](const RunConfig& c) { return std::to_string(c.features.sample_rate_hz); }});
    f.push_back(size_field("features", "frame_len", &RunConfig::features, &FeatureConfig::frame_len));
    f.push_back(size_field("features", "hop", &RunConfig::features, &FeatureConfig::hop));
    f.push_back(size_field("features", "n_fft", &RunConfig::features, &FeatureConfig::n_fft));
    f.push_back(size_field("features", "n_mels", &RunConfig::features, &FeatureConfig::n_mels));
    f.push_back(size_field("features", "n_mfcc", &RunConfig::features, &FeatureConfig::n_mfcc));
    f.push_back(double_field("features", "fmin_hz", &RunConfig::features, &FeatureConfig::fmin_hz));
    f.push_back(double_field("features", "fmax_hz", &RunConfig::features, &FeatureConfig::fmax_hz));
    f.push_back(double_field("features", "sfm_db_max", &RunConfig::features, &FeatureConfig::sfm_db_max));
    f.push_back(double_field("features", "pitch_min_hz", &RunConfig::features, &FeatureConfig::pitch_min_hz));
    f.push_back(double_field("features", "pitch_max_hz", &RunConfig::features, &FeatureConfig::pitch_max_hz));
    f.push_back(double_field("features", "f0_grid_step_hz", &RunConfig::features, &FeatureConfig::f0_grid_step_hz));
    f.push_back({"features", "bark_edges_hz",
                 [](RunConfig& c, const std::string& v) {
                   c.features.bark_edges_hz = parse_list("features", "bark_edges_hz", v);
                 },
                 [](const RunConfig& c) { return fmt_list(c.features.bark_edges_hz); }});
    f.push_back({"features", "contrast_edges_hz",
                 [](RunConfig& c, const std::string& v) {
                   c.features.contrast_edges_hz = parse_list("features", "contrast_edges_hz", v);
                 },
                 [](const RunConfig& c) { return fmt_list(c.features.contrast_edges_hz); }});
    f.push_back(double_field("features", "eps", &RunConfig::features, &FeatureConfig::eps));

    f.push_back(double_field("train", "learning_rate", &RunConfig::train, &TrainConfig::learning_rate));
    f.push_back(double_field("train", "beta1", &RunConfig::train, &TrainConfig::beta1));
    f.push_back(double_field("train", "beta2", &RunConfig::train, &TrainConfig::beta2));
    f.push_back(double_field("train", "epsilon", &RunConfig::train, &TrainConfig::epsilon));
    f.push_back(size_field("train", "batch_size", &RunConfig::train, &TrainConfig::batch_size));
    f.push_back(size_field("train", "epochs", &RunConfig::train, &TrainConfig::epochs));
    f.push_back(double_field("train", "dropout_rate", &RunConfig::train, &TrainConfig::dropout_rate));
    f.push_back(double_field("train", "val_fraction", &RunConfig::train, &TrainConfig::val_fraction));
    f.push_back({"train", "seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("train", "seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    f.push_back(size_field("train", "hidden_units", &RunConfig::train, &TrainConfig::hidden_units));
    f.push_back({"train", "standardize",
                 [](RunConfig& c, const std::string& v) { c.train.standardize = parse_bool("train", "standardize", v); },
                 [](const RunConfig& c) { return std::string(c.train.standardize ? "true" : "false"); }});

    f.push_back(double_field("split", "train_fraction", &RunConfig::split, &SplitSpec::train_fraction));
    f.push_back({"split", "seed", [](RunConfig& c, const std::string& v) { c.split.seed = parse_u64("split", "seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.split.seed); }});
    f.push_back({"split", "stratified",
                 [](RunConfig& c, const std::string& v) { c.split.stratified = parse_bool("split", "stratified", v); },
                 [](const RunConfig& c) { return std::string(c.split.stratified ? "true" : "false"); }});
    return f;
  }();
  return table;
}

}  // namespace

IniFile IniFile::parse(const std::string& text) {
  IniFile ini;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!ini.sections_.count(section)) {
        ini.order_.push_back(section);
        ini.sections_[section];
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected key = value");
    }
    ini.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool IniFile::has(const std::string& section, const std::string& key) const { return get(section, key) != nullptr; }

const std::string* IniFile::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void IniFile::set(const std::string& section, const std::string& key, std::string value) {
  if (!sections_.count(section)) order_.push_back(section);
  sections_[section][key] = std::move(value);
}

std::string IniFile::render() const {
  std::string out;
  for (const auto& name : order_) {
    const auto& sec = sections_.at(name);
    if (!name.empty()) {
      if (!out.empty()) out += '\n';
      out += "[" + name + "]\n";
    }
    for (const auto& [k, v] : sec) out += k + " = " + v + "\n";
  }
  return out;
}

void RunConfig::validate() const {
  features.validate();
  train.validate();
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw Error(Errc::invalid_params, "split train_fraction must be in (0, 1)");
  }
}

void apply_ini(RunConfig& config, const IniFile& ini) {
  for (const auto& [section, keys] : ini.sections()) {
    if (section == "run" || section == "paths" || section == "result") continue;
    for (const auto& [key, value] : keys) {
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return section == f.section && key == f.key; });
      if (it == table.end()) throw Error(Errc::invalid_params, "unknown config key [" + section + "] " + key);
      it->set(config, value);
    }
  }
}

IniFile make_manifest(const RunConfig& config, const std::vector<std::pair<std::string, std::string>>& extra) {
  IniFile ini;
  for (const auto& [k, v] : extra) ini.set("run", k, v);
  for (const auto& f : fields()) ini.set(f.section, f.key, f.get(config));
  ini.set("run", "feature_fingerprint", config.features.fingerprint());
  return ini;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return std::filesystem::path(artifact.string() + ".manifest.ini");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

}  // namespace genre
