#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "genre/dataset.h"
#include "genre/features.h"
#include "genre/model.h"

namespace genre {

/// Flat `key = value` lines grouped under `[section]` headers. Keys before
/// any header land in section "". `#` and `;` start comment lines.
class IniFile {
 public:
  using Section = std::map<std::string, std::string>;

  /// Throws Errc::parse_error with the offending line number.
  static IniFile parse(const std::string& text);
  /// Throws Errc::io_error when unreadable.
  static IniFile load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  const std::string* get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);
  const std::map<std::string, Section>& sections() const noexcept { return sections_; }
  /// Sections in insertion order, keys sorted.
  std::string render() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Section> sections_;
};

/// Everything that determines a pipeline result.
struct RunConfig {
  FeatureConfig features;
  FeatureMode mode = FeatureMode::mfcc_mean;
  TrainConfig train;
  SplitSpec split;

  /// Throws Errc::invalid_params naming the first bad field.
  void validate() const;
};

/// Overrides fields from sections [features], [train] and [split]. Unknown
/// sections or keys and unparsable values throw Errc::invalid_params.
void apply_ini(RunConfig& config, const IniFile& ini);

/// Manifest holding the effective config plus `extra` entries appended under
/// [run]. Loading it back with apply_ini reproduces `config`.
IniFile make_manifest(const RunConfig& config, const std::vector<std::pair<std::string, std::string>>& extra);

/// `<artifact>.manifest.ini`
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);

/// Throws Errc::io_error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace genre
