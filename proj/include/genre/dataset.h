#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "genre/features.h"
#include "genre/matrix.h"

namespace genre {

struct LabeledClip {
  std::filesystem::path path;
  std::string genre;
  std::optional<ClipFeatureVector> features;
};

/// Feature matrix with aligned integer labels. `class_names` is sorted and
/// label i names class_names[i].
struct Dataset {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> class_names;
  std::vector<std::string> filenames;
  FeatureMode feature_mode = FeatureMode::mfcc_mean;
  std::string config_fingerprint;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return X.cols(); }
  /// Throws Errc::schema_mismatch if rows, labels or names disagree.
  void check() const;
  /// Rows `indices` in the given order; class set is preserved.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  bool stratified = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Lists `root/<genre>/*.wav` sorted by (genre, filename). Throws
/// Errc::empty_dataset when nothing is found and Errc::io_error when the root
/// is not a readable directory.
std::vector<LabeledClip> scan_gtzan(const std::filesystem::path& root);

struct LabelEncoding {
  std::vector<int> y;
  std::vector<std::string> class_names;
};

LabelEncoding encode_labels(const std::vector<std::string>& genres);

/// Deterministic partition: each class (or the whole set when not stratified)
/// is shuffled with the seed and cut at round(fraction * count). Index lists
/// come back sorted ascending.
SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec);
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// CSV with header `filename,label,f0,...,f{d-1}`; the label column holds the
/// class name.
void save_features(const Dataset& ds, const std::filesystem::path& path);
Dataset load_features(const std::filesystem::path& path);

/// Seeded generator shared by the dataset and model code: mt19937_64 plus
/// portable bounded and unit-interval draws, so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Uniform in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace genre
