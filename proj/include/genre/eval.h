#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace genre {

/// counts[t][p]: rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::string> class_names;

  std::size_t classes() const noexcept { return counts.size(); }
  std::int64_t total() const noexcept;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  /// Set when a score fell back to 0 because its denominator was 0.
  bool zero_division = false;
};

struct AverageScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ClassificationReport {
  std::vector<std::string> class_names;
  std::vector<ClassScores> per_class;
  double accuracy = 0.0;
  AverageScores macro;
  AverageScores weighted;

  bool has_zero_division() const noexcept;
};

/// Throws Errc::label_out_of_range for labels outside [0, classes) and
/// Errc::invalid_params for length mismatches.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes,
                          std::vector<std::string> class_names = {});

/// Throws Errc::empty_matrix when the matrix holds no samples.
ClassificationReport report(const ConfusionMatrix& cm);

/// Fixed-width text table: one row per class, then accuracy, macro avg and
/// weighted avg, scores printed with two decimals.
std::string render_report_text(const ClassificationReport& r);

/// Heatmap as a standalone SVG document. Darker cells hold larger counts.
std::string render_confusion_svg(const ConfusionMatrix& cm);
void write_confusion_svg(const ConfusionMatrix& cm, const std::filesystem::path& path);

/// `true\pred,<names...>` header followed by one row per true class.
std::string confusion_to_csv(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_csv(const std::string& text);

}  // namespace genre
