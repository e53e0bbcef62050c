#include "genre/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "genre/error.h"

namespace genre {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double safe_ratio(double num, double den, bool& zero_division) {
  if (den == 0.0) {
    zero_division = true;
    return 0.0;
  }
  return num / den;
}

}  // namespace

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

bool ClassificationReport::has_zero_division() const noexcept {
  return std::any_of(per_class.begin(), per_class.end(), [](const ClassScores& s) { return s.zero_division; });
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes,
                          std::vector<std::string> class_names) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::invalid_params, "label sequences differ in length");
  if (!class_names.empty() && class_names.size() != classes) {
    throw Error(Errc::invalid_params, "class name count differs from class count");
  }
  ConfusionMatrix cm;
  cm.counts.assign(classes, std::vector<std::int64_t>(classes, 0));
  if (class_names.empty()) {
    for (std::size_t c = 0; c < classes; ++c) class_names.push_back(std::to_string(c));
  }
  cm.class_names = std::move(class_names);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes) {
      throw Error(Errc::label_out_of_range, "label pair (" + std::to_string(t) + ", " + std::to_string(p) +
                                                ") outside [0, " + std::to_string(classes) + ")");
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

ClassificationReport report(const ConfusionMatrix& cm) {
  const std::size_t n = cm.classes();
  const std::int64_t total = cm.total();
  if (n == 0 || total <= 0) throw Error(Errc::empty_matrix, "confusion matrix holds no samples");

  // Every score is a ratio of integers. Per-class values use one integer
  // division (correctly rounded); averages accumulate in binary128 so the
  // final rounding to double is correct for all practical inputs.
  using wide = __float128;
  ClassificationReport r;
  r.class_names = cm.class_names;
  r.per_class.resize(n);
  std::int64_t trace = 0;
  wide macro_p = 0, macro_r = 0, macro_f1 = 0;
  wide weighted_p = 0, weighted_f1 = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::int64_t tp = cm.counts[c][c];
    std::int64_t predicted = 0;
    for (std::size_t t = 0; t < n; ++t) predicted += cm.counts[t][c];
    const auto support = std::accumulate(cm.counts[c].begin(), cm.counts[c].end(), std::int64_t{0});
    auto& s = r.per_class[c];
    s.support = support;
    s.precision = safe_ratio(static_cast<double>(tp), static_cast<double>(predicted), s.zero_division);
    s.recall = safe_ratio(static_cast<double>(tp), static_cast<double>(support), s.zero_division);
    // Harmonic mean of p and r, i.e. 2 tp / (predicted + support); both are 0
    // whenever tp is 0.
    const std::int64_t f1_den = predicted + support;
    s.f1 = tp > 0 ? static_cast<double>(2 * tp) / static_cast<double>(f1_den) : 0.0;
    trace += tp;

    if (predicted > 0) {
      macro_p += static_cast<wide>(tp) / static_cast<wide>(predicted);
      weighted_p += static_cast<wide>(support) * static_cast<wide>(tp) / static_cast<wide>(predicted);
    }
    if (support > 0) macro_r += static_cast<wide>(tp) / static_cast<wide>(support);
    if (tp > 0) {
      macro_f1 += static_cast<wide>(2 * tp) / static_cast<wide>(f1_den);
      weighted_f1 += static_cast<wide>(support) * static_cast<wide>(2 * tp) / static_cast<wide>(f1_den);
    }
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  const auto classes = static_cast<wide>(n);
  const auto t = static_cast<wide>(total);
  r.macro.precision = static_cast<double>(macro_p / classes);
  r.macro.recall = static_cast<double>(macro_r / classes);
  r.macro.f1 = static_cast<double>(macro_f1 / classes);
  r.weighted.precision = static_cast<double>(weighted_p / t);
  // support * recall is exactly tp, so the weighted recall is the accuracy.
  r.weighted.recall = r.accuracy;
  r.weighted.f1 = static_cast<double>(weighted_f1 / t);
  r.macro.support = total;
  r.weighted.support = total;
  return r;
}

std::string render_report_text(const ClassificationReport& r) {
  if (r.class_names.empty() || r.class_names.size() != r.per_class.size()) {
    throw Error(Errc::invalid_params, "report needs one non-empty name per class");
  }
  std::size_t width = std::string("weighted avg").size();
  for (const auto& name : r.class_names) {
    if (name.empty()) throw Error(Errc::invalid_params, "empty class name");
    width = std::max(width, name.size());
  }
  const int w = static_cast<int>(width);
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%*s %9s %9s %9s %9s\n\n", w, "", "precision", "recall", "f1-score", "support");
  out += line;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    std::snprintf(line, sizeof line, "%*s %9.2f %9.2f %9.2f %9lld\n", w, r.class_names[c].c_str(), s.precision,
                  s.recall, s.f1, static_cast<long long>(s.support));
    out += line;
  }
  out += "\n";
  std::snprintf(line, sizeof line, "%*s %9s %9s %9.2f %9lld\n", w, "accuracy", "", "", r.accuracy,
                static_cast<long long>(r.macro.support));
  out += line;
  std::snprintf(line, sizeof line, "%*s %9.2f %9.2f %9.2f %9lld\n", w, "macro avg", r.macro.precision,
                r.macro.recall, r.macro.f1, static_cast<long long>(r.macro.support));
  out += line;
  std::snprintf(line, sizeof line, "%*s %9.2f %9.2f %9.2f %9lld\n", w, "weighted avg", r.weighted.precision,
                r.weighted.recall, r.weighted.f1, static_cast<long long>(r.weighted.support));
  out += line;
  return out;
}

std::string render_confusion_svg(const ConfusionMatrix& cm) {
  const std::size_t n = cm.classes();
  if (n == 0 || cm.class_names.size() != n) throw Error(Errc::invalid_params, "confusion matrix without classes");
  std::int64_t peak = 0;
  for (const auto& row : cm.counts) {
    for (auto v : row) peak = std::max(peak, v);
  }

  constexpr int cell = 48;
  constexpr int margin_left = 110;
  constexpr int margin_top = 40;
  constexpr int margin_bottom = 100;
  const int size = cell * static_cast<int>(n);
  const int width = margin_left + size + 20;
  const int height = margin_top + size + margin_bottom;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<title>Confusion matrix</title>\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";

  // White (count 0) to dark blue (peak count), per-channel linear.
  constexpr int light[3] = {255, 255, 255};
  constexpr int dark[3] = {8, 48, 107};
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      const auto count = cm.counts[t][p];
      const double level = peak > 0 ? static_cast<double>(count) / static_cast<double>(peak) : 0.0;
      int rgb[3];
      for (int ch = 0; ch < 3; ++ch) {
        rgb[ch] = static_cast<int>(std::lround(light[ch] + (dark[ch] - light[ch]) * level));
      }
      char fill[8];
      std::snprintf(fill, sizeof fill, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
      const int x = margin_left + static_cast<int>(p) * cell;
      const int y = margin_top + static_cast<int>(t) * cell;
      svg << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"" << fill << "\" stroke=\"#cccccc\" data-count=\"" << count << "\"/>\n";
      svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (level > 0.5 ? "#ffffff" : "#000000") << "\">" << count << "</text>\n";
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = xml_escape(cm.class_names[i]);
    const int offset = static_cast<int>(i) * cell + cell / 2;
    svg << "<text x=\"" << margin_left - 6 << "\" y=\"" << margin_top + offset + 4 << "\" text-anchor=\"end\">"
        << name << "</text>\n";
    const int lx = margin_left + offset;
    const int ly = margin_top + size + 10;
    svg << "<text x=\"" << lx << "\" y=\"" << ly << "\" text-anchor=\"end\" transform=\"rotate(-45 " << lx << ' '
        << ly << ")\">" << name << "</text>\n";
  }
  svg << "<text x=\"" << margin_left + size / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\">Predicted</text>\n"
      << "<text x=\"14\" y=\"" << margin_top + size / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << margin_top + size / 2 << ")\">True</text>\n"
      << "</svg>\n";
  return svg.str();
}

void write_confusion_svg(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  const std::string text = render_confusion_svg(cm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (const auto& name : cm.class_names) out += "," + name;
  out += "\n";
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    out += cm.class_names[t];
    for (auto v : cm.counts[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

ConfusionMatrix confusion_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::schema_mismatch, "empty confusion matrix file");
  auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "true\\pred") {
    throw Error(Errc::schema_mismatch, "confusion matrix header must start with true\\pred");
  }
  ConfusionMatrix cm;
  cm.class_names.assign(header.begin() + 1, header.end());
  const std::size_t n = cm.class_names.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != n + 1 || fields[0] != cm.class_names[cm.counts.size() % n]) {
      throw Error(Errc::schema_mismatch, "confusion matrix row '" + fields[0] + "' does not match the header");
    }
    std::vector<std::int64_t> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = fields[i + 1];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      if (ec != std::errc() || ptr != f.data() + f.size() || row[i] < 0) {
        throw Error(Errc::parse_error, "bad count '" + f + "'");
      }
    }
    cm.counts.push_back(std::move(row));
  }
  if (cm.counts.size() != n) throw Error(Errc::schema_mismatch, "confusion matrix is not square");
  return cm;
}

}  // namespace genre
