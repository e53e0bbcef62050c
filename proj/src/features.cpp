#include "genre/features.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "genre/error.h"

namespace genre {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::invalid_params, what);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Sparse mel filterbank + orthonormal DCT-II, shared by the matrix and
// per-frame MFCC paths.
class MfccEngine {
 public:
  explicit MfccEngine(const FeatureConfig& config) : config_(config) {
    require(config.n_mfcc <= config.n_mels, "n_mfcc must not exceed n_mels");
    const Matrix fb = mel_filterbank(config);
    rows_.resize(fb.rows());
    for (std::size_t m = 0; m < fb.rows(); ++m) {
      auto& r = rows_[m];
      r.first = fb.cols();
      for (std::size_t k = 0; k < fb.cols(); ++k) {
        if (fb(m, k) != 0.0) {
          if (r.first == fb.cols()) r.first = k;
          r.weights.resize(k - r.first + 1, 0.0);
          r.weights[k - r.first] = fb(m, k);
        }
      }
    }
    const std::size_t n = config.n_mels;
    dct_ = Matrix(config.n_mfcc, n);
    for (std::size_t c = 0; c < config.n_mfcc; ++c) {
      const double scale = c == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (std::size_t i = 0; i < n; ++i) {
        dct_(c, i) = scale * std::cos(std::numbers::pi * c * (2.0 * i + 1.0) / (2.0 * n));
      }
    }
  }

  void compute(const PowerSpectrum& spec, std::span<double> out) const {
    std::vector<double> log_mel(rows_.size());
    for (std::size_t m = 0; m < rows_.size(); ++m) {
      double e = 0.0;
      const auto& r = rows_[m];
      for (std::size_t j = 0; j < r.weights.size(); ++j) e += r.weights[j] * spec[r.first + j];
      log_mel[m] = std::log(std::max(e, config_.eps));
    }
    for (std::size_t c = 0; c < dct_.rows(); ++c) {
      double acc = 0.0;
      const auto basis = dct_.row(c);
      for (std::size_t i = 0; i < log_mel.size(); ++i) acc += basis[i] * log_mel[i];
      out[c] = acc;
    }
  }

 private:
  struct SparseRow {
    std::size_t first = 0;
    std::vector<double> weights;
  };
  FeatureConfig config_;
  std::vector<SparseRow> rows_;
  Matrix dct_;
};

// Range argmax in O(1) after O(n log n) preprocessing.
class RangeArgmax {
 public:
  explicit RangeArgmax(const std::vector<double>& values) : values_(values) {
    const std::size_t n = values.size();
    log_.assign(n + 1, 0);
    for (std::size_t i = 2; i <= n; ++i) log_[i] = log_[i / 2] + 1;
    table_.push_back(std::vector<std::size_t>(n));
    std::iota(table_[0].begin(), table_[0].end(), std::size_t{0});
    for (std::size_t level = 1; (std::size_t{1} << level) <= n; ++level) {
      const std::size_t span = std::size_t{1} << level;
      std::vector<std::size_t> row(n - span + 1);
      const auto& prev = table_[level - 1];
      for (std::size_t i = 0; i + span <= n; ++i) row[i] = better(prev[i], prev[i + span / 2]);
      table_.push_back(std::move(row));
    }
  }

  std::size_t query(std::size_t lo, std::size_t hi) const {
    const std::size_t level = log_[hi - lo + 1];
    return better(table_[level][lo], table_[level][hi + 1 - (std::size_t{1} << level)]);
  }

 private:
  std::size_t better(std::size_t a, std::size_t b) const {
    return values_[b] > values_[a] ? b : a;
  }
  const std::vector<double>& values_;
  std::vector<std::size_t> log_;
  std::vector<std::vector<std::size_t>> table_;
};

double total_power(const PowerSpectrum& spec) {
  return std::accumulate(spec.bins().begin(), spec.bins().end(), 0.0);
}

FrameFeatures frame_features_impl(std::span<const double> raw, std::span<const double> windowed,
                                  const FeatureConfig& config, const MfccEngine& engine,
                                  const std::vector<double>& contrast_edges) {
  FrameFeatures f;
  const auto rate = static_cast<double>(config.sample_rate_hz);
  try {
    f.pitch_hz = pitch_acs(raw, rate, config.pitch_min_hz, config.pitch_max_hz);
  } catch (const Error& e) {
    if (e.code() != Errc::unvoiced) throw;
  }
  f.energy = temporal_energy(raw);
  f.zcr = zcr(raw);

  const auto spec = power_spectrum(windowed, config.n_fft, rate);
  f.tonality = tonality(spec, config.sfm_db_max, config.eps);
  f.mfcc.assign(config.n_mfcc, 0.0);
  engine.compute(spec, f.mfcc);

  if (total_power(spec) > 0.0) {
    f.centroid_linear = spectral_centroid(spec);
    f.centroid_bark = spectral_centroid_bark(spec, config.bark_edges_hz);
    HarmonicSearch search;
    search.f0_min_hz = config.pitch_min_hz;
    search.f0_max_hz = config.pitch_max_hz;
    search.grid_step_hz = config.f0_grid_step_hz;
    const auto h = harmonicity(spec, search);
    f.harmonicity_ratio = h.ratio;
    f.f0_hz = h.f0_hz;
    f.chroma = chroma(spec);
    f.spectral_contrast = spectral_contrast(spec, contrast_edges, config.eps);
  }
  return f;
}

}  // namespace

void FeatureConfig::validate() const {
  require(sample_rate_hz > 0, "sample_rate_hz must be positive");
  require(frame_len >= 2, "frame_len must be >= 2");
  require(hop >= 1, "hop must be >= 1");
  require(is_power_of_two(n_fft) && n_fft >= frame_len, "n_fft must be a power of two >= frame_len");
  require(n_mels >= 1, "n_mels must be >= 1");
  require(n_mfcc >= 1 && n_mfcc <= n_mels, "n_mfcc must be in [1, n_mels]");
  require(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate_hz / 2.0,
          "need 0 <= fmin < fmax <= sample_rate/2");
  require(sfm_db_max < 0.0, "sfm_db_max must be negative");
  require(pitch_min_hz > 0.0 && pitch_min_hz < pitch_max_hz, "need 0 < pitch_min < pitch_max");
  require(f0_grid_step_hz > 0.0, "f0_grid_step_hz must be positive");
  require(bark_edges_hz.size() >= 2 && bark_edges_hz.front() == 0.0, "bark edges must start at 0");
  require(std::adjacent_find(bark_edges_hz.begin(), bark_edges_hz.end(), std::greater_equal<>()) ==
              bark_edges_hz.end(),
          "bark edges must be strictly ascending");
  require(eps > 0.0, "eps must be positive");
  const auto edges = effective_contrast_edges();
  require(edges.size() == kContrastBands + 1, "spectral contrast needs 8 band edges");
  require(std::adjacent_find(edges.begin(), edges.end(), std::greater_equal<>()) == edges.end(),
          "contrast edges must be strictly ascending");
  require(edges.back() <= sample_rate_hz / 2.0 + 1e-9, "contrast edges must not exceed sample_rate/2");
}

std::vector<double> FeatureConfig::effective_contrast_edges() const {
  if (!contrast_edges_hz.empty()) return contrast_edges_hz;
  return {0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, sample_rate_hz / 2.0};
}

std::string FeatureConfig::fingerprint() const {
  std::string text;
  char buf[64];
  auto add = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.17g;", key, v);
    text += buf;
  };
  add("sample_rate_hz", sample_rate_hz);
  add("frame_len", static_cast<double>(frame_len));
  add("hop", static_cast<double>(hop));
  add("n_fft", static_cast<double>(n_fft));
  add("n_mels", static_cast<double>(n_mels));
  add("n_mfcc", static_cast<double>(n_mfcc));
  add("fmin_hz", fmin_hz);
  add("fmax_hz", fmax_hz);
  add("sfm_db_max", sfm_db_max);
  add("pitch_min_hz", pitch_min_hz);
  add("pitch_max_hz", pitch_max_hz);
  add("f0_grid_step_hz", f0_grid_step_hz);
  for (double e : bark_edges_hz) add("bark", e);
  for (double e : effective_contrast_edges()) add("contrast", e);
  add("eps", eps);
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

std::string_view feature_mode_name(FeatureMode mode) noexcept {
  return mode == FeatureMode::extended ? "extended" : "mfcc_mean";
}

FeatureMode parse_feature_mode(std::string_view name) {
  if (name == "mfcc_mean") return FeatureMode::mfcc_mean;
  if (name == "extended") return FeatureMode::extended;
  throw Error(Errc::invalid_params, "unknown feature mode '" + std::string(name) + "'");
}

double pitch_acs(std::span<const double> frame, double sample_rate_hz, double pitch_min_hz,
                 double pitch_max_hz) {
  require(sample_rate_hz > 0.0 && pitch_min_hz > 0.0 && pitch_min_hz < pitch_max_hz,
          "invalid pitch search range");
  const auto lag_min = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(sample_rate_hz / pitch_max_hz)));
  std::size_t lag_max = static_cast<std::size_t>(std::floor(sample_rate_hz / pitch_min_hz));
  if (frame.size() < 3) throw Error(Errc::invalid_params, "frame too short for pitch search");
  lag_max = std::min(lag_max, frame.size() - 2);
  require(lag_min <= lag_max, "pitch lag range is empty for this frame length");

  const double r0 = autocorrelation_at(frame, 0);
  if (!(r0 > 0.0)) throw Error(Errc::unvoiced, "silent frame");

  std::vector<double> r(lag_max + 2);
  for (std::size_t m = lag_min - 1; m <= lag_max + 1; ++m) r[m] = autocorrelation_at(frame, m);

  std::size_t best = 0;
  for (std::size_t m = lag_min; m <= lag_max; ++m) {
    const bool local_max = r[m] >= r[m - 1] && r[m] >= r[m + 1];
    if (local_max && (best == 0 || r[m] > r[best])) best = m;
  }
  if (best == 0 || r[best] < 0.1 * r0) throw Error(Errc::unvoiced, "no periodicity in the pitch range");

  double offset = 0.0;
  const double denom = r[best - 1] - 2.0 * r[best] + r[best + 1];
  if (denom < 0.0) offset = std::clamp(0.5 * (r[best - 1] - r[best + 1]) / denom, -0.5, 0.5);
  return sample_rate_hz / (static_cast<double>(best) + offset);
}

double temporal_energy(std::span<const double> frame) {
  require(!frame.empty(), "temporal_energy of an empty frame");
  double acc = 0.0;
  for (double x : frame) acc += x * x;
  return acc / static_cast<double>(frame.size());
}

double tonality(const PowerSpectrum& spec, double sfm_db_max, double eps) {
  require(spec.size() > 0, "empty spectrum");
  require(sfm_db_max < 0.0, "sfm_db_max must be negative");
  // Equal bins: the two means coincide, so skip the rounding in the logs.
  const auto [lo, hi] = std::minmax_element(spec.bins().begin(), spec.bins().end());
  if (*lo == *hi) return 0.0;
  double log_sum = 0.0;
  double sum = 0.0;
  for (double p : spec.bins()) {
    log_sum += std::log(p + eps);
    sum += p + eps;
  }
  const auto n = static_cast<double>(spec.size());
  const double log_gm = log_sum / n;
  const double log_am = std::log(sum / n);
  const double sfm_db = 10.0 * (log_gm - log_am) / std::numbers::ln10;
  return std::clamp(std::min(sfm_db / sfm_db_max, 1.0), 0.0, 1.0);
}

double spectral_centroid(const PowerSpectrum& spec) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    num += static_cast<double>(k) * spec[k];
    den += spec[k];
  }
  if (!(den > 0.0)) throw Error(Errc::degenerate_input, "all-zero spectrum");
  return num / den;
}

double spectral_centroid_bark(const PowerSpectrum& spec, std::span<const double> bark_edges_hz) {
  require(bark_edges_hz.size() >= 2, "need at least two bark edges");
  const std::size_t bands = bark_edges_hz.size() - 1;
  std::vector<double> energy(bands + 1, 0.0);  // 1-based
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * spec.bin_width_hz();
    auto j = static_cast<std::size_t>(std::upper_bound(bark_edges_hz.begin(), bark_edges_hz.end(), f) -
                                      bark_edges_hz.begin());
    j = std::clamp<std::size_t>(j, 1, bands);
    energy[j] += spec[k];
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 1; j <= bands; ++j) {
    const double width = bark_edges_hz[j] - bark_edges_hz[j - 1];
    num += static_cast<double>(j) * width * energy[j];
    den += width * energy[j];
  }
  if (!(den > 0.0)) throw Error(Errc::degenerate_input, "all-zero spectrum");
  return num / den;
}

HarmonicityResult harmonicity(const PowerSpectrum& spec, const HarmonicSearch& search) {
  require(search.f0_min_hz > 0.0 && search.f0_min_hz <= search.f0_max_hz && search.grid_step_hz > 0.0 &&
              search.harmonics >= 1,
          "invalid harmonic search");
  const auto& p = spec.bins();
  const double total = total_power(spec);
  if (!(total > 0.0)) throw Error(Errc::degenerate_input, "all-zero spectrum");

  const std::size_t n = p.size();
  const double bw = spec.bin_width_hz();
  const double nyquist = static_cast<double>(n - 1) * bw;

  // Peak frequency per bin refined by a parabola through log power.
  const double floor = total * 1e-300 + 1e-300;
  std::vector<double> refined(n);
  for (std::size_t k = 0; k < n; ++k) {
    double offset = 0.0;
    if (k > 0 && k + 1 < n) {
      const double a = std::log(p[k - 1] + floor);
      const double b = std::log(p[k] + floor);
      const double c = std::log(p[k + 1] + floor);
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    refined[k] = (static_cast<double>(k) + offset) * bw;
  }
  const RangeArgmax argmax(p);

  struct Match {
    std::size_t bin;
    double weight;
  };
  auto match = [&](double target) -> Match {
    const double lo_hz = target * (1.0 - search.window_fraction);
    const double hi_hz = target * (1.0 + search.window_fraction);
    auto lo = static_cast<std::size_t>(std::ceil(lo_hz / bw));
    auto hi = std::min(n - 1, static_cast<std::size_t>(std::floor(hi_hz / bw)));
    if (lo > hi) {
      lo = hi = std::min(n - 1, static_cast<std::size_t>(std::lround(target / bw)));
    }
    const std::size_t k = argmax.query(lo, hi);
    const double mistuning = (refined[k] - target) / (target * search.mistuning_sigma);
    return {k, std::exp(-0.5 * mistuning * mistuning)};
  };

  double best_score = -1.0;
  double best_f0 = search.f0_min_hz;
  const auto steps = static_cast<std::size_t>(std::floor((search.f0_max_hz - search.f0_min_hz) / search.grid_step_hz + 1e-9));
  for (std::size_t s = 0; s <= steps; ++s) {
    const double f0 = search.f0_min_hz + static_cast<double>(s) * search.grid_step_hz;
    double score = 0.0;
    for (int h = 1; h <= search.harmonics; ++h) {
      const double target = h * f0;
      if (target * (1.0 - search.window_fraction) > nyquist) break;
      const auto m = match(target);
      score += m.weight * p[m.bin] / h;
    }
    if (score > best_score) {
      best_score = score;
      best_f0 = f0;
    }
  }

  // Energy of the main lobes (±2 bins) of the well-tuned harmonics of the winner.
  std::vector<bool> counted(n, false);
  double captured = 0.0;
  for (int h = 1; h <= search.harmonics; ++h) {
    const double target = h * best_f0;
    if (target * (1.0 - search.window_fraction) > nyquist) break;
    const auto m = match(target);
    if (m.weight < 0.5) continue;
    const std::size_t lo = m.bin >= 2 ? m.bin - 2 : 0;
    const std::size_t hi = std::min(n - 1, m.bin + 2);
    for (std::size_t k = lo; k <= hi; ++k) {
      if (!counted[k]) {
        counted[k] = true;
        captured += p[k];
      }
    }
  }
  return {std::clamp(captured / total, 0.0, 1.0), best_f0};
}

double mel_scale(double f_hz) { return 2595.0 * std::log10(1.0 + f_hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const FeatureConfig& config) {
  const std::size_t bins = config.n_fft / 2 + 1;
  const std::size_t n = config.n_mels;
  const double mel_lo = mel_scale(config.fmin_hz);
  const double mel_hi = mel_scale(config.fmax_hz);
  std::vector<double> edges(n + 2);
  for (std::size_t i = 0; i < n + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n + 1));
  }
  Matrix fb(n, bins);
  const double bin_hz = static_cast<double>(config.sample_rate_hz) / static_cast<double>(config.n_fft);
  for (std::size_t m = 0; m < n; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    const double area_norm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rising = (f - left) / (center - left);
      const double falling = (right - f) / (right - center);
      fb(m, k) = std::max(0.0, std::min(rising, falling)) * area_norm;
    }
  }
  return fb;
}

Matrix mfcc(const FrameSequence& frames, const FeatureConfig& config) {
  config.validate();
  require(frames.frame_len <= config.n_fft, "frame longer than n_fft");
  const MfccEngine engine(config);
  Matrix out(frames.num_frames(), config.n_mfcc);
  for (std::size_t i = 0; i < frames.num_frames(); ++i) {
    const auto spec = power_spectrum(frames.frames.row(i), config.n_fft, config.sample_rate_hz);
    engine.compute(spec, out.row(i));
  }
  return out;
}

double zcr(std::span<const double> frame) {
  require(frame.size() >= 2, "zcr needs at least two samples");
  int changes = 0;
  for (std::size_t n = 1; n < frame.size(); ++n) {
    changes += (frame[n] >= 0.0) != (frame[n - 1] >= 0.0);
  }
  return 0.5 * changes;
}

std::array<double, kChromaBins> chroma(const PowerSpectrum& spec) {
  std::array<double, kChromaBins> out{};
  double total = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * spec.bin_width_hz();
    const long semis = std::lround(12.0 * std::log2(f / 440.0));
    const auto cls = static_cast<std::size_t>(((semis % 12) + 12) % 12);
    out[cls] += spec[k];
    total += spec[k];
  }
  if (!(total > 0.0)) throw Error(Errc::degenerate_input, "no energy above DC");
  for (double& v : out) v /= total;
  return out;
}

std::array<double, kContrastBands> spectral_contrast(const PowerSpectrum& spec,
                                                     std::span<const double> band_edges_hz, double eps) {
  require(band_edges_hz.size() == kContrastBands + 1, "spectral contrast needs 8 band edges");
  if (!(total_power(spec) > 0.0)) throw Error(Errc::degenerate_input, "all-zero spectrum");
  std::array<double, kContrastBands> out{};
  for (std::size_t b = 0; b < kContrastBands; ++b) {
    const bool last = b + 1 == kContrastBands;
    std::vector<double> band;
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * spec.bin_width_hz();
      if (f >= band_edges_hz[b] && (f < band_edges_hz[b + 1] || (last && f <= band_edges_hz[b + 1]))) {
        band.push_back(spec[k]);
      }
    }
    if (band.empty()) throw Error(Errc::degenerate_input, "spectral contrast band holds no bins");
    std::sort(band.begin(), band.end());
    const auto q = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * band.size())));
    const double valley = std::accumulate(band.begin(), band.begin() + q, 0.0) / q;
    const double peak = std::accumulate(band.end() - q, band.end(), 0.0) / q;
    out[b] = 10.0 * std::log10(peak + eps) - 10.0 * std::log10(valley + eps);
  }
  return out;
}

FrameFeatures frame_features(std::span<const double> raw, std::span<const double> windowed,
                             const FeatureConfig& config) {
  config.validate();
  const MfccEngine engine(config);
  return frame_features_impl(raw, windowed, config, engine, config.effective_contrast_edges());
}

std::vector<std::string> extended_feature_names(const FeatureConfig& config) {
  std::vector<std::string> names = {"pitch_hz", "energy", "tonality", "centroid_linear",
                                    "centroid_bark", "harmonicity_ratio", "f0_hz"};
  for (std::size_t i = 0; i < config.n_mfcc; ++i) names.push_back("mfcc_" + std::to_string(i));
  names.emplace_back("zcr");
  static constexpr const char* kPitchClasses[] = {"A", "A#", "B", "C", "C#", "D",
                                                  "D#", "E", "F", "F#", "G", "G#"};
  for (const char* pc : kPitchClasses) names.push_back(std::string("chroma_") + pc);
  for (std::size_t b = 0; b < kContrastBands; ++b) names.push_back("contrast_" + std::to_string(b));
  return names;
}

ClipFeatureVector clip_features(const AudioBuffer& buf, const FeatureConfig& config, FeatureMode mode) {
  config.validate();
  require(buf.sample_rate_hz() == config.sample_rate_hz, "buffer rate differs from the feature config rate");
  const auto windowed = frame_signal(buf, config.frame_len, config.hop, Window::hann);
  if (windowed.num_frames() == 0) {
    throw Error(Errc::too_short, "clip of " + std::to_string(buf.size()) + " samples yields no frames");
  }
  const auto n_frames = static_cast<double>(windowed.num_frames());

  ClipFeatureVector out;
  out.mode = mode;
  if (mode == FeatureMode::mfcc_mean) {
    const Matrix m = mfcc(windowed, config);
    out.values.assign(config.n_mfcc, 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t c = 0; c < m.cols(); ++c) out.values[c] += m(i, c);
    }
    for (double& v : out.values) v /= n_frames;
    return out;
  }

  const auto raw = frame_signal(buf, config.frame_len, config.hop, Window::rectangular);
  const MfccEngine engine(config);
  const auto contrast_edges = config.effective_contrast_edges();
  std::vector<double> sums(extended_feature_names(config).size(), 0.0);
  for (std::size_t i = 0; i < windowed.num_frames(); ++i) {
    const auto f = frame_features_impl(raw.frames.row(i), windowed.frames.row(i), config, engine, contrast_edges);
    std::size_t c = 0;
    for (double v : {f.pitch_hz, f.energy, f.tonality, f.centroid_linear, f.centroid_bark,
                     f.harmonicity_ratio, f.f0_hz}) {
      sums[c++] += v;
    }
    for (double v : f.mfcc) sums[c++] += v;
    sums[c++] += f.zcr;
    for (double v : f.chroma) sums[c++] += v;
    for (double v : f.spectral_contrast) sums[c++] += v;
  }
  for (double& v : sums) v /= n_frames;
  out.values = std::move(sums);
  return out;
}

}  // namespace genre
