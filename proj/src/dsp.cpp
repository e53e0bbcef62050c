#include "genre/dsp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "genre/error.h"

namespace genre {

namespace {

struct FftPlan {
  std::vector<std::size_t> bitrev;
  std::vector<std::complex<double>> twiddles;  // e^{-2πi k/N}, k < N/2
};

const FftPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, FftPlan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  FftPlan plan;
  plan.bitrev.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    plan.bitrev[i] = r;
  }
  plan.twiddles.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    plan.twiddles[k] = {std::cos(angle), std::sin(angle)};
  }
  return cache.emplace(n, std::move(plan)).first->second;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

// Plateau-aware local maxima: a run of equal values counts once (at its first
// index) when both neighbours of the run are lower or absent. A run spanning
// the whole signal is not a peak.
std::vector<std::size_t> local_maxima(std::span<const double> env) {
  std::vector<std::size_t> peaks;
  const std::size_t n = env.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && env[j + 1] == env[i]) ++j;
    const bool left_lower = i == 0 || env[i - 1] < env[i];
    const bool right_lower = j + 1 == n || env[j + 1] < env[i];
    const bool whole = i == 0 && j + 1 == n;
    if (left_lower && right_lower && !whole) peaks.push_back(i);
    i = j + 1;
  }
  return peaks;
}

std::vector<std::size_t> condense(std::span<const double> env, std::vector<std::size_t> peaks,
                                  std::size_t min_separation) {
  if (min_separation <= 1 || peaks.size() < 2) return peaks;
  std::vector<std::size_t> order = peaks;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return env[a] > env[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t p : order) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t q) {
      return (p > q ? p - q : q - p) < min_separation;
    });
    if (clear) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

PowerSpectrum::PowerSpectrum(std::vector<double> bins, std::size_t n_fft, double sample_rate_hz)
    : bins_(std::move(bins)), n_fft_(n_fft), sample_rate_hz_(sample_rate_hz) {
  if (n_fft_ < 2 || bins_.size() != n_fft_ / 2 + 1) {
    throw Error(Errc::invalid_params, "power spectrum must have n_fft/2 + 1 bins");
  }
  if (!(sample_rate_hz_ > 0.0)) throw Error(Errc::invalid_params, "sample rate must be positive");
  for (double p : bins_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(Errc::invalid_params, "power bins must be finite and >= 0");
  }
}

std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw Error(Errc::invalid_params, "FFT size must be a power of two");
  if (n == 1) return;
  const FftPlan& plan = plan_for(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < plan.bitrev[i]) std::swap(data[i], data[plan.bitrev[i]]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto t = plan.twiddles[k * stride] * data[start + k + half];
        const auto u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }
}

std::vector<double> window_coefficients(Window window, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (window == Window::hann) {
    for (std::size_t n = 0; n < length; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
    }
  }
  return w;
}

FrameSequence frame_signal(std::span<const double> signal, std::size_t frame_len, std::size_t hop,
                           Window window) {
  if (hop == 0 || frame_len < 2) throw Error(Errc::invalid_params, "hop must be >= 1 and frame_len >= 2");
  FrameSequence seq;
  seq.frame_len = frame_len;
  seq.hop = hop;
  seq.window = window;
  const std::size_t count = signal.size() >= frame_len ? (signal.size() - frame_len) / hop + 1 : 0;
  seq.frames = Matrix(count, frame_len);
  const auto w = window_coefficients(window, frame_len);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = seq.frames.row(i);
    for (std::size_t n = 0; n < frame_len; ++n) row[n] = signal[i * hop + n] * w[n];
  }
  return seq;
}

FrameSequence frame_signal(const AudioBuffer& buf, std::size_t frame_len, std::size_t hop, Window window) {
  return frame_signal(std::span<const double>(buf.samples()), frame_len, hop, window);
}

PowerSpectrum power_spectrum(std::span<const double> frame, std::size_t n_fft, double sample_rate_hz) {
  if (!is_power_of_two(n_fft) || n_fft < frame.size() || n_fft < 2) {
    throw Error(Errc::invalid_params, "n_fft must be a power of two no smaller than the frame");
  }
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t n = 0; n < frame.size(); ++n) buf[n] = frame[n];
  fft_inplace(buf);
  std::vector<double> bins(n_fft / 2 + 1);
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = std::norm(buf[k]);
  return PowerSpectrum(std::move(bins), n_fft, sample_rate_hz);
}

double autocorrelation_at(std::span<const double> frame, std::size_t lag) {
  const std::size_t n = frame.size();
  if (lag >= n) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) acc += frame[i + lag] * frame[i];
  return acc / static_cast<double>(n);
}

std::vector<double> autocorrelation(std::span<const double> frame) {
  if (frame.empty()) throw Error(Errc::invalid_params, "autocorrelation of an empty frame");
  std::vector<double> r(frame.size());
  for (std::size_t m = 0; m < frame.size(); ++m) r[m] = autocorrelation_at(frame, m);
  return r;
}

std::vector<double> envelope(std::span<const double> signal, std::size_t window_len) {
  if (window_len == 0) throw Error(Errc::invalid_params, "envelope window must be >= 1");
  const std::size_t n = signal.size();
  if (n == 0) return {};
  if (window_len == 1) {
    std::vector<double> out(n);
    std::transform(signal.begin(), signal.end(), out.begin(), [](double v) { return std::abs(v); });
    return out;
  }
  const auto left = static_cast<std::ptrdiff_t>((window_len - 1) / 2);
  std::vector<double> prefix(n + window_len, 0.0);
  for (std::size_t j = 0; j + 1 < prefix.size(); ++j) {
    const auto src = reflect_index(static_cast<std::ptrdiff_t>(j) - left, n);
    prefix[j + 1] = prefix[j] + std::abs(signal[src]);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (prefix[i + window_len] - prefix[i]) / static_cast<double>(window_len);
  }
  return out;
}

std::vector<std::size_t> adaptive_peaks(std::span<const double> env, const PeakOptions& options) {
  if (env.empty()) throw Error(Errc::invalid_params, "empty envelope");
  if (options.target_peak_count < 1) throw Error(Errc::invalid_params, "target peak count must be >= 1");

  const auto candidates = condense(env, local_maxima(env), options.min_separation);
  const double peak_max = *std::max_element(env.begin(), env.end());
  if (candidates.empty() || !(peak_max > 0.0)) throw Error(Errc::no_peaks_found, "envelope has no local maxima");

  auto above = [&](double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t p : candidates) {
      if (env[p] >= threshold) out.push_back(p);
    }
    return out;
  };

  const double target = options.target_peak_count;
  double lo = 0.0;
  double hi = peak_max;
  double threshold = 0.5 * peak_max;
  auto peaks = above(threshold);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const auto count = static_cast<double>(peaks.size());
    if (count >= 0.8 * target && count <= 1.2 * target) break;
    if (count > 1.2 * target) {
      lo = threshold;
    } else {
      hi = threshold;
    }
    threshold = 0.5 * (lo + hi);
    peaks = above(threshold);
  }
  if (peaks.empty()) throw Error(Errc::no_peaks_found, "no peak above the adapted threshold");
  return peaks;
}

std::vector<std::size_t> adaptive_peaks(std::span<const double> env, int target_peak_count, int max_iters) {
  PeakOptions options;
  options.target_peak_count = target_peak_count;
  options.max_iters = max_iters;
  return adaptive_peaks(env, options);
}

double dominant_frequency(std::span<const double> signal, double sample_rate_hz, int pad_factor) {
  if (signal.size() < 2 || pad_factor < 1) throw Error(Errc::invalid_params, "need >= 2 samples and pad_factor >= 1");
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(signal.size());
  std::vector<double> centered(signal.size());
  double peak_abs = 0.0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    centered[i] = signal[i] - mean;
    peak_abs = std::max(peak_abs, std::abs(centered[i]));
  }
  if (peak_abs <= 1e-12) throw Error(Errc::degenerate_input, "signal is constant after mean removal");

  const std::size_t n_fft = next_power_of_two(signal.size() * static_cast<std::size_t>(pad_factor));
  const auto spec = power_spectrum(centered, n_fft, sample_rate_hz);
  const auto& p = spec.bins();
  std::size_t k = 1;
  for (std::size_t i = 2; i < p.size(); ++i) {
    if (p[i] > p[k]) k = i;
  }
  double offset = 0.0;
  if (k + 1 < p.size()) {
    const double a = std::sqrt(p[k - 1]);
    const double b = std::sqrt(p[k]);
    const double c = std::sqrt(p[k + 1]);
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  return (static_cast<double>(k) + offset) * spec.bin_width_hz();
}

}  // namespace genre
