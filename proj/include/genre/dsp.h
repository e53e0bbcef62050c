#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "genre/audio_io.h"
#include "genre/matrix.h"

namespace genre {

enum class Window { rectangular, hann };

/// Overlapping frames of a signal, one frame per row.
struct FrameSequence {
  Matrix frames;  // num_frames x frame_len
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  Window window = Window::hann;

  std::size_t num_frames() const noexcept { return frames.rows(); }
};

/// One-sided power spectrum |X(k)|^2 for k = 0 .. n_fft/2.
class PowerSpectrum {
 public:
  PowerSpectrum() = default;
  /// Throws Errc::invalid_params on negative bins or a size other than
  /// n_fft/2 + 1.
  PowerSpectrum(std::vector<double> bins, std::size_t n_fft, double sample_rate_hz);

  const std::vector<double>& bins() const noexcept { return bins_; }
  std::size_t n_fft() const noexcept { return n_fft_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  double bin_width_hz() const noexcept { return sample_rate_hz_ / static_cast<double>(n_fft_); }
  std::size_t size() const noexcept { return bins_.size(); }
  double operator[](std::size_t k) const { return bins_[k]; }

 private:
  std::vector<double> bins_;
  std::size_t n_fft_ = 0;
  double sample_rate_hz_ = 0.0;
};

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }
std::size_t next_power_of_two(std::size_t n) noexcept;

/// In-place forward DFT (unnormalized, e^{-2πi kn/N}). Size must be a power
/// of two.
void fft_inplace(std::vector<std::complex<double>>& data);

/// Periodic window coefficients of the given length.
std::vector<double> window_coefficients(Window window, std::size_t length);

/// Frame i covers samples [i*hop, i*hop + frame_len). Signals shorter than
/// one frame yield zero frames.
FrameSequence frame_signal(std::span<const double> signal, std::size_t frame_len, std::size_t hop,
                           Window window);
FrameSequence frame_signal(const AudioBuffer& buf, std::size_t frame_len, std::size_t hop, Window window);

/// Zero-pads `frame` to n_fft and returns the squared DFT magnitudes.
PowerSpectrum power_spectrum(std::span<const double> frame, std::size_t n_fft,
                             double sample_rate_hz = 1.0);

/// r(m) = (1/N) Σ_{n=0}^{N-m-1} x(n+m) x(n), for m = 0 .. N-1.
std::vector<double> autocorrelation(std::span<const double> frame);

/// Single-lag autocorrelation with the same normalization as above.
double autocorrelation_at(std::span<const double> frame, std::size_t lag);

/// Centered moving average of |x| with reflection padding at both edges.
std::vector<double> envelope(std::span<const double> signal, std::size_t window_len);

struct PeakOptions {
  int target_peak_count = 1;
  int max_iters = 50;
  /// Width interval: peaks closer than this many samples to a larger peak are
  /// condensed into it. 1 keeps every local maximum.
  std::size_t min_separation = 1;
};

/// Local maxima of `env` above an adaptively bisected threshold. The
/// threshold starts at half the envelope maximum and moves until the peak
/// count lies within ±20% of the target or the iteration budget runs out.
std::vector<std::size_t> adaptive_peaks(std::span<const double> env, const PeakOptions& options);
std::vector<std::size_t> adaptive_peaks(std::span<const double> env, int target_peak_count, int max_iters);

/// Frequency of the strongest spectral peak after mean removal and zero
/// padding to next_pow2(len * pad_factor), refined by parabolic interpolation
/// of the magnitude around the peak bin.
double dominant_frequency(std::span<const double> signal, double sample_rate_hz, int pad_factor);

}  // namespace genre
