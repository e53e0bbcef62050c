#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genre/audio_io.h"
#include "genre/dsp.h"
#include "genre/matrix.h"

namespace genre {

/// Zwicker critical-band edges in Hz (24 bands).
inline constexpr std::array<double, 25> kBarkEdgesHz = {
    0,    100,  200,  300,  400,  510,  630,  770,  920,  1080,  1270,  1480,  1720,
    2000, 2320, 2700, 3150, 3700, 4400, 5300, 6400, 7700, 9500, 12000, 15500};

inline constexpr std::size_t kContrastBands = 7;
inline constexpr std::size_t kChromaBins = 12;

/// Extraction parameters. Defaults describe the 22050 Hz mono pipeline.
struct FeatureConfig {
  int sample_rate_hz = kPipelineRateHz;
  std::size_t frame_len = 2048;
  std::size_t hop = 512;
  std::size_t n_fft = 2048;
  std::size_t n_mels = 128;
  std::size_t n_mfcc = 20;
  double fmin_hz = 0.0;
  double fmax_hz = kPipelineRateHz / 2.0;
  double sfm_db_max = -60.0;
  double pitch_min_hz = 50.0;
  double pitch_max_hz = 2000.0;
  double f0_grid_step_hz = 1.0;
  std::vector<double> bark_edges_hz{kBarkEdgesHz.begin(), kBarkEdgesHz.end()};
  /// kContrastBands + 1 ascending edges; empty selects octave bands from 200 Hz.
  std::vector<double> contrast_edges_hz;
  double eps = 1e-10;

  /// Throws Errc::invalid_params describing the first violated invariant.
  void validate() const;
  /// Stable 16-hex-digit hash of every field.
  std::string fingerprint() const;
  /// Contrast band edges actually used (explicit or the octave default).
  std::vector<double> effective_contrast_edges() const;
};

enum class FeatureMode { mfcc_mean, extended };

std::string_view feature_mode_name(FeatureMode mode) noexcept;
/// Throws Errc::invalid_params for unknown names.
FeatureMode parse_feature_mode(std::string_view name);

/// Per-frame descriptors.
struct FrameFeatures {
  double pitch_hz = 0.0;  // 0 when unvoiced
  double energy = 0.0;
  double tonality = 0.0;
  double centroid_linear = 0.0;
  double centroid_bark = 0.0;
  double harmonicity_ratio = 0.0;
  double f0_hz = 0.0;
  std::vector<double> mfcc;
  double zcr = 0.0;
  std::array<double, kChromaBins> chroma{};
  std::array<double, kContrastBands> spectral_contrast{};
};

struct ClipFeatureVector {
  std::vector<double> values;
  FeatureMode mode = FeatureMode::mfcc_mean;
};

struct HarmonicityResult {
  double ratio = 0.0;
  double f0_hz = 0.0;
};

/// Autocorrelation pitch: sample_rate / best lag inside [rate/pitch_max,
/// rate/pitch_min], refined parabolically. Throws Errc::unvoiced when the
/// frame is silent or the best in-range r(m) is below 0.1 r(0).
double pitch_acs(std::span<const double> frame, double sample_rate_hz, double pitch_min_hz,
                 double pitch_max_hz);

/// Mean square of the frame.
double temporal_energy(std::span<const double> frame);

/// min(SFMdB / sfm_db_max, 1) clamped to [0, 1], where SFMdB is the
/// geometric-to-arithmetic mean ratio of P + eps in dB.
double tonality(const PowerSpectrum& spec, double sfm_db_max, double eps);

/// Power-weighted mean bin index.
double spectral_centroid(const PowerSpectrum& spec);

/// Band-width-weighted mean Bark band index (bands numbered from 1), with
/// band j spanning [edges[j-1], edges[j]). Bins above the last edge fall into
/// the last band.
double spectral_centroid_bark(const PowerSpectrum& spec, std::span<const double> bark_edges_hz);

struct HarmonicSearch {
  double f0_min_hz = 50.0;
  double f0_max_hz = 2000.0;
  double grid_step_hz = 1.0;
  int harmonics = 10;
  double window_fraction = 0.03;  // search window around h*f0
  double mistuning_sigma = 0.01;  // Gaussian width on relative mistuning
};

/// Harmonic-template grid search for f0 and the share of spectral energy
/// explained by the winning template.
HarmonicityResult harmonicity(const PowerSpectrum& spec, const HarmonicSearch& search);

double mel_scale(double f_hz);
double mel_to_hz(double mel);

/// Triangular, area-normalized filters with edges equally spaced in mel
/// between fmin and fmax. Rows are filters, columns are one-sided FFT bins.
Matrix mel_filterbank(const FeatureConfig& config);

/// num_frames x n_mfcc matrix. Frames must already be windowed.
Matrix mfcc(const FrameSequence& frames, const FeatureConfig& config);

/// Half the number of sign changes, with sign(v) = 1 for v >= 0 else 0.
double zcr(std::span<const double> frame);

/// Power folded onto 12 pitch classes (class 0 = A, A4 = 440 Hz), unit sum.
std::array<double, kChromaBins> chroma(const PowerSpectrum& spec);

/// Per-band difference in dB between the mean of the top and bottom
/// quintile of bin powers.
std::array<double, kContrastBands> spectral_contrast(const PowerSpectrum& spec,
                                                     std::span<const double> band_edges_hz,
                                                     double eps = 1e-10);

/// All descriptors for a single frame. `raw` is the unwindowed frame used
/// for time-domain descriptors; `windowed` feeds the spectral ones.
FrameFeatures frame_features(std::span<const double> raw, std::span<const double> windowed,
                             const FeatureConfig& config);

/// Names of the extended-mode columns in order.
std::vector<std::string> extended_feature_names(const FeatureConfig& config);

/// Clip-level vector: MFCC time means (mfcc_mean) or the time means of every
/// per-frame descriptor (extended). Throws Errc::too_short when the buffer
/// yields no frames.
ClipFeatureVector clip_features(const AudioBuffer& buf, const FeatureConfig& config, FeatureMode mode);

}  // namespace genre
