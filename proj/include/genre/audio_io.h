#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace genre {

/// Rate every downstream config assumes by default.
inline constexpr int kPipelineRateHz = 22050;

/// Mono PCM samples in [-1, 1] at a fixed sample rate.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  /// Throws Errc::invalid_params if the rate is not positive or any sample is
  /// non-finite or outside [-1, 1].
  AudioBuffer(std::vector<double> samples, int sample_rate_hz);

  const std::vector<double>& samples() const noexcept { return samples_; }
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double duration_seconds() const noexcept {
    return sample_rate_hz_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_hz_ : 0.0;
  }

 private:
  std::vector<double> samples_;
  int sample_rate_hz_ = kPipelineRateHz;
};

/// Decodes a RIFF/WAVE byte stream (PCM 8/16/24/32-bit integer or 32/64-bit
/// float, including WAVE_FORMAT_EXTENSIBLE) and mixes channels down by
/// averaging each frame.
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

AudioBuffer read_wav_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Encodes interleaved samples as 16-bit PCM. Samples are clipped to [-1, 1]
/// and scaled by 32768 with rounding.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const double> interleaved, int channels,
                                           int sample_rate_hz);

/// Encodes interleaved samples as 32-bit IEEE float.
std::vector<std::uint8_t> encode_wav_float32(std::span<const double> interleaved, int channels,
                                             int sample_rate_hz);

void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buf);

/// Band-limited resampling with a Kaiser-windowed sinc kernel (16 zero
/// crossings per side at the lower of the two rates). Output length is
/// round(N * target / source); equal rates return the input unchanged.
AudioBuffer resample(const AudioBuffer& buf, int target_rate_hz);

}  // namespace genre
