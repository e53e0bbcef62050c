#pragma once

// Shared helpers for the test binaries: temp directories, synthetic signals
// and a synthetic genre corpus laid out like <root>/<genre>/<genre>.NNNNN.wav.

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "genre/audio_io.h"
#include "genre/error.h"

namespace genre::testing {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "genre_test_XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> sine(double freq_hz, double rate_hz, std::size_t n, double amp = 1.0,
                                double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(kTwoPi * freq_hz * static_cast<double>(i) / rate_hz + phase);
  return x;
}

/// Uniform in [-amp, amp], built from raw 53-bit draws so it does not depend
/// on the standard library's distribution implementations.
inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 gen(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = amp * (2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0);
  return x;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline const std::vector<std::string>& genre_names() {
  static const std::vector<std::string> names = {"blues", "classical", "country", "disco", "hiphop",
                                                 "jazz",  "metal",     "pop",     "reggae", "rock"};
  return names;
}

/// One synthetic clip for genre index `g`: a harmonic tone whose pitch
/// register, brightness, noise floor and tremolo rate depend on the genre,
/// jittered per clip.
inline std::vector<double> synth_clip(std::size_t g, std::size_t clip, double seconds, int rate_hz,
                                      std::uint64_t seed) {
  std::mt19937_64 gen(seed * 1000003ull + g * 7919ull + clip);
  const auto n = static_cast<std::size_t>(seconds * rate_hz);
  const double f0 = 110.0 * std::pow(2.0, static_cast<double>(g) * 0.45) * uniform(gen, 0.97, 1.03);
  const int harmonics = 1 + static_cast<int>(g % 5) * 2;
  const double rolloff = 0.35 + 0.12 * static_cast<double>(g % 4);
  const double noise = 0.01 + 0.03 * static_cast<double>((g * 3) % 5);
  const double trem_hz = 1.5 + static_cast<double>(g % 3) * 2.0;
  std::vector<double> x(n, 0.0);
  for (int h = 1; h <= harmonics; ++h) {
    const double a = std::pow(rolloff, h - 1);
    const double phase = uniform(gen, 0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) x[i] += a * std::sin(kTwoPi * f0 * h * static_cast<double>(i) / rate_hz + phase);
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const auto nz = white_noise(n, gen(), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double trem = 0.75 + 0.25 * std::sin(kTwoPi * trem_hz * static_cast<double>(i) / rate_hz);
    x[i] = 0.5 * trem * x[i] / peak + noise * nz[i];
    x[i] = std::clamp(x[i], -1.0, 1.0);
  }
  return x;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Writes `genres` x `per_genre` 16-bit mono clips and returns their paths in
/// (genre, filename) order.
inline std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& root, std::size_t genres,
                                                       std::size_t per_genre, double seconds,
                                                       int rate_hz = kPipelineRateHz, std::uint64_t seed = 7) {
  std::vector<std::filesystem::path> out;
  for (std::size_t g = 0; g < genres; ++g) {
    const auto& name = genre_names().at(g);
    std::filesystem::create_directories(root / name);
    for (std::size_t k = 0; k < per_genre; ++k) {
      char file[64];
      std::snprintf(file, sizeof file, "%s.%05zu.wav", name.c_str(), k);
      const auto path = root / name / file;
      write_bytes(path, encode_wav_pcm16(synth_clip(g, k, seconds, rate_hz, seed), 1, rate_hz));
      out.push_back(path);
    }
  }
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace genre::testing

/// Checks that `expr` throws genre::Error with the given code.
#define CHECK_ERRC(expr, errc)                                         \
  do {                                                                 \
    bool genre_thrown_ = false;                                        \
    try {                                                              \
      (void)(expr);                                                    \
    } catch (const ::genre::Error& genre_e_) {                         \
      genre_thrown_ = true;                                            \
      CHECK_MESSAGE(genre_e_.code() == (errc), genre_e_.what());       \
    }                                                                  \
    CHECK_MESSAGE(genre_thrown_, "expected genre::Error from " #expr); \
  } while (0)
