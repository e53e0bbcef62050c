#include "genre/audio_io.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "genre/error.h"

namespace genre {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const WavFormat& fmt) {
  if (fmt.tag == kFormatFloat) {
    if (fmt.bits == 32) {
      float f;
      std::uint32_t raw = read_u32(p);
      std::memcpy(&f, &raw, sizeof f);
      return f;
    }
    std::uint64_t raw = static_cast<std::uint64_t>(read_u32(p)) |
                        (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
    return std::bit_cast<double>(raw);
  }
  switch (fmt.bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default:
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
  }
}

std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved, int channels,
                                     int sample_rate_hz, bool as_float) {
  if (channels < 1 || sample_rate_hz <= 0 || interleaved.size() % channels != 0) {
    throw Error(Errc::invalid_params, "encode_wav: inconsistent channel layout or rate");
  }
  const std::uint16_t bits = as_float ? 32 : 16;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, as_float ? kFormatFloat : kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : interleaved) {
    const double c = std::clamp(s, -1.0, 1.0);
    if (as_float) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(c)));
    } else {
      const long q = std::clamp(std::lround(c * 32768.0), -32768L, 32767L);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
  }
  return out;
}

// Kaiser-windowed sinc sampled on a fine grid over [0, kZeroCrossings].
constexpr int kZeroCrossings = 16;
constexpr int kTableResolution = 512;
constexpr double kKaiserBeta = 8.0;

const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kZeroCrossings * kTableResolution + 2, 0.0);
    const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(kZeroCrossings * kTableResolution); ++i) {
      const double s = static_cast<double>(i) / kTableResolution;
      const double sinc = s == 0.0 ? 1.0 : std::sin(std::numbers::pi * s) / (std::numbers::pi * s);
      const double u = s / kZeroCrossings;
      const double w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / norm;
      t[i] = sinc * w;
    }
    return t;
  }();
  return table;
}

double kernel_at(const std::vector<double>& table, double s) {
  s = std::abs(s);
  if (s >= kZeroCrossings) return 0.0;
  const double pos = s * kTableResolution;
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return table[i] + frac * (table[i + 1] - table[i]);
}

}  // namespace

AudioBuffer::AudioBuffer(std::vector<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz_ <= 0) throw Error(Errc::invalid_params, "sample rate must be positive");
  for (double s : samples_) {
    if (!std::isfinite(s) || std::abs(s) > 1.0) {
      throw Error(Errc::invalid_params, "samples must be finite and within [-1, 1]");
    }
  }
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::malformed_header, "missing RIFF/WAVE magic");
  }

  WavFormat fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_len < 16 || chunk_len > available) {
        throw Error(Errc::malformed_header, "fmt chunk size " + std::to_string(chunk_len));
      }
      const std::uint8_t* f = bytes.data() + body;
      fmt.tag = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.block_align = read_u16(f + 12);
      fmt.bits = read_u16(f + 14);
      if (fmt.tag == kFormatExtensible) {
        if (chunk_len < 40) throw Error(Errc::malformed_header, "short WAVE_FORMAT_EXTENSIBLE chunk");
        fmt.tag = read_u16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(Errc::malformed_header, "data chunk precedes fmt chunk");
      if (chunk_len > available) {
        throw Error(Errc::truncated_data, "data chunk declares " + std::to_string(chunk_len) +
                                              " bytes, " + std::to_string(available) + " present");
      }
      data = bytes.data() + body;
      data_len = chunk_len;
      break;
    } else if (chunk_len > available) {
      throw Error(Errc::malformed_header, "chunk overruns file");
    }
    pos = body + chunk_len + (chunk_len & 1u);
  }

  if (!have_fmt) throw Error(Errc::malformed_header, "no fmt chunk");
  if (data == nullptr) throw Error(Errc::truncated_data, "no data chunk");

  if (fmt.tag != kFormatPcm && fmt.tag != kFormatFloat) {
    throw Error(Errc::unsupported_format, "format tag " + std::to_string(fmt.tag));
  }
  const bool bits_ok = fmt.tag == kFormatPcm
                           ? (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32)
                           : (fmt.bits == 32 || fmt.bits == 64);
  if (!bits_ok) throw Error(Errc::unsupported_format, std::to_string(fmt.bits) + "-bit samples");
  if (fmt.channels == 0 || fmt.sample_rate == 0) {
    throw Error(Errc::malformed_header, "zero channels or sample rate");
  }
  const std::size_t sample_bytes = fmt.bits / 8;
  if (fmt.block_align != fmt.channels * sample_bytes) {
    throw Error(Errc::malformed_header, "block align inconsistent with channels and bit depth");
  }

  const std::size_t frames = data_len / fmt.block_align;
  std::vector<double> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* frame = data + i * fmt.block_align;
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) acc += decode_sample(frame + c * sample_bytes, fmt);
    const double v = acc / fmt.channels;
    if (!std::isfinite(v)) throw Error(Errc::unsupported_format, "non-finite float sample");
    mono[i] = std::clamp(v, -1.0, 1.0);
  }
  return AudioBuffer(std::move(mono), static_cast<int>(fmt.sample_rate));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io_error, "read failed: " + path.string());
  return bytes;
}

AudioBuffer read_wav_file(const std::filesystem::path& path) {
  return decode_wav(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const double> interleaved, int channels,
                                           int sample_rate_hz) {
  return encode_wav(interleaved, channels, sample_rate_hz, false);
}

std::vector<std::uint8_t> encode_wav_float32(std::span<const double> interleaved, int channels,
                                             int sample_rate_hz) {
  return encode_wav(interleaved, channels, sample_rate_hz, true);
}

void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buf) {
  const auto bytes = encode_wav_pcm16(buf.samples(), 1, buf.sample_rate_hz());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

AudioBuffer resample(const AudioBuffer& buf, int target_rate_hz) {
  if (target_rate_hz <= 0) throw Error(Errc::invalid_params, "target rate must be positive");
  const int source_rate = buf.sample_rate_hz();
  if (target_rate_hz == source_rate) return buf;

  const auto& x = buf.samples();
  const auto n_in = static_cast<std::int64_t>(x.size());
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate_hz / source_rate));

  const double cutoff = std::min(1.0, static_cast<double>(target_rate_hz) / source_rate);
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const auto& table = sinc_table();

  std::vector<double> y(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) * source_rate / target_rate_hz;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::int64_t>(n_in - 1, static_cast<std::int64_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      acc += x[static_cast<std::size_t>(k)] * kernel_at(table, (t - static_cast<double>(k)) * cutoff);
    }
    y[j] = std::clamp(acc * cutoff, -1.0, 1.0);
  }
  return AudioBuffer(std::move(y), target_rate_hz);
}

}  // namespace genre
