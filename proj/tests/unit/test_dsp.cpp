#include <doctest.h>

#include <cmath>
#include <complex>

#include "genre/dsp.h"
#include "test_support.h"

using namespace genre;
using namespace genre::testing;

namespace {

std::vector<double> brute_power(const std::vector<double>& x, std::size_t n_fft) {
  std::vector<double> p(n_fft / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) acc += x[n] * std::polar(1.0, -kTwoPi * static_cast<double>(k * n) / n_fft);
    p[k] = std::norm(acc);
  }
  return p;
}

/// numpy-style "reflect" index (edge sample not repeated).
std::size_t reflect(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

std::vector<double> brute_envelope(const std::vector<double>& x, std::size_t w) {
  const long n = static_cast<long>(x.size());
  const long left = static_cast<long>((w - 1) / 2);
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long j = 0; j < static_cast<long>(w); ++j) acc += std::abs(x[reflect(i - left + j, n)]);
    out[static_cast<std::size_t>(i)] = acc / static_cast<double>(w);
  }
  return out;
}

}  // namespace

TEST_CASE("frame_signal geometry") {
  std::vector<double> x(10);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto seq = frame_signal(x, 4, 2, Window::rectangular);
  REQUIRE(seq.num_frames() == 4);
  for (std::size_t f = 0; f < 4; ++f) CHECK(seq.frames(f, 0) == static_cast<double>(2 * f));
  CHECK(frame_signal(std::vector<double>(3, 1.0), 4, 1, Window::hann).num_frames() == 0);
  CHECK_ERRC(frame_signal(x, 4, 0, Window::hann), Errc::invalid_params);
  CHECK_ERRC(frame_signal(x, 1, 1, Window::hann), Errc::invalid_params);

  const auto ones = frame_signal(std::vector<double>(8, 1.0), 8, 8, Window::hann);
  for (std::size_t n = 0; n < 8; ++n) {
    CHECK(ones.frames(0, n) == doctest::Approx(0.5 - 0.5 * std::cos(kTwoPi * n / 8.0)).epsilon(1e-15));
  }

  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = gen() % 300;
    const std::size_t len = 2 + gen() % 64;
    const std::size_t hop = 1 + gen() % 40;
    const auto s = frame_signal(std::vector<double>(n, 0.25), len, hop, Window::rectangular);
    const std::size_t expected = n >= len ? (n - len) / hop + 1 : 0;
    CHECK(s.num_frames() == expected);
    if (expected > 0) CHECK((s.num_frames() - 1) * hop + len <= n);
  }
}

TEST_CASE("power spectrum against the direct DFT") {
  const auto zero = power_spectrum(std::vector<double>(16, 0.0), 16);
  CHECK(zero.size() == 9);
  for (double p : zero.bins()) CHECK(p == 0.0);

  const std::size_t n_fft = 64;
  const std::size_t k0 = 5;
  std::vector<double> c(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n) c[n] = std::cos(kTwoPi * k0 * n / n_fft);
  const auto pc = power_spectrum(c, n_fft);
  CHECK(pc[k0] == doctest::Approx(32.0 * 32.0).epsilon(1e-12));
  for (std::size_t k = 0; k < pc.size(); ++k) {
    if (k != k0) CHECK(pc[k] < 1e-18 * pc[k0] + 1e-18);
  }

  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t len = 2 + gen() % 127;
    const std::size_t nfft = next_power_of_two(len) << (gen() % 2);
    const auto x = white_noise(len, gen());
    const auto fast = power_spectrum(x, nfft, 1000.0);
    const auto slow = brute_power(x, nfft);
    double scale = 0.0;
    for (double v : slow) scale = std::max(scale, v);
    for (std::size_t k = 0; k < slow.size(); ++k) CHECK(std::abs(fast[k] - slow[k]) <= 1e-9 * scale);
    CHECK(fast.bin_width_hz() == doctest::Approx(1000.0 / nfft));

    // Parseval over the full two-sided spectrum.
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    double freq_energy = fast[0] + fast[nfft / 2];
    for (std::size_t k = 1; k < nfft / 2; ++k) freq_energy += 2.0 * fast[k];
    CHECK(freq_energy / static_cast<double>(nfft) == doctest::Approx(time_energy).epsilon(1e-6));
  }

  CHECK_ERRC(power_spectrum(std::vector<double>(10, 0.0), 12), Errc::invalid_params);
  CHECK_ERRC(power_spectrum(std::vector<double>(10, 0.0), 8), Errc::invalid_params);
  CHECK_ERRC(PowerSpectrum({1.0, -1.0}, 2, 1.0), Errc::invalid_params);
  CHECK_ERRC(PowerSpectrum({1.0, 1.0, 1.0}, 2, 1.0), Errc::invalid_params);
}

TEST_CASE("autocorrelation") {
  const auto r = autocorrelation(std::vector<double>{1, 0, 0, 0});
  CHECK(r == std::vector<double>{0.25, 0, 0, 0});
  CHECK_ERRC(autocorrelation(std::vector<double>{}), Errc::invalid_params);

  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = white_noise(32, gen());
    const auto fast = autocorrelation(x);
    double energy = 0.0;
    for (double v : x) energy += v * v;
    CHECK(fast[0] == doctest::Approx(energy / 32.0).epsilon(1e-14));
    for (std::size_t m = 0; m < 32; ++m) {
      double acc = 0.0;
      for (std::size_t n = 0; n + m < 32; ++n) acc += x[n + m] * x[n];
      CHECK(fast[m] == acc / 32.0);
      CHECK(std::abs(fast[m]) <= fast[0]);
      // Symmetry in |m|: the time-reversed frame has the same sequence.
      std::vector<double> rev(x.rbegin(), x.rend());
      CHECK(autocorrelation_at(rev, m) == doctest::Approx(fast[m]).epsilon(1e-12));
    }
  }
}

TEST_CASE("envelope") {
  const auto c = envelope(std::vector<double>(50, -0.3), 7);
  for (double v : c) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));

  const auto x = white_noise(40, 9);
  const auto id = envelope(x, 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(id[i] == std::abs(x[i]));

  std::vector<double> pulse(60, 0.0);
  for (std::size_t i = 20; i < 30; ++i) pulse[i] = (i % 2 == 0) ? 1.0 : -1.0;
  for (std::size_t w : {2u, 5u, 8u, 11u}) {
    const auto fast = envelope(pulse, w);
    const auto slow = brute_envelope(pulse, w);
    REQUIRE(fast.size() == pulse.size());
    for (std::size_t i = 0; i < pulse.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
  // Edge reflection: window wider than the left margin.
  const auto noisy = white_noise(25, 4);
  const auto fast = envelope(noisy, 9);
  const auto slow = brute_envelope(noisy, 9);
  for (std::size_t i = 0; i < noisy.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));

  CHECK_ERRC(envelope(x, 0), Errc::invalid_params);
}

TEST_CASE("adaptive peaks") {
  std::vector<double> env(100, 0.0);
  env[10] = env[50] = env[90] = 1.0;
  CHECK(adaptive_peaks(env, 3, 50) == std::vector<std::size_t>{10, 50, 90});

  CHECK_ERRC(adaptive_peaks(std::vector<double>(30, 0.7), 2, 50), Errc::no_peaks_found);
  CHECK_ERRC(adaptive_peaks(std::vector<double>(30, 0.0), 2, 50), Errc::no_peaks_found);
  CHECK_ERRC(adaptive_peaks(std::vector<double>{}, 2, 50), Errc::invalid_params);
  CHECK_ERRC(adaptive_peaks(env, 0, 50), Errc::invalid_params);

  // Small ripples above a low floor are ignored in favour of the big peaks.
  std::vector<double> mixed(200, 0.0);
  for (std::size_t i = 0; i < 200; i += 7) mixed[i] = 0.05;
  for (std::size_t i : {30u, 80u, 130u, 180u}) mixed[i] = 1.0 - 0.1 * static_cast<double>(i % 3);
  const auto four = adaptive_peaks(mixed, 4, 50);
  CHECK(four == std::vector<std::size_t>{30, 80, 130, 180});

  // Plateau: one index per flat top.
  std::vector<double> plateau{0, 1, 1, 1, 0, 0, 2, 2, 0};
  const auto p = adaptive_peaks(plateau, 2, 50);
  CHECK(p.size() == 2);

  // Width interval condenses a cluster of maxima into its largest member.
  std::vector<double> cluster(100, 0.0);
  cluster[40] = 0.9;
  cluster[43] = 1.0;
  cluster[46] = 0.8;
  cluster[80] = 0.95;
  PeakOptions opt;
  opt.target_peak_count = 2;
  opt.min_separation = 10;
  CHECK(adaptive_peaks(cluster, opt) == std::vector<std::size_t>{43, 80});
}

TEST_CASE("dominant frequency") {
  const auto tone = sine(1000.0, 22050.0, 4096, 0.7);
  CHECK(std::abs(dominant_frequency(tone, 22050.0, 4) - 1000.0) <= 1.0);

  // Mean removal keeps a DC offset from winning.
  auto offset = sine(523.25, 22050.0, 4096, 0.3);
  for (double& v : offset) v += 0.6;
  CHECK(std::abs(dominant_frequency(offset, 22050.0, 4) - 523.25) <= 1.0);

  const std::size_t n = 1024;
  const std::size_t k0 = 37;
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = std::cos(kTwoPi * k0 * i / n);
  CHECK(dominant_frequency(c, 8000.0, 1) == doctest::Approx(k0 * 8000.0 / n).epsilon(1e-9));

  CHECK_ERRC(dominant_frequency(std::vector<double>(100, 0.4), 8000.0, 4), Errc::degenerate_input);
  CHECK_ERRC(dominant_frequency(std::vector<double>(100, 0.0), 8000.0, 4), Errc::degenerate_input);
  CHECK_ERRC(dominant_frequency(std::vector<double>{1.0}, 8000.0, 4), Errc::invalid_params);
  CHECK_ERRC(dominant_frequency(tone, 8000.0, 0), Errc::invalid_params);
}
