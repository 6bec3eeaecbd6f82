#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "asn/masks.hpp"
#include "asn/stft.hpp"
#include "asn/waveform.hpp"

using namespace asn;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> make_sine(double freq, double sr, std::int64_t n, double amp = 0.8) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    x[static_cast<std::size_t>(i)] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / sr);
  return x;
}

std::vector<double> make_noise(std::int64_t n, unsigned seed, double amp = 0.5) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = dist(rng);
  return x;
}

// Independent oracle: direct O(n^2) DFT of one windowed frame centered on
// `center`, zero outside the signal. Mirrors the stft frame contract without
// sharing any code with it.
std::vector<double> direct_frame_magnitude(const std::vector<double>& x, std::int64_t center,
                                           const StftConfig& cfg) {
  const std::vector<double> win = cfg.padded_window();
  std::vector<double> frame(static_cast<std::size_t>(cfg.fft_size), 0.0);
  for (int i = 0; i < cfg.fft_size; ++i) {
    const std::int64_t src = center - cfg.fft_size / 2 + i;
    if (src >= 0 && src < static_cast<std::int64_t>(x.size()))
      frame[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(src)] * win[static_cast<std::size_t>(i)];
  }
  std::vector<double> mags(static_cast<std::size_t>(cfg.num_bins()));
  for (int b = 0; b < cfg.num_bins(); ++b) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < cfg.fft_size; ++i) {
      const double ang = -2.0 * kPi * b * i / static_cast<double>(cfg.fft_size);
      acc += frame[static_cast<std::size_t>(i)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mags[static_cast<std::size_t>(b)] = std::abs(acc);
  }
  return mags;
}

Spectrogram random_spectrogram(int frames, int bins, unsigned seed, const StftConfig& cfg) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Spectrogram s;
  s.config = cfg;
  s.origin_length = (frames - 1) * cfg.hop_length;
  s.values.resize(frames, bins);
  for (int t = 0; t < frames; ++t)
    for (int b = 0; b < bins; ++b) s.values(t, b) = std::complex<double>(dist(rng), dist(rng));
  return s;
}

}  // namespace

TEST_CASE("stft of silence is silent") {
  const StftConfig cfg;
  auto s = stft(Waveform::mono(std::vector<double>(44100, 0.0)), cfg);
  REQUIRE(s.n_frames() == 101);
  REQUIRE(s.n_bins() == 1025);
  REQUIRE(magnitude(s).maxCoeff() == 0.0);
}

TEST_CASE("stft peak bin of a pure sine matches a direct DFT") {
  const StftConfig cfg;
  const double sr = 44100.0;
  const auto x = make_sine(441.0, sr, 44100);
  auto s = stft(Waveform::mono(x, sr), cfg);

  const int expect_bin = static_cast<int>(std::lround(441.0 / sr * cfg.fft_size));
  const Eigen::ArrayXXd mag = magnitude(s);
  // interior frames only: those whose window lies fully inside the signal
  const std::int64_t guard = cfg.fft_size / cfg.hop_length + 1;
  for (std::int64_t t = guard; t < s.n_frames() - guard; ++t) {
    Eigen::Index peak;
    mag.row(t).maxCoeff(&peak);
    REQUIRE(static_cast<int>(peak) == expect_bin);
  }

  // one interior frame against the O(n^2) oracle, all bins
  const std::int64_t t = 50;
  const auto oracle = direct_frame_magnitude(x, t * cfg.hop_length, cfg);
  for (int b = 0; b < cfg.num_bins(); ++b)
    REQUIRE(mag(t, b) == Approx(oracle[static_cast<std::size_t>(b)]).margin(1e-8));
}

TEST_CASE("stft frame 0 of a unit impulse equals the windowed DFT oracle") {
  const StftConfig cfg;
  std::vector<double> x(22050, 0.0);
  x[0] = 1.0;
  auto s = stft(Waveform::mono(x), cfg);
  const auto oracle = direct_frame_magnitude(x, 0, cfg);
  const Eigen::ArrayXXd mag = magnitude(s);
  for (int b = 0; b < cfg.num_bins(); ++b)
    REQUIRE(mag(0, b) == Approx(oracle[static_cast<std::size_t>(b)]).margin(1e-12));
}

TEST_CASE("stft rejects bad inputs") {
  const StftConfig cfg;
  REQUIRE_THROWS_AS(stft(Waveform::stereo({0.0, 0.0}, {0.0, 0.0}), cfg), std::invalid_argument);
  StftConfig bad = cfg;
  bad.win_length = bad.fft_size + 1;
  REQUIRE_THROWS_AS(stft(Waveform::mono({0.0, 0.0}), bad), std::invalid_argument);
  StftConfig gap = cfg;
  gap.hop_length = gap.win_length;  // periodic Hann is zero at its first point
  REQUIRE_THROWS_AS(gap.validate(), std::invalid_argument);
}

TEST_CASE("istft round trip reaches 60 dB SNR on seeded noise") {
  const StftConfig cfg;
  const auto x = make_noise(44100, 7u);
  auto w = Waveform::mono(x);
  auto back = istft(stft(w, cfg), cfg);
  REQUIRE(back.num_samples() == 44100);
  REQUIRE(snr_db(x, back.channels[0]) >= 60.0);
}

TEST_CASE("istft of an all-zero spectrogram is silence") {
  const StftConfig cfg;
  auto s = stft(Waveform::mono(std::vector<double>(22050, 0.0)), cfg);
  auto w = istft(s, cfg);
  REQUIRE(w.num_samples() == 22050);
  for (double v : w.channels[0]) REQUIRE(v == 0.0);
}

TEST_CASE("sine round trip error stays below 1e-4 away from the edges") {
  const StftConfig cfg;
  const auto x = make_sine(997.0, 44100.0, 44100);
  auto back = istft(stft(Waveform::mono(x), cfg), cfg);
  double max_err = 0.0;
  for (std::int64_t i = cfg.win_length; i < 44100 - cfg.win_length; ++i)
    max_err = std::max(max_err, std::abs(x[static_cast<std::size_t>(i)] -
                                         back.channels[0][static_cast<std::size_t>(i)]));
  REQUIRE(max_err < 1e-4);
}

TEST_CASE("istft rejects a mismatched config") {
  const StftConfig cfg;
  auto s = stft(Waveform::mono(make_noise(8820, 3u)), cfg);
  StftConfig other = cfg;
  other.hop_length = 512;
  REQUIRE_THROWS_AS(istft(s, other), std::invalid_argument);
}

TEST_CASE("round trip property over random lengths and seeds") {
  const StftConfig cfg;
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> len(1000, 60000);
  for (int k = 0; k < 10; ++k) {
    const auto x = make_noise(len(rng), 1000u + static_cast<unsigned>(k));
    auto back = istft(stft(Waveform::mono(x), cfg), cfg);
    REQUIRE(snr_db(x, back.channels[0]) >= 60.0);
  }
}

TEST_CASE("mixdown adds channels samplewise") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> l(500), r(500);
  for (std::size_t i = 0; i < 500; ++i) {
    l[i] = dist(rng);
    r[i] = dist(rng);
  }
  auto m = mixdown(Waveform::stereo(l, r));
  for (std::size_t i = 0; i < 500; ++i) REQUIRE(m.channels[0][i] == l[i] + r[i]);

  SECTION("opposite channels cancel") {
    std::vector<double> neg(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) neg[i] = -r[i];
    auto z = mixdown(Waveform::stereo(r, neg));
    for (double v : z.channels[0]) REQUIRE(v == 0.0);
  }
  SECTION("identical channels double") {
    auto d = mixdown(Waveform::stereo(l, l));
    for (std::size_t i = 0; i < l.size(); ++i) REQUIRE(d.channels[0][i] == 2.0 * l[i]);
  }
  SECTION("mono input rejected") {
    REQUIRE_THROWS_AS(mixdown(Waveform::mono({0.1})), std::invalid_argument);
  }
}

TEST_CASE("compute_irm basics") {
  const StftConfig cfg;
  Spectrogram a = random_spectrogram(4, 8, 11u, cfg);
  Spectrogram b = random_spectrogram(4, 8, 12u, cfg);

  SECTION("equal magnitudes give 1/sqrt(2)") {
    Spectrogram e = a;
    auto m = compute_irm(a, e);
    for (int t = 0; t < 4; ++t)
      for (int f = 0; f < 8; ++f) {
        REQUIRE(m.left(t, f) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
        REQUIRE(m.right(t, f) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
      }
  }
  SECTION("3-4-5 ratio") {
    Spectrogram l = a, r = a;
    l.values.setConstant(std::complex<double>(3.0, 0.0));
    r.values.setConstant(std::complex<double>(0.0, 4.0));
    auto m = compute_irm(l, r, 1e-12);
    REQUIRE(m.left(0, 0) == Approx(0.6).epsilon(1e-9));
    REQUIRE(m.right(0, 0) == Approx(0.8).epsilon(1e-9));
  }
  SECTION("both-zero bins map to zero, not NaN") {
    Spectrogram l = a, r = a;
    l.values.setZero();
    r.values.setZero();
    auto m = compute_irm(l, r);
    REQUIRE(m.left.isFinite().all());
    REQUIRE(m.left.maxCoeff() == 0.0);
    REQUIRE(m.right.maxCoeff() == 0.0);
  }
  SECTION("shape mismatch rejected") {
    Spectrogram small = random_spectrogram(3, 8, 13u, cfg);
    REQUIRE_THROWS_AS(compute_irm(a, small), std::invalid_argument);
  }
}

TEST_CASE("mask invariants over 100 seeded random inputs") {
  const StftConfig cfg;
  const double eps = 1e-8;
  for (unsigned seed = 0; seed < 100; ++seed) {
    Spectrogram l = random_spectrogram(3, 16, 2000u + seed, cfg);
    Spectrogram r = random_spectrogram(3, 16, 3000u + seed, cfg);
    auto m = compute_irm(l, r, eps);

    // unit energy where the bin carries energy
    const Eigen::ArrayXXd power = l.values.array().abs2() + r.values.array().abs2();
    const Eigen::ArrayXXd unit = m.left.square() + m.right.square();
    for (int t = 0; t < 3; ++t)
      for (int f = 0; f < 16; ++f)
        if (power(t, f) > 1e3 * eps) {
          REQUIRE(unit(t, f) <= 1.0 + 1e-12);
          REQUIRE(unit(t, f) >= 1.0 - 1e-5);
        }

    // swap equivariance, exact
    auto ms = compute_irm(r, l, eps);
    REQUIRE((ms.left == m.right).all());
    REQUIRE((ms.right == m.left).all());

    // scale invariance
    Spectrogram l2 = l, r2 = r;
    l2.values *= 37.5;
    r2.values *= 37.5;
    auto mc = compute_irm(l2, r2, eps);
    REQUIRE(((mc.left - m.left).abs() < 1e-6).all());
    REQUIRE(((mc.right - m.right).abs() < 1e-6).all());
  }
}

TEST_CASE("apply_masks") {
  const StftConfig cfg;
  Spectrogram mix = random_spectrogram(5, 12, 21u, cfg);
  const Eigen::ArrayXXd mag = magnitude(mix);

  SECTION("hard pass-through") {
    MaskPair m{Eigen::ArrayXXd::Ones(5, 12), Eigen::ArrayXXd::Zero(5, 12)};
    auto [ml, mr] = apply_masks(m, mix);
    REQUIRE(((ml - mag).abs() < 1e-15).all());
    REQUIRE(mr.maxCoeff() == 0.0);
  }
  SECTION("uniform equal-power masks") {
    const double c = 1.0 / std::sqrt(2.0);
    MaskPair m{Eigen::ArrayXXd::Constant(5, 12, c), Eigen::ArrayXXd::Constant(5, 12, c)};
    auto [ml, mr] = apply_masks(m, mix);
    REQUIRE(((ml - mag * c).abs() < 1e-12).all());
    REQUIRE(((mr - mag * c).abs() < 1e-12).all());
  }
  SECTION("energy partition with IRM masks") {
    Spectrogram l = random_spectrogram(5, 12, 22u, cfg);
    Spectrogram r = random_spectrogram(5, 12, 23u, cfg);
    auto m = compute_irm(l, r);
    auto [ml, mr] = apply_masks(m, mix);
    const Eigen::ArrayXXd partition = ml.square() + mr.square();
    const Eigen::ArrayXXd target = mag.square();
    for (int t = 0; t < 5; ++t)
      for (int f = 0; f < 12; ++f)
        REQUIRE(partition(t, f) <= target(t, f) * (1.0 + 1e-12) + 1e-12);
  }
  SECTION("shape mismatch rejected") {
    MaskPair m{Eigen::ArrayXXd::Ones(4, 12), Eigen::ArrayXXd::Ones(4, 12)};
    REQUIRE_THROWS_AS(apply_masks(m, mix), std::invalid_argument);
  }
}

TEST_CASE("reconstruct_stereo") {
  const StftConfig cfg;
  const auto x = make_noise(44100, 31u);
  auto mix = stft(Waveform::mono(x), cfg);

  SECTION("equal-power masks split the mixture") {
    const double c = 1.0 / std::sqrt(2.0);
    MaskPair m{Eigen::ArrayXXd::Constant(mix.n_frames(), mix.n_bins(), c),
               Eigen::ArrayXXd::Constant(mix.n_frames(), mix.n_bins(), c)};
    auto out = reconstruct_stereo(m, mix, cfg);
    REQUIRE(out.num_channels() == 2);
    REQUIRE(out.num_samples() == 44100);
    std::vector<double> scaled(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] * c;
    REQUIRE(snr_db(scaled, out.channels[0]) >= 60.0);
    REQUIRE(snr_db(scaled, out.channels[1]) >= 60.0);
  }
  SECTION("zero masks are silent") {
    MaskPair m{Eigen::ArrayXXd::Zero(mix.n_frames(), mix.n_bins()),
               Eigen::ArrayXXd::Zero(mix.n_frames(), mix.n_bins())};
    auto out = reconstruct_stereo(m, mix, cfg);
    REQUIRE(peak_abs(out) == 0.0);
  }
}

TEST_CASE("log_compress") {
  REQUIRE(log_compress(Eigen::ArrayXXd::Zero(2, 2)).maxCoeff() == 0.0);
  Eigen::ArrayXXd e(1, 1);
  e(0, 0) = std::exp(1.0) - 1.0;
  REQUIRE(log_compress(e)(0, 0) == Approx(1.0).epsilon(1e-12));

  SECTION("negative input rejected") {
    Eigen::ArrayXXd bad = Eigen::ArrayXXd::Constant(1, 1, -0.5);
    REQUIRE_THROWS_AS(log_compress(bad), std::invalid_argument);
  }
  SECTION("monotone: per-bin ordering unchanged") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> dist(0.0, 10.0);
    Eigen::ArrayXXd m(16, 4);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 4; ++j) m(i, j) = dist(rng);
    const Eigen::ArrayXXd c = log_compress(m);
    for (int j = 0; j < 4; ++j)
      for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b)
          if (m(a, j) < m(b, j)) REQUIRE(c(a, j) < c(b, j));
  }
}
