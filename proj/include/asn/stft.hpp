#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "asn/fft.hpp"
#include "asn/waveform.hpp"

namespace asn {

/// Analysis parameters. Defaults follow 44.1 kHz audio: 2048-point FFT,
/// 40 ms periodic Hann window, 10 ms hop, center padding.
struct StftConfig {
  int fft_size{2048};
  int win_length{1764};
  int hop_length{441};
  bool center_pad{true};

  static StftConfig for_sample_rate(double sr) {
    StftConfig c;
    c.win_length = static_cast<int>(std::lround(0.040 * sr));
    c.hop_length = static_cast<int>(std::lround(0.010 * sr));
    return c;
  }

  int num_bins() const { return fft_size / 2 + 1; }

  bool operator==(const StftConfig&) const = default;

  /// Throws on parameter combinations that cannot reconstruct: win > fft,
  /// hop > win, non power-of-two FFT, or a window/hop pair whose squared
  /// overlap-add has gaps.
  void validate() const {
    if (!fft::is_power_of_two(fft_size))
      throw std::invalid_argument("StftConfig: fft_size must be a power of two");
    if (win_length < 2 || win_length > fft_size)
      throw std::invalid_argument("StftConfig: need 2 <= win_length <= fft_size");
    if (hop_length < 1 || hop_length > win_length)
      throw std::invalid_argument("StftConfig: need 1 <= hop_length <= win_length");
    // Squared-window overlap-add coverage must be bounded away from zero
    // at every interior offset, otherwise ISTFT cannot normalize.
    const std::vector<double> w = window();
    double min_cov = 1e300, max_cov = 0.0;
    for (int pos = 0; pos < hop_length; ++pos) {
      double cov = 0.0;
      for (int i = pos; i < win_length; i += hop_length) cov += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
      min_cov = std::min(min_cov, cov);
      max_cov = std::max(max_cov, cov);
    }
    if (!(min_cov > 1e-6 * max_cov))
      throw std::invalid_argument("StftConfig: window/hop pair violates overlap-add");
  }

  /// Periodic Hann of win_length points.
  std::vector<double> window() const {
    std::vector<double> w(static_cast<std::size_t>(win_length));
    for (int i = 0; i < win_length; ++i)
      w[static_cast<std::size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(win_length));
    return w;
  }

  /// Window centered inside an fft_size frame, zero-padded on both sides.
  std::vector<double> padded_window() const {
    std::vector<double> w(static_cast<std::size_t>(fft_size), 0.0);
    const std::vector<double> h = window();
    const int off = (fft_size - win_length) / 2;
    for (int i = 0; i < win_length; ++i) w[static_cast<std::size_t>(off + i)] = h[static_cast<std::size_t>(i)];
    return w;
  }
};

/// Complex T-F matrix, frames by bins, tied to the config that produced it.
struct Spectrogram {
  Eigen::MatrixXcd values;  // n_frames x n_bins
  StftConfig config;
  std::int64_t origin_length{0};
  double sample_rate{44100.0};

  std::int64_t n_frames() const { return values.rows(); }
  std::int64_t n_bins() const { return values.cols(); }
};

inline Eigen::ArrayXXd magnitude(const Spectrogram& s) { return s.values.array().abs(); }

/// ln(1 + mag). Monotone and zero-preserving.
inline Eigen::ArrayXXd log_compress(const Eigen::ArrayXXd& mag) {
  if ((mag < 0.0).any()) throw std::invalid_argument("log_compress: negative input");
  return mag.log1p();
}

/// Windowed transform of a mono waveform. With center padding frame t is
/// centered on sample t*hop and n_frames = floor(n/hop) + 1.
inline Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  if (w.num_channels() != 1) throw std::invalid_argument("stft: mono input required");
  cfg.validate();
  const auto& x = w.channels[0];
  const std::int64_t n = w.num_samples();
  if (n < 1) throw std::invalid_argument("stft: empty input");

  const int fft_size = cfg.fft_size;
  const int hop = cfg.hop_length;
  std::int64_t n_frames;
  std::int64_t first_center;  // sample index the first frame is centered on
  if (cfg.center_pad) {
    n_frames = n / hop + 1;
    first_center = 0;
  } else {
    if (n < fft_size)
      throw std::invalid_argument("stft: signal shorter than fft_size and center_pad is off");
    n_frames = (n - fft_size) / hop + 1;
    first_center = fft_size / 2;
  }

  const std::vector<double> win = cfg.padded_window();
  Spectrogram out;
  out.config = cfg;
  out.origin_length = n;
  out.sample_rate = w.sample_rate;
  out.values.resize(n_frames, cfg.num_bins());

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size));
  for (std::int64_t t = 0; t < n_frames; ++t) {
    const std::int64_t start = first_center + t * hop - fft_size / 2;
    for (int i = 0; i < fft_size; ++i) {
      const std::int64_t src = start + i;
      const double v = (src >= 0 && src < n) ? x[static_cast<std::size_t>(src)] : 0.0;
      buf[static_cast<std::size_t>(i)] = v * win[static_cast<std::size_t>(i)];
    }
    fft::transform(buf, false);
    for (int b = 0; b <= fft_size / 2; ++b) out.values(t, b) = buf[static_cast<std::size_t>(b)];
  }
  return out;
}

/// Weighted overlap-add inverse. Exact (to rounding) wherever the squared
/// window coverage is nonzero; output length equals origin_length.
inline Waveform istft(const Spectrogram& s, const StftConfig& cfg) {
  if (!(s.config == cfg)) throw std::invalid_argument("istft: config mismatch");
  cfg.validate();
  const int fft_size = cfg.fft_size;
  const int hop = cfg.hop_length;
  const std::int64_t n_frames = s.n_frames();
  if (s.n_bins() != cfg.num_bins()) throw std::invalid_argument("istft: bin count mismatch");

  const std::int64_t first_center = cfg.center_pad ? 0 : fft_size / 2;
  const std::int64_t lo = first_center - fft_size / 2;
  const std::int64_t padded_len = (n_frames - 1) * hop + fft_size;
  std::vector<double> acc(static_cast<std::size_t>(padded_len), 0.0);
  std::vector<double> wsq(static_cast<std::size_t>(padded_len), 0.0);

  const std::vector<double> win = cfg.padded_window();
  std::vector<std::complex<double>> bins(static_cast<std::size_t>(cfg.num_bins()));
  for (std::int64_t t = 0; t < n_frames; ++t) {
    for (int b = 0; b < cfg.num_bins(); ++b) bins[static_cast<std::size_t>(b)] = s.values(t, b);
    std::vector<double> frame = fft::irfft(bins, fft_size);
    const std::int64_t base = t * hop;
    for (int i = 0; i < fft_size; ++i) {
      acc[static_cast<std::size_t>(base + i)] += frame[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
      wsq[static_cast<std::size_t>(base + i)] += win[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
    }
  }

  std::vector<double> out(static_cast<std::size_t>(s.origin_length), 0.0);
  for (std::int64_t j = 0; j < s.origin_length; ++j) {
    const std::int64_t p = j - lo;
    if (p >= 0 && p < padded_len && wsq[static_cast<std::size_t>(p)] > 1e-12)
      out[static_cast<std::size_t>(j)] = acc[static_cast<std::size_t>(p)] / wsq[static_cast<std::size_t>(p)];
  }
  return Waveform::mono(std::move(out), s.sample_rate);
}

}  // namespace asn
