#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "asn/fft.hpp"
#include "asn/stft.hpp"
#include "asn/waveform.hpp"

namespace asn {

namespace detail {

/// Trim or zero-pad `pred` channels to `n`; reject gross mismatches.
inline Waveform fit_length(const Waveform& pred, std::int64_t n, double tolerance_s) {
  const std::int64_t diff = std::llabs(pred.num_samples() - n);
  if (static_cast<double>(diff) > tolerance_s * pred.sample_rate)
    throw std::invalid_argument("distance: length mismatch beyond tolerance");
  Waveform out = pred;
  for (auto& ch : out.channels) ch.resize(static_cast<std::size_t>(n), 0.0);
  return out;
}

/// Zero-phase second-order Butterworth low pass (forward-backward, reflected
/// padding to kill edge transients).
inline std::vector<double> lowpass_filtfilt(const std::vector<double>& x, double cutoff_hz,
                                            double sr) {
  const double wc = std::tan(std::numbers::pi * cutoff_hz / sr);
  const double k1 = std::numbers::sqrt2 * wc;
  const double k2 = wc * wc;
  const double norm = 1.0 / (1.0 + k1 + k2);
  const double b0 = k2 * norm, b1 = 2.0 * b0, b2 = b0;
  const double a1 = 2.0 * (k2 - 1.0) * norm, a2 = (1.0 - k1 + k2) * norm;

  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t pad = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(3.0 * sr / cutoff_hz));
  std::vector<double> ext;
  ext.reserve(static_cast<std::size_t>(n + 2 * pad));
  for (std::int64_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[static_cast<std::size_t>(i)]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::int64_t i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x[static_cast<std::size_t>(n - 1)] - x[static_cast<std::size_t>(n - 1 - i)]);

  auto pass = [&](std::vector<double>& v) {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (double& s : v) {
      const double in = s;
      const double out = b0 * in + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      s = out;
    }
  };
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                             ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

}  // namespace detail

/// Amplitude envelope: magnitude of the analytic signal, low-pass smoothed.
inline std::vector<double> hilbert_envelope(const std::vector<double>& x, double sr,
                                            double smooth_hz = 20.0) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  if (n == 0) return {};
  const int m = fft::next_power_of_two(static_cast<int>(n));
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(m), {0.0, 0.0});
  for (std::int64_t i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
  fft::transform(buf, false);
  // analytic signal: keep DC and Nyquist, double the positive bins
  for (int k = 1; k < m / 2; ++k) buf[static_cast<std::size_t>(k)] *= 2.0;
  for (int k = m / 2 + 1; k < m; ++k) buf[static_cast<std::size_t>(k)] = 0.0;
  fft::transform(buf, true);
  std::vector<double> env(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) env[static_cast<std::size_t>(i)] = std::abs(buf[static_cast<std::size_t>(i)]);
  if (smooth_hz > 0.0) env = detail::lowpass_filtfilt(env, smooth_hz, sr);
  return env;
}

/// Euclidean distance between ground-truth and predicted magnitude
/// spectrograms, both channels, normalized per frame so values are
/// duration-independent.
inline double stft_distance(const Waveform& gt, const Waveform& pred, const StftConfig& cfg,
                            double length_tolerance_s = 0.1) {
  if (gt.num_channels() != 2 || pred.num_channels() != 2)
    throw std::invalid_argument("stft_distance: stereo inputs required");
  const Waveform p = detail::fit_length(pred, gt.num_samples(), length_tolerance_s);
  double total = 0.0;
  for (int ch = 0; ch < 2; ++ch) {
    const Spectrogram sg = stft(Waveform::mono(gt.channels[static_cast<std::size_t>(ch)], gt.sample_rate), cfg);
    const Spectrogram sp = stft(Waveform::mono(p.channels[static_cast<std::size_t>(ch)], p.sample_rate), cfg);
    const Eigen::ArrayXXd d = magnitude(sg) - magnitude(sp);
    total += d.square().sum() / static_cast<double>(sg.n_frames());
  }
  return total;
}

/// Euclidean distance between Hilbert envelopes, both channels, normalized
/// per sample.
inline double env_distance(const Waveform& gt, const Waveform& pred, double smooth_hz = 20.0,
                           double length_tolerance_s = 0.1) {
  if (gt.num_channels() != 2 || pred.num_channels() != 2)
    throw std::invalid_argument("env_distance: stereo inputs required");
  const Waveform p = detail::fit_length(pred, gt.num_samples(), length_tolerance_s);
  double total = 0.0;
  for (int ch = 0; ch < 2; ++ch) {
    const auto eg = hilbert_envelope(gt.channels[static_cast<std::size_t>(ch)], gt.sample_rate, smooth_hz);
    const auto ep = hilbert_envelope(p.channels[static_cast<std::size_t>(ch)], p.sample_rate, smooth_hz);
    double acc = 0.0;
    for (std::size_t i = 0; i < eg.size(); ++i) {
      const double d = eg[i] - ep[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(eg.size());
  }
  return total;
}

/// The no-spatialization reference: both channels predicted as the halved
/// mixture.
inline Waveform mono_baseline(const Waveform& gt) {
  if (gt.num_channels() != 2) throw std::invalid_argument("mono_baseline: stereo input required");
  std::vector<double> half(static_cast<std::size_t>(gt.num_samples()));
  for (std::size_t i = 0; i < half.size(); ++i)
    half[i] = 0.5 * (gt.channels[0][i] + gt.channels[1][i]);
  return Waveform::stereo(half, half, gt.sample_rate);
}

}  // namespace asn
