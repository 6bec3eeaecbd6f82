#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace asn {

/// Windowed-sinc arbitrary-ratio resampler. Output length is
/// round(n * sr_out / sr_in), so duration is preserved within one sample.
inline std::vector<double> resample(const std::vector<double>& x, double sr_in, double sr_out) {
  if (!(sr_in > 0.0) || !(sr_out > 0.0))
    throw std::invalid_argument("resample: sample rates must be positive");
  if (sr_in == sr_out) return x;
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t out_n = std::llround(static_cast<double>(n) * sr_out / sr_in);
  std::vector<double> out(static_cast<std::size_t>(out_n), 0.0);
  if (n == 0) return out;

  // kernel stretches when downsampling so the cutoff tracks the output Nyquist
  const double scale = std::min(1.0, sr_out / sr_in);
  const double cutoff = 0.45 * scale;  // cycles per input sample
  const int half_taps = 32;
  const double support = static_cast<double>(half_taps) / scale;

  for (std::int64_t i = 0; i < out_n; ++i) {
    const double t = static_cast<double>(i) * sr_in / sr_out;
    const std::int64_t k_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - support)));
    const std::int64_t k_hi = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(t + support)));
    double acc = 0.0, norm = 0.0;
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double u = static_cast<double>(k) - t;
      const double a = 2.0 * std::numbers::pi * cutoff * u;
      const double s = std::abs(a) < 1e-12 ? 1.0 : std::sin(a) / a;
      const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * u / support);  // Hann taper
      const double h = s * w;
      acc += h * x[static_cast<std::size_t>(k)];
      norm += h;
    }
    out[static_cast<std::size_t>(i)] = norm != 0.0 ? acc / norm : 0.0;
  }
  return out;
}

}  // namespace asn
