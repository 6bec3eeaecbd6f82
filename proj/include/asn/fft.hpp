#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace asn::fft {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 transform. Forward is unscaled, inverse
/// divides by N.
inline void transform(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<int>(n)))
    throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

/// Real-input FFT; returns the n/2+1 non-redundant bins.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> buf(n);
  for (int i = 0; i < n; ++i) buf[i] = std::complex<double>(x[i], 0.0);
  transform(buf, false);
  buf.resize(n / 2 + 1);
  return buf;
}

/// Inverse of rfft for a real signal of length n.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& bins, int n) {
  if (static_cast<int>(bins.size()) != n / 2 + 1)
    throw std::invalid_argument("irfft: bin count does not match n");
  std::vector<std::complex<double>> buf(n);
  for (int i = 0; i <= n / 2; ++i) buf[i] = bins[i];
  for (int i = n / 2 + 1; i < n; ++i) buf[i] = std::conj(bins[n - i]);
  transform(buf, true);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace asn::fft
