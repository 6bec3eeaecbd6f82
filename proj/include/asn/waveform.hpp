#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace asn {

/// Time-domain audio. Samples are nominally in [-1, 1]; no clipping is ever
/// applied, float headroom is preserved through the whole pipeline.
struct Waveform {
  std::vector<std::vector<double>> channels;  // 1 (mono) or 2 (stereo: L, R)
  double sample_rate{44100.0};

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::int64_t num_samples() const {
    return channels.empty() ? 0 : static_cast<std::int64_t>(channels[0].size());
  }
  double duration_s() const { return static_cast<double>(num_samples()) / sample_rate; }

  const std::vector<double>& left() const { return channels.at(0); }
  const std::vector<double>& right() const { return channels.at(1); }

  static Waveform mono(std::vector<double> samples, double sr = 44100.0) {
    Waveform w;
    w.channels.push_back(std::move(samples));
    w.sample_rate = sr;
    return w;
  }
  static Waveform stereo(std::vector<double> l, std::vector<double> r, double sr = 44100.0) {
    if (l.size() != r.size())
      throw std::invalid_argument("Waveform::stereo: channel lengths differ");
    Waveform w;
    w.channels.push_back(std::move(l));
    w.channels.push_back(std::move(r));
    w.sample_rate = sr;
    return w;
  }

  void validate() const {
    if (num_channels() != 1 && num_channels() != 2)
      throw std::invalid_argument("Waveform: channel count must be 1 or 2");
    if (num_samples() < 1) throw std::invalid_argument("Waveform: empty");
    for (const auto& ch : channels) {
      if (static_cast<std::int64_t>(ch.size()) != num_samples())
        throw std::invalid_argument("Waveform: ragged channels");
      for (double s : ch)
        if (!std::isfinite(s)) throw std::invalid_argument("Waveform: non-finite sample");
    }
  }
};

/// x_m[i] = x_L[i] + x_R[i]. The sum is deliberately not halved.
inline Waveform mixdown(const Waveform& stereo) {
  if (stereo.num_channels() != 2)
    throw std::invalid_argument("mixdown: stereo input required");
  const auto& l = stereo.channels[0];
  const auto& r = stereo.channels[1];
  std::vector<double> m(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) m[i] = l[i] + r[i];
  return Waveform::mono(std::move(m), stereo.sample_rate);
}

/// Swap L and R. Mono passes through unchanged.
inline Waveform swap_channels(const Waveform& w) {
  if (w.num_channels() != 2) return w;
  return Waveform::stereo(w.channels[1], w.channels[0], w.sample_rate);
}

inline double peak_abs(const Waveform& w) {
  double p = 0.0;
  for (const auto& ch : w.channels)
    for (double s : ch) p = std::max(p, std::abs(s));
  return p;
}

inline double channel_energy(const Waveform& w, int ch) {
  double e = 0.0;
  for (double s : w.channels.at(static_cast<std::size_t>(ch))) e += s * s;
  return e;
}

/// Mean-square energy in dBFS (0 dBFS = full-scale constant 1.0).
inline double energy_dbfs(const Waveform& w) {
  double e = 0.0;
  std::int64_t n = 0;
  for (const auto& ch : w.channels) {
    for (double s : ch) e += s * s;
    n += static_cast<std::int64_t>(ch.size());
  }
  if (n == 0 || e <= 0.0) return -300.0;
  return 10.0 * std::log10(e / static_cast<double>(n));
}

/// SNR of an estimate against a reference, in dB.
inline double snr_db(const std::vector<double>& ref, const std::vector<double>& est) {
  if (ref.size() != est.size()) throw std::invalid_argument("snr_db: length mismatch");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sig += ref[i] * ref[i];
    const double d = ref[i] - est[i];
    err += d * d;
  }
  if (err == 0.0) return 300.0;
  if (sig == 0.0) return -300.0;
  return 10.0 * std::log10(sig / err);
}

}  // namespace asn
