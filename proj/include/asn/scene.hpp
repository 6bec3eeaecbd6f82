#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "asn/features.hpp"
#include "asn/fft.hpp"
#include "asn/waveform.hpp"

namespace asn {

/// Recipe for one synthetic panned clip with an analytic mask oracle.
struct SceneSpec {
  struct Sine {
    double freq{440.0};
  };
  struct NoiseBand {
    double lo{200.0};
    double hi{4000.0};
  };
  struct HarmonicStack {
    double f0{220.0};
    int n{6};
  };
  struct ConstantPan {
    double p{0.5};
  };
  struct LinearPan {
    double p0{0.0};
    double p1{1.0};
  };
  struct SinusoidPan {
    double period_s{4.0};
    double phase{0.0};
  };

  std::variant<Sine, NoiseBand, HarmonicStack> source{Sine{}};
  std::variant<ConstantPan, LinearPan, SinusoidPan> pan_trajectory{ConstantPan{}};
  double duration_s{5.0};
  std::uint64_t seed{0};
  double sample_rate{44100.0};
  double video_fps{10.0};
  int feature_dim{64};

  void validate() const {
    if (!(duration_s > 0.0)) throw std::invalid_argument("SceneSpec: duration must be positive");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("SceneSpec: bad sample rate");
    auto check_pan = [](double p) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("SceneSpec: pan outside [0, 1]");
    };
    if (const auto* c = std::get_if<ConstantPan>(&pan_trajectory)) check_pan(c->p);
    if (const auto* l = std::get_if<LinearPan>(&pan_trajectory)) {
      check_pan(l->p0);
      check_pan(l->p1);
    }
    if (const auto* s = std::get_if<SinusoidPan>(&pan_trajectory))
      if (!(s->period_s > 0.0)) throw std::invalid_argument("SceneSpec: bad sinusoid period");
    if (const auto* nb = std::get_if<NoiseBand>(&source))
      if (!(nb->lo >= 0.0 && nb->hi > nb->lo))
        throw std::invalid_argument("SceneSpec: bad noise band");
    if (const auto* hs = std::get_if<HarmonicStack>(&source))
      if (hs->n < 1 || !(hs->f0 > 0.0))
        throw std::invalid_argument("SceneSpec: bad harmonic stack");
  }

  double pan_at(double t) const {
    if (const auto* c = std::get_if<ConstantPan>(&pan_trajectory)) return c->p;
    if (const auto* l = std::get_if<LinearPan>(&pan_trajectory)) {
      const double a = duration_s > 0.0 ? t / duration_s : 0.0;
      return l->p0 + (l->p1 - l->p0) * std::clamp(a, 0.0, 1.0);
    }
    const auto& s = std::get<SinusoidPan>(pan_trajectory);
    return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / s.period_s + s.phase);
  }
};

namespace detail {

inline std::vector<double> render_source(const SceneSpec& spec, std::int64_t n) {
  const double sr = spec.sample_rate;
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  if (const auto* sine = std::get_if<SceneSpec::Sine>(&spec.source)) {
    for (std::int64_t i = 0; i < n; ++i)
      s[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * sine->freq * i / sr);
  } else if (const auto* band = std::get_if<SceneSpec::NoiseBand>(&spec.source)) {
    std::mt19937 rng(static_cast<unsigned>(spec.seed * 2654435761u + 17u));
    std::normal_distribution<double> dist(0.0, 1.0);
    const int m = fft::next_power_of_two(static_cast<int>(n));
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = dist(rng);
    fft::transform(buf, false);
    // brickwall outside [lo, hi]
    const double df = sr / m;
    for (int k = 0; k <= m / 2; ++k) {
      const double f = k * df;
      if (f < band->lo || f > band->hi) {
        buf[static_cast<std::size_t>(k)] = 0.0;
        if (k > 0 && k < m / 2) buf[static_cast<std::size_t>(m - k)] = 0.0;
      } else if (k > 0 && k < m / 2) {
        buf[static_cast<std::size_t>(m - k)] = std::conj(buf[static_cast<std::size_t>(k)]);
      }
    }
    fft::transform(buf, true);
    for (std::int64_t i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(i)].real();
  } else {
    const auto& stack = std::get<SceneSpec::HarmonicStack>(spec.source);
    std::mt19937 rng(static_cast<unsigned>(spec.seed * 0x9E3779B9u + 3u));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int k = 1; k <= stack.n; ++k) {
      const double f = stack.f0 * k;
      if (f >= sr / 2.0) break;
      const double ph = phase(rng);
      const double g = 1.0 / k;
      for (std::int64_t i = 0; i < n; ++i)
        s[static_cast<std::size_t>(i)] += g * std::sin(2.0 * std::numbers::pi * f * i / sr + ph);
    }
  }
  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : s) v *= 0.9 / peak;
  return s;
}

}  // namespace detail

/// One clip with ids, stereo audio, time-aligned features, and (for
/// synthetic scenes) the pan trajectory that generated it.
struct ClipRecord {
  enum class Split { train, test, unassigned };

  std::string id;
  Waveform stereo;
  FeatureTrack features;
  Split split{Split::unassigned};
  std::optional<std::vector<double>> oracle_pan;  // sampled at features.fps
  FeatureProviderSpec provider{FeatureProviderSpec::synthetic(64)};
  bool near_silent{false};

  void validate() const {
    stereo.validate();
    if (stereo.num_channels() != 2) throw std::invalid_argument("ClipRecord: stereo required");
    if (features.frames() < 1) throw std::invalid_argument("ClipRecord: empty features");
    const double audio_s = stereo.duration_s();
    const double feat_s = features.frames() / features.fps;
    if (std::abs(audio_s - feat_s) > 1.0 / features.fps + 1e-9)
      throw std::invalid_argument("ClipRecord: audio and feature spans disagree");
  }
};

/// Render a synthetic scene under the constant-power pan law
/// x_L = cos(pan*pi/2) * s, x_R = sin(pan*pi/2) * s.
inline ClipRecord synth_scene(const SceneSpec& spec, const std::string& id = "scene") {
  spec.validate();
  const double sr = spec.sample_rate;
  const std::int64_t n = std::llround(spec.duration_s * sr);
  std::vector<double> s = detail::render_source(spec, n);

  std::vector<double> l(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double theta = spec.pan_at(static_cast<double>(i) / sr) * std::numbers::pi / 2.0;
    l[static_cast<std::size_t>(i)] = std::cos(theta) * s[static_cast<std::size_t>(i)];
    r[static_cast<std::size_t>(i)] = std::sin(theta) * s[static_cast<std::size_t>(i)];
  }

  const int n_vframes = std::max(1, static_cast<int>(std::llround(spec.duration_s * spec.video_fps)));
  std::vector<double> pan_track(static_cast<std::size_t>(n_vframes));
  for (int j = 0; j < n_vframes; ++j)
    pan_track[static_cast<std::size_t>(j)] = spec.pan_at(j / spec.video_fps);

  ClipRecord clip;
  clip.id = id;
  clip.stereo = Waveform::stereo(std::move(l), std::move(r), sr);
  clip.features = synthetic_position_features(pan_track, spec.feature_dim, spec.video_fps);
  clip.oracle_pan = pan_track;
  clip.provider = FeatureProviderSpec::synthetic(spec.feature_dim);
  clip.near_silent = energy_dbfs(clip.stereo) < -60.0;
  return clip;
}

}  // namespace asn
