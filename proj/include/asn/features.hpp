#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace asn {

/// Per-frame visual feature vectors at a known frame rate.
struct FeatureTrack {
  Eigen::MatrixXf vectors;  // n_frames x dim
  double fps{10.0};

  int frames() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Where a clip's features come from and whether a left/right flip transform
/// exists for them.
struct FeatureProviderSpec {
  enum class Kind { synthetic_position, precomputed };
  Kind kind{Kind::synthetic_position};
  int dim{64};
  bool flip_supported{true};

  static FeatureProviderSpec synthetic(int dim) {
    return FeatureProviderSpec{Kind::synthetic_position, dim, true};
  }
  static FeatureProviderSpec precomputed(int dim) {
    // flipped-frame embeddings are not supplied, so no flip transform
    return FeatureProviderSpec{Kind::precomputed, dim, false};
  }
};

/// Index of the source frame nearest to time t, ties toward the earlier frame.
inline int nearest_frame_index(double t_seconds, double fps, int n_frames) {
  if (n_frames < 1) throw std::invalid_argument("nearest_frame_index: empty track");
  const double x = t_seconds * fps;
  int j = static_cast<int>(std::floor(x));
  if (j < 0) j = 0;
  // pick between j and j+1; strict inequality keeps ties on the earlier frame
  if (j + 1 < n_frames && std::abs(x - static_cast<double>(j + 1)) < std::abs(x - static_cast<double>(j)))
    ++j;
  if (j > n_frames - 1) j = n_frames - 1;
  return j;
}

/// Rows of `track` sampled at arbitrary times by nearest neighbor.
inline Eigen::MatrixXf sample_at_times(const FeatureTrack& track,
                                       const std::vector<double>& times_s) {
  if (track.frames() < 1) throw std::invalid_argument("sample_at_times: empty track");
  Eigen::MatrixXf out(static_cast<Eigen::Index>(times_s.size()), track.dim());
  for (std::size_t i = 0; i < times_s.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        track.vectors.row(nearest_frame_index(times_s[i], track.fps, track.frames()));
  return out;
}

/// Nearest-neighbor rate conversion: output frame i copies the input frame
/// closest in time. Never interpolates.
inline FeatureTrack upsample_nearest(const FeatureTrack& track, int target_frames,
                                     double target_fps) {
  if (track.frames() < 1) throw std::invalid_argument("upsample_nearest: empty track");
  if (target_frames < 1) throw std::invalid_argument("upsample_nearest: target_frames < 1");
  if (!(target_fps > 0.0)) throw std::invalid_argument("upsample_nearest: target_fps <= 0");
  std::vector<double> times(static_cast<std::size_t>(target_frames));
  for (int i = 0; i < target_frames; ++i) times[static_cast<std::size_t>(i)] = i / target_fps;
  FeatureTrack out;
  out.vectors = sample_at_times(track, times);
  out.fps = target_fps;
  return out;
}

/// Rowwise concatenation, fixed (flow, rgb) order by convention of the caller.
inline FeatureTrack concat_tracks(const FeatureTrack& a, const FeatureTrack& b) {
  if (a.frames() != b.frames())
    throw std::invalid_argument("concat_tracks: frame-count mismatch");
  if (a.fps != b.fps) throw std::invalid_argument("concat_tracks: fps mismatch");
  FeatureTrack out;
  out.fps = a.fps;
  out.vectors.resize(a.frames(), a.dim() + b.dim());
  out.vectors << a.vectors, b.vectors;
  return out;
}

/// Desk-scale stand-in for CNN embeddings. Column 0 is the source position in
/// [-1, 1], column 1 a finite-difference velocity, the rest a fixed seeded
/// random projection of (position, velocity). Everything is linear in
/// (position, velocity), so a pan flip negates the whole track.
inline FeatureTrack synthetic_position_features(const std::vector<double>& pan, int dim,
                                                double fps = 10.0) {
  if (pan.empty()) throw std::invalid_argument("synthetic_position_features: empty pan");
  if (dim < 2) throw std::invalid_argument("synthetic_position_features: dim must be >= 2");
  for (double p : pan)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("synthetic_position_features: pan outside [0, 1]");

  const int n = static_cast<int>(pan.size());
  std::vector<double> pos(pan.size()), vel(pan.size());
  for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = 2.0 * pan[static_cast<std::size_t>(i)] - 1.0;
  for (int i = 1; i < n; ++i)
    vel[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(i - 1)];
  vel[0] = n > 1 ? vel[1] : 0.0;

  // fixed projection weights, shared by every track so flips stay exact
  std::mt19937 rng(0x5EEDFEA7u);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(2.0));
  Eigen::MatrixXd proj(dim - 2, 2);
  for (int r = 0; r < dim - 2; ++r)
    for (int c = 0; c < 2; ++c) proj(r, c) = dist(rng);

  FeatureTrack out;
  out.fps = fps;
  out.vectors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    const double p = pos[static_cast<std::size_t>(i)];
    const double v = vel[static_cast<std::size_t>(i)];
    out.vectors(i, 0) = static_cast<float>(p);
    out.vectors(i, 1) = static_cast<float>(v);
    for (int r = 0; r < dim - 2; ++r)
      out.vectors(i, 2 + r) = static_cast<float>(proj(r, 0) * p + proj(r, 1) * v);
  }
  return out;
}

/// The provider's left/right flip transform applied to a feature matrix.
inline Eigen::MatrixXf flip_features(const FeatureProviderSpec& provider,
                                     const Eigen::MatrixXf& features) {
  if (!provider.flip_supported)
    throw std::invalid_argument("flip_features: provider does not support flips");
  // synthetic position features are linear in (position, velocity)
  return -features;
}

}  // namespace asn
