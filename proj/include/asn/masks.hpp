#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

#include "asn/stft.hpp"
#include "asn/waveform.hpp"

namespace asn {

/// Per-bin left/right ratio masks in [0, 1]. Wherever both channels carry
/// energy, left^2 + right^2 = 1.
struct MaskPair {
  Eigen::ArrayXXd left;   // n_frames x n_bins
  Eigen::ArrayXXd right;  // same shape

  MaskPair swapped() const { return MaskPair{right, left}; }
};

namespace detail {
inline void require_same_shape(const Spectrogram& a, const Spectrogram& b, const char* who) {
  if (a.n_frames() != b.n_frames() || a.n_bins() != b.n_bins())
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
  if (!(a.config == b.config))
    throw std::invalid_argument(std::string(who) + ": config mismatch");
}
}  // namespace detail

/// Ideal ratio masks from the two channel spectrograms, evaluated on STFT
/// magnitudes. Silent bins map to mask 0 via the eps-regularized denominator.
inline MaskPair compute_irm(const Spectrogram& x_left, const Spectrogram& x_right,
                            double eps = 1e-8) {
  detail::require_same_shape(x_left, x_right, "compute_irm");
  if (!(eps > 0.0)) throw std::invalid_argument("compute_irm: eps must be positive");
  const Eigen::ArrayXXd l2 = x_left.values.array().abs2();
  const Eigen::ArrayXXd r2 = x_right.values.array().abs2();
  const Eigen::ArrayXXd denom = l2 + r2 + eps;
  MaskPair m;
  m.left = (l2 / denom).sqrt();
  m.right = (r2 / denom).sqrt();
  return m;
}

/// Masked magnitudes of the mixture: (M_L .* |X_M|, M_R .* |X_M|).
inline std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> apply_masks(const MaskPair& m,
                                                               const Spectrogram& mix) {
  if (m.left.rows() != mix.n_frames() || m.left.cols() != mix.n_bins() ||
      m.right.rows() != mix.n_frames() || m.right.cols() != mix.n_bins())
    throw std::invalid_argument("apply_masks: shape mismatch");
  const Eigen::ArrayXXd mag = magnitude(mix);
  return {m.left * mag, m.right * mag};
}

/// Stereo audio from masks and the mixture spectrogram. Both channels reuse
/// the mixture phase, so each channel is simply istft(mask .* X_M).
inline Waveform reconstruct_stereo(const MaskPair& m, const Spectrogram& mix,
                                   const StftConfig& cfg) {
  if (!(mix.config == cfg)) throw std::invalid_argument("reconstruct_stereo: config mismatch");
  if (m.left.rows() != mix.n_frames() || m.left.cols() != mix.n_bins() ||
      m.right.rows() != mix.n_frames() || m.right.cols() != mix.n_bins())
    throw std::invalid_argument("reconstruct_stereo: shape mismatch");

  Spectrogram ch = mix;
  ch.values = mix.values.cwiseProduct(m.left.matrix().cast<std::complex<double>>());
  Waveform left = istft(ch, cfg);
  ch.values = mix.values.cwiseProduct(m.right.matrix().cast<std::complex<double>>());
  Waveform right = istft(ch, cfg);
  return Waveform::stereo(std::move(left.channels[0]), std::move(right.channels[0]),
                          mix.sample_rate);
}

}  // namespace asn
