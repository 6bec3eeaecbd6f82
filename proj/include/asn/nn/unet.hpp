#pragma once

#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "asn/nn/layers.hpp"
#include "asn/nn/tensor.hpp"

namespace asn::nn {

/// Mask synthesizer shape. base_channels 16 is the desk-scale default;
/// 64 matches the full-scale setting.
struct UNetConfig {
  int depth{5};
  int base_channels{16};
  int feature_dim{64};
  bool use_norm{true};
  int max_channels{512};
  double init_std{0.05};

  int channels_at(int level) const {
    std::int64_t c = base_channels;
    for (int i = 0; i < level; ++i) c *= 2;
    return static_cast<int>(std::min<std::int64_t>(c, max_channels));
  }
  void validate() const {
    if (depth < 1) throw std::invalid_argument("UNetConfig: depth must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("UNetConfig: base_channels must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("UNetConfig: feature_dim must be >= 1");
  }
};

/// Encoder: stride-2 4x4 convolutions with leaky rectifier (slope 0.2).
/// Feature vectors are pooled to the bottleneck frame rate and concatenated
/// as extra channels, broadcast across the frequency axis. Decoder: stride-2
/// transposed convolutions with rectifier and skip concatenation. The
/// outermost layers carry no normalization; two sigmoid heads emit the masks.
template <typename T>
class UNet {
 public:
  UNet() = default;

  UNet(const UNetConfig& cfg, std::mt19937& rng) : cfg_(cfg) {
    cfg.validate();
    const T std_ = static_cast<T>(cfg.init_std);
    for (int i = 0; i < cfg.depth; ++i) {
      const int cin = i == 0 ? 1 : cfg.channels_at(i - 1);
      const int cout = cfg.channels_at(i);
      enc_.emplace_back(cin, cout, 4, 2, 1, rng, std_);
      enc_norm_.emplace_back(cout);  // slot 0 unused (outermost has no norm)
    }
    for (int i = cfg.depth - 1; i >= 0; --i) {
      const int skip_in = i == cfg.depth - 1 ? cfg.channels_at(i) + cfg.feature_dim
                                             : 2 * cfg.channels_at(i);
      const int cout = i == 0 ? 2 : cfg.channels_at(i - 1);
      dec_.emplace_back(skip_in, cout, 4, 2, 1, rng, std_);
      dec_norm_.emplace_back(cout);
    }
  }

  const UNetConfig& config() const { return cfg_; }

  /// logmag and features are (frames x dim) matrices at the spectrogram
  /// frame rate. Returns the two mask matrices, each the shape of logmag,
  /// strictly inside (0, 1).
  std::pair<MatX<T>, MatX<T>> forward(const MatX<T>& logmag, const MatX<T>& features) {
    if (features.rows() != logmag.rows())
      throw std::invalid_argument("UNet: feature frame count does not match spectrogram");
    if (features.cols() != cfg_.feature_dim)
      throw std::invalid_argument("UNet: feature dim does not match config");
    t0_ = static_cast<int>(logmag.rows());
    f0_ = static_cast<int>(logmag.cols());
    const int mult = 1 << cfg_.depth;
    t_pad_ = ((t0_ + mult - 1) / mult) * mult;
    f_pad_ = ((f0_ + mult - 1) / mult) * mult;

    Tensor3<T> x(1, t_pad_, f_pad_);
    for (int i = 0; i < t0_; ++i)
      for (int j = 0; j < f0_; ++j) x.at(0, i, j) = logmag(i, j);

    enc_act_.clear();
    enc_act_.resize(static_cast<std::size_t>(cfg_.depth));
    lrelu_enc_.assign(static_cast<std::size_t>(cfg_.depth), LeakyReLU<T>(T(0.2)));
    for (int i = 0; i < cfg_.depth; ++i) {
      Tensor3<T> h = enc_[static_cast<std::size_t>(i)].forward(i == 0 ? x : enc_act_[static_cast<std::size_t>(i - 1)]);
      if (cfg_.use_norm && i > 0) h = enc_norm_[static_cast<std::size_t>(i)].forward(h);
      enc_act_[static_cast<std::size_t>(i)] = lrelu_enc_[static_cast<std::size_t>(i)].forward(h);
    }

    // pooled features enter as channels at the bottleneck
    const Tensor3<T>& bottom = enc_act_[static_cast<std::size_t>(cfg_.depth - 1)];
    pool_features(features, bottom.rows, bottom.cols);
    Tensor3<T> h = concat_ch(bottom, feat_tensor_);

    lrelu_dec_.assign(dec_.size(), LeakyReLU<T>(T(0)));  // slope 0: plain rectifier
    for (std::size_t d = 0; d < dec_.size(); ++d) {
      const int level = cfg_.depth - 1 - static_cast<int>(d);
      h = dec_[d].forward(h);
      if (level > 0) {
        if (cfg_.use_norm) h = dec_norm_[d].forward(h);
        h = lrelu_dec_[d].forward(h);
        h = concat_ch(h, enc_act_[static_cast<std::size_t>(level - 1)]);
      }
    }

    // crop and squash
    mask_z_ = std::move(h);
    MatX<T> left(t0_, f0_), right(t0_, f0_);
    for (int i = 0; i < t0_; ++i)
      for (int j = 0; j < f0_; ++j) {
        left(i, j) = sigmoid(mask_z_.at(0, i, j));
        right(i, j) = sigmoid(mask_z_.at(1, i, j));
      }
    out_left_ = left;
    out_right_ = right;
    return {left, right};
  }

  /// Gradients w.r.t. the two masks in; parameter gradients accumulate.
  void backward(const MatX<T>& gleft, const MatX<T>& gright) {
    Tensor3<T> g(2, t_pad_, f_pad_);
    for (int i = 0; i < t0_; ++i)
      for (int j = 0; j < f0_; ++j) {
        const T sl = out_left_(i, j), sr = out_right_(i, j);
        g.at(0, i, j) = gleft(i, j) * sl * (T(1) - sl);
        g.at(1, i, j) = gright(i, j) * sr * (T(1) - sr);
      }

    std::vector<Tensor3<T>> skip_grads(static_cast<std::size_t>(cfg_.depth));
    for (int d = static_cast<int>(dec_.size()) - 1; d >= 0; --d) {
      const int level = cfg_.depth - 1 - d;
      if (level > 0) {
        // split the concat (decoder out, skip) gradient
        const Tensor3<T>& skip = enc_act_[static_cast<std::size_t>(level - 1)];
        Tensor3<T> g_dec(g.ch - skip.ch, g.rows, g.cols);
        Tensor3<T> g_skip(skip.ch, g.rows, g.cols);
        split_ch(g, g_dec, g_skip);
        add_into(skip_grads[static_cast<std::size_t>(level - 1)], g_skip);
        Tensor3<T> gh = lrelu_dec_[static_cast<std::size_t>(d)].backward(g_dec);
        if (cfg_.use_norm) gh = dec_norm_[static_cast<std::size_t>(d)].backward(gh);
        g = dec_[static_cast<std::size_t>(d)].backward(gh);
      } else {
        g = dec_[static_cast<std::size_t>(d)].backward(g);
      }
    }

    // split bottleneck concat: encoder output + features (feature grads dropped)
    {
      const Tensor3<T>& bottom = enc_act_[static_cast<std::size_t>(cfg_.depth - 1)];
      Tensor3<T> g_bottom(bottom.ch, g.rows, g.cols);
      Tensor3<T> g_feat(feat_tensor_.ch, g.rows, g.cols);
      split_ch(g, g_bottom, g_feat);
      add_into(skip_grads[static_cast<std::size_t>(cfg_.depth - 1)], g_bottom);
      g = std::move(skip_grads[static_cast<std::size_t>(cfg_.depth - 1)]);
    }

    for (int i = cfg_.depth - 1; i >= 0; --i) {
      Tensor3<T> gh = lrelu_enc_[static_cast<std::size_t>(i)].backward(g);
      if (cfg_.use_norm && i > 0) gh = enc_norm_[static_cast<std::size_t>(i)].backward(gh);
      g = enc_[static_cast<std::size_t>(i)].backward(gh);
      if (i > 0) {
        add_into(skip_grads[static_cast<std::size_t>(i - 1)], g);
        g = std::move(skip_grads[static_cast<std::size_t>(i - 1)]);
      }
    }
  }

  void collect_params(ParamList<T>& out, const std::string& prefix = "synth") {
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      enc_[i].collect(out, prefix + ".enc" + std::to_string(i));
      if (cfg_.use_norm && i > 0) enc_norm_[i].collect(out, prefix + ".enc_norm" + std::to_string(i));
    }
    for (std::size_t d = 0; d < dec_.size(); ++d) {
      dec_[d].collect(out, prefix + ".dec" + std::to_string(d));
      const int level = cfg_.depth - 1 - static_cast<int>(d);
      if (cfg_.use_norm && level > 0) dec_norm_[d].collect(out, prefix + ".dec_norm" + std::to_string(d));
    }
  }

 private:
  static Tensor3<T> concat_ch(const Tensor3<T>& a, const Tensor3<T>& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::logic_error("concat_ch: spatial mismatch");
    Tensor3<T> out(a.ch + b.ch, a.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
  }
  static void split_ch(const Tensor3<T>& g, Tensor3<T>& first, Tensor3<T>& second) {
    std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(first.size()), first.data.begin());
    std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(first.size()), g.data.end(), second.data.begin());
  }
  static void add_into(Tensor3<T>& acc, const Tensor3<T>& g) {
    if (acc.size() == 0) {
      acc = g;
      return;
    }
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
  }

  /// Mean-pool feature rows into bottleneck time buckets (padding replicates
  /// the last frame), then broadcast each vector across the frequency axis.
  void pool_features(const MatX<T>& features, int t_b, int f_b) {
    const int bucket = t_pad_ / t_b;
    feat_tensor_.resize(cfg_.feature_dim, t_b, f_b);
    for (int tb = 0; tb < t_b; ++tb) {
      for (int d = 0; d < cfg_.feature_dim; ++d) {
        double acc = 0.0;
        for (int r = 0; r < bucket; ++r) {
          int src = tb * bucket + r;
          if (src > t0_ - 1) src = t0_ - 1;
          acc += static_cast<double>(features(src, d));
        }
        const T v = static_cast<T>(acc / bucket);
        for (int x = 0; x < f_b; ++x) feat_tensor_.at(d, tb, x) = v;
      }
    }
  }

  UNetConfig cfg_;
  std::vector<Conv2d<T>> enc_;
  std::vector<InstanceNorm2d<T>> enc_norm_;
  std::vector<LeakyReLU<T>> lrelu_enc_;
  std::vector<ConvTranspose2d<T>> dec_;
  std::vector<InstanceNorm2d<T>> dec_norm_;
  std::vector<LeakyReLU<T>> lrelu_dec_;
  std::vector<Tensor3<T>> enc_act_;
  Tensor3<T> feat_tensor_;
  Tensor3<T> mask_z_;
  MatX<T> out_left_, out_right_;
  int t0_{0}, f0_{0}, t_pad_{0}, f_pad_{0};
};

}  // namespace asn::nn
