#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "asn/nn/tensor.hpp"

// Hand-wired layers: each caches what its backward pass needs, accumulates
// parameter gradients internally, and returns the gradient w.r.t. its input.
// One sample at a time; batching is handled by the trainer.

namespace asn::nn {

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int k, int stride, int pad, std::mt19937& rng, T init_std)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
    const std::size_t n = static_cast<std::size_t>(in_ch) * k * k * out_ch;
    weight_.resize(n);
    bias_.resize(static_cast<std::size_t>(out_ch));
    std::normal_distribution<double> dist(0.0, static_cast<double>(init_std));
    for (auto& w : weight_) w = static_cast<T>(dist(rng));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * k * k);
    std::uniform_real_distribution<double> bdist(-bound, bound);
    for (auto& b : bias_) b = static_cast<T>(bdist(rng));
    wgrad_.assign(n, T(0));
    bgrad_.assign(static_cast<std::size_t>(out_ch), T(0));
  }

  Tensor3<T> forward(const Tensor3<T>& in) {
    in_cache_ = in;
    const int oh = (in.rows + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (in.cols + 2 * pad_ - k_) / stride_ + 1;
    Tensor3<T> out(out_ch_, oh, ow);
    im2col(in, k_, stride_, pad_, cols_);
    // (plane x out_ch) = (plane x K) * (K x out_ch)
    out.as_cols().noalias() = cols_.transpose() * weight_map();
    auto oc = out.as_cols();
    for (int c = 0; c < out_ch_; ++c) oc.col(c).array() += bias_[static_cast<std::size_t>(c)];
    return out;
  }

  Tensor3<T> backward(const Tensor3<T>& gout) {
    im2col(in_cache_, k_, stride_, pad_, cols_);
    auto g = gout.as_cols();  // plane x out_ch
    wgrad_map().noalias() += cols_ * g;
    for (int c = 0; c < out_ch_; ++c) bgrad_[static_cast<std::size_t>(c)] += g.col(c).sum();
    MatX<T> gcols = weight_map() * g.transpose();  // K x plane
    Tensor3<T> gin(in_cache_.ch, in_cache_.rows, in_cache_.cols);
    col2im_add(gcols, k_, stride_, pad_, gin);
    return gin;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

 private:
  Eigen::Map<MatX<T>> weight_map() {
    return Eigen::Map<MatX<T>>(weight_.data(), static_cast<Eigen::Index>(in_ch_) * k_ * k_, out_ch_);
  }
  Eigen::Map<MatX<T>> wgrad_map() {
    return Eigen::Map<MatX<T>>(wgrad_.data(), static_cast<Eigen::Index>(in_ch_) * k_ * k_, out_ch_);
  }

  int in_ch_{0}, out_ch_{0}, k_{0}, stride_{1}, pad_{0};
  std::vector<T> weight_, bias_, wgrad_, bgrad_;
  Tensor3<T> in_cache_;
  MatX<T> cols_;
};

template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch, int k, int stride, int pad, std::mt19937& rng, T init_std)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
    const std::size_t n = static_cast<std::size_t>(out_ch) * k * k * in_ch;
    weight_.resize(n);
    bias_.resize(static_cast<std::size_t>(out_ch));
    std::normal_distribution<double> dist(0.0, static_cast<double>(init_std));
    for (auto& w : weight_) w = static_cast<T>(dist(rng));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * k * k);
    std::uniform_real_distribution<double> bdist(-bound, bound);
    for (auto& b : bias_) b = static_cast<T>(bdist(rng));
    wgrad_.assign(n, T(0));
    bgrad_.assign(static_cast<std::size_t>(out_ch), T(0));
  }

  Tensor3<T> forward(const Tensor3<T>& in) {
    in_cache_ = in;
    const int oh = (in.rows - 1) * stride_ - 2 * pad_ + k_;
    const int ow = (in.cols - 1) * stride_ - 2 * pad_ + k_;
    Tensor3<T> out(out_ch_, oh, ow);
    // transposed conv forward is the col2im side of a convolution
    MatX<T> cols = weight_map() * in.as_cols().transpose();  // (out_ch*k*k) x in_plane
    col2im_add(cols, k_, stride_, pad_, out);
    auto oc = out.as_cols();
    for (int c = 0; c < out_ch_; ++c) oc.col(c).array() += bias_[static_cast<std::size_t>(c)];
    return out;
  }

  Tensor3<T> backward(const Tensor3<T>& gout) {
    // im2col over the *output* gradient mirrors the forward scatter
    MatX<T> gcols;
    im2col(gout, k_, stride_, pad_, gcols);
    wgrad_map().noalias() += gcols * in_cache_.as_cols();
    auto g = gout.as_cols();
    for (int c = 0; c < out_ch_; ++c) bgrad_[static_cast<std::size_t>(c)] += g.col(c).sum();
    Tensor3<T> gin(in_ch_, in_cache_.rows, in_cache_.cols);
    gin.as_cols().noalias() = gcols.transpose() * weight_map();
    return gin;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

 private:
  Eigen::Map<MatX<T>> weight_map() {
    return Eigen::Map<MatX<T>>(weight_.data(), static_cast<Eigen::Index>(out_ch_) * k_ * k_, in_ch_);
  }
  Eigen::Map<MatX<T>> wgrad_map() {
    return Eigen::Map<MatX<T>>(wgrad_.data(), static_cast<Eigen::Index>(out_ch_) * k_ * k_, in_ch_);
  }

  int in_ch_{0}, out_ch_{0}, k_{0}, stride_{1}, pad_{0};
  std::vector<T> weight_, bias_, wgrad_, bgrad_;
  Tensor3<T> in_cache_;
};

/// Per-channel normalization over (rows, cols) with affine scale and shift.
template <typename T>
class InstanceNorm2d {
 public:
  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int ch) : ch_(ch) {
    gamma_.assign(static_cast<std::size_t>(ch), T(1));
    beta_.assign(static_cast<std::size_t>(ch), T(0));
    ggrad_.assign(static_cast<std::size_t>(ch), T(0));
    bgrad_.assign(static_cast<std::size_t>(ch), T(0));
  }

  Tensor3<T> forward(const Tensor3<T>& in) {
    const std::int64_t n = in.plane();
    xhat_ = in;
    inv_std_.resize(static_cast<std::size_t>(in.ch));
    Tensor3<T> out(in.ch, in.rows, in.cols);
    for (int c = 0; c < in.ch; ++c) {
      const T* src = in.channel(c);
      double mean = 0.0;
      for (std::int64_t i = 0; i < n; ++i) mean += static_cast<double>(src[i]);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(src[i]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(n);
      const T istd = static_cast<T>(1.0 / std::sqrt(var + 1e-5));
      inv_std_[static_cast<std::size_t>(c)] = istd;
      T* xh = xhat_.channel(c);
      T* dst = out.channel(c);
      const T g = gamma_[static_cast<std::size_t>(c)], b = beta_[static_cast<std::size_t>(c)];
      for (std::int64_t i = 0; i < n; ++i) {
        xh[i] = (src[i] - static_cast<T>(mean)) * istd;
        dst[i] = g * xh[i] + b;
      }
    }
    return out;
  }

  Tensor3<T> backward(const Tensor3<T>& gout) {
    const std::int64_t n = xhat_.plane();
    Tensor3<T> gin(xhat_.ch, xhat_.rows, xhat_.cols);
    for (int c = 0; c < xhat_.ch; ++c) {
      const T* gy = gout.channel(c);
      const T* xh = xhat_.channel(c);
      double sum_gy = 0.0, sum_gyxh = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        sum_gy += static_cast<double>(gy[i]);
        sum_gyxh += static_cast<double>(gy[i]) * static_cast<double>(xh[i]);
      }
      ggrad_[static_cast<std::size_t>(c)] += static_cast<T>(sum_gyxh);
      bgrad_[static_cast<std::size_t>(c)] += static_cast<T>(sum_gy);
      const double mean_gy = sum_gy / static_cast<double>(n);
      const double mean_gyxh = sum_gyxh / static_cast<double>(n);
      const T g = gamma_[static_cast<std::size_t>(c)];
      const T istd = inv_std_[static_cast<std::size_t>(c)];
      T* gx = gin.channel(c);
      for (std::int64_t i = 0; i < n; ++i)
        gx[i] = g * istd *
                (gy[i] - static_cast<T>(mean_gy) - xh[i] * static_cast<T>(mean_gyxh));
    }
    return gin;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
    out.push_back({prefix + ".beta", &beta_, &bgrad_});
  }

 private:
  int ch_{0};
  std::vector<T> gamma_, beta_, ggrad_, bgrad_;
  std::vector<T> inv_std_;
  Tensor3<T> xhat_;
};

template <typename T>
class LeakyReLU {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}

  Tensor3<T> forward(const Tensor3<T>& in) {
    in_cache_ = in;
    Tensor3<T> out = in;
    for (auto& v : out.data)
      if (v < T(0)) v *= slope_;
    return out;
  }
  Tensor3<T> backward(const Tensor3<T>& gout) {
    Tensor3<T> gin = gout;
    for (std::size_t i = 0; i < gin.data.size(); ++i)
      if (in_cache_.data[i] < T(0)) gin.data[i] *= slope_;
    return gin;
  }

 private:
  T slope_;
  Tensor3<T> in_cache_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in_dim, int out_dim, std::mt19937& rng)
      : in_dim_(in_dim), out_dim_(out_dim) {
    weight_.resize(static_cast<std::size_t>(in_dim) * out_dim);
    bias_.resize(static_cast<std::size_t>(out_dim));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::normal_distribution<double> dist(0.0, bound);
    std::uniform_real_distribution<double> bdist(-bound, bound);
    for (auto& w : weight_) w = static_cast<T>(dist(rng));
    for (auto& b : bias_) b = static_cast<T>(bdist(rng));
    wgrad_.assign(weight_.size(), T(0));
    bgrad_.assign(bias_.size(), T(0));
  }

  Eigen::Vector<T, Eigen::Dynamic> forward(const Eigen::Vector<T, Eigen::Dynamic>& x) {
    x_cache_ = x;
    return weight_map() * x + Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>>(bias_.data(), out_dim_);
  }

  Eigen::Vector<T, Eigen::Dynamic> backward(const Eigen::Vector<T, Eigen::Dynamic>& g) {
    wgrad_map().noalias() += g * x_cache_.transpose();
    Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>>(bgrad_.data(), out_dim_) += g;
    return weight_map().transpose() * g;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  Eigen::Map<MatX<T>> weight_map() { return Eigen::Map<MatX<T>>(weight_.data(), out_dim_, in_dim_); }
  Eigen::Map<MatX<T>> wgrad_map() { return Eigen::Map<MatX<T>>(wgrad_.data(), out_dim_, in_dim_); }

  int in_dim_{0}, out_dim_{0};
  std::vector<T> weight_, bias_, wgrad_, bgrad_;
  Eigen::Vector<T, Eigen::Dynamic> x_cache_;
};

template <typename T>
inline T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

}  // namespace asn::nn
