#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace asn::nn {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense (channels, rows, cols) tensor, channel-contiguous.
template <typename T>
struct Tensor3 {
  int ch{0}, rows{0}, cols{0};
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int r, int w) { resize(c, r, w); }

  void resize(int c, int r, int w) {
    ch = c;
    rows = r;
    cols = w;
    data.assign(static_cast<std::size_t>(c) * r * w, T(0));
  }
  void set_zero() { std::fill(data.begin(), data.end(), T(0)); }

  std::int64_t plane() const { return static_cast<std::int64_t>(rows) * cols; }
  std::int64_t size() const { return static_cast<std::int64_t>(ch) * rows * cols; }

  T& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * rows + static_cast<std::size_t>(y)) * cols + static_cast<std::size_t>(x)];
  }
  const T& at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * rows + static_cast<std::size_t>(y)) * cols + static_cast<std::size_t>(x)];
  }

  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }

  /// (plane x ch) map: column c is channel c flattened row-major.
  Eigen::Map<MatX<T>> as_cols() { return Eigen::Map<MatX<T>>(data.data(), plane(), ch); }
  Eigen::Map<const MatX<T>> as_cols() const {
    return Eigen::Map<const MatX<T>>(data.data(), plane(), ch);
  }
};

/// Named view of one parameter tensor and its gradient buffer.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value;
  std::vector<T>* grad;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
inline std::int64_t total_size(const ParamList<T>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += static_cast<std::int64_t>(p.value->size());
  return n;
}

template <typename T>
inline void zero_grads(ParamList<T>& params) {
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

/// Copy parameter values between two structurally identical models.
template <typename T>
inline void copy_values(const ParamList<T>& src, ParamList<T>& dst) {
  if (src.size() != dst.size()) throw std::logic_error("copy_values: param list mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].value->size() != dst[i].value->size())
      throw std::logic_error("copy_values: size mismatch at " + src[i].name);
    *dst[i].value = *src[i].value;
  }
}

template <typename T>
inline void flatten_grads(const ParamList<T>& params, std::vector<T>& out) {
  out.resize(static_cast<std::size_t>(total_size(params)));
  std::size_t o = 0;
  for (const auto& p : params) {
    std::copy(p.grad->begin(), p.grad->end(), out.begin() + static_cast<std::ptrdiff_t>(o));
    o += p.grad->size();
  }
}

template <typename T>
inline void accumulate_flat(ParamList<T>& params, const std::vector<T>& flat) {
  std::size_t o = 0;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.grad->size(); ++i) (*p.grad)[i] += flat[o + i];
    o += p.grad->size();
  }
}

// im2col / col2im for stride-s, pad-p, k x k kernels.
// cols is (ch*k*k) x (oh*ow), column-major; column index runs over output
// positions row-major (oy*ow + ox).

template <typename T>
inline void im2col(const Tensor3<T>& in, int k, int stride, int pad, MatX<T>& cols) {
  const int oh = (in.rows + 2 * pad - k) / stride + 1;
  const int ow = (in.cols + 2 * pad - k) / stride + 1;
  cols.resize(static_cast<Eigen::Index>(in.ch) * k * k, static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      T* dst = cols.data() + col * cols.rows();
      for (int c = 0; c < in.ch; ++c) {
        const T* src = in.channel(c);
        for (int ky = 0; ky < k; ++ky) {
          const int y = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int x = ox * stride - pad + kx;
            *dst++ = (y >= 0 && y < in.rows && x >= 0 && x < in.cols)
                         ? src[static_cast<std::size_t>(y) * in.cols + x]
                         : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
inline void col2im_add(const MatX<T>& cols, int k, int stride, int pad, Tensor3<T>& out) {
  const int oh = (out.rows + 2 * pad - k) / stride + 1;
  const int ow = (out.cols + 2 * pad - k) / stride + 1;
  if (cols.rows() != static_cast<Eigen::Index>(out.ch) * k * k ||
      cols.cols() != static_cast<Eigen::Index>(oh) * ow)
    throw std::logic_error("col2im_add: shape mismatch");
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      const T* src = cols.data() + col * cols.rows();
      for (int c = 0; c < out.ch; ++c) {
        T* dst = out.channel(c);
        for (int ky = 0; ky < k; ++ky) {
          const int y = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int x = ox * stride - pad + kx;
            if (y >= 0 && y < out.rows && x >= 0 && x < out.cols)
              dst[static_cast<std::size_t>(y) * out.cols + x] += *src;
            ++src;
          }
        }
      }
    }
  }
}

}  // namespace asn::nn
