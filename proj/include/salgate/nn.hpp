#pragma once

// Minimal CHW tensor and layer toolkit for the detector and saliency networks.
// Forward passes are const and stateless; the caller keeps whatever activations
// the backward pass needs. Backward passes accumulate into Param::grad.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "salgate/error.hpp"

namespace salgate::nn {

template <class T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : c(channels), h(height), w(width), data(static_cast<size_t>(channels) * height * width, fill) {}

  size_t size() const noexcept { return data.size(); }
  size_t plane() const noexcept { return static_cast<size_t>(h) * w; }
  T& at(int ch, int y, int x) { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
  T at(int ch, int y, int x) const { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
  T* channel(int ch) { return data.data() + static_cast<size_t>(ch) * plane(); }
  const T* channel(int ch) const { return data.data() + static_cast<size_t>(ch) * plane(); }
  bool same_shape(const Tensor& o) const noexcept { return c == o.c && h == o.h && w == o.w; }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(c, h, w);
    std::transform(data.begin(), data.end(), out.data.begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }
};

template <class T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  if (!dst.same_shape(src)) throw Error(ErrorKind::ShapeMismatch, "tensor add shape mismatch");
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, int c, int h, int w) : name(std::move(n)), value(c, h, w), grad(c, h, w) {}
};

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline constexpr double kLeakySlope = 0.1;

template <class T>
void leaky_relu_inplace(Tensor<T>& t) {
  for (T& v : t.data) v = v > T(0) ? v : T(kLeakySlope) * v;
}

/// grad *= f'(.) using the activation output (sign is preserved by the activation).
template <class T>
void leaky_relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& out) {
  for (size_t i = 0; i < grad.size(); ++i) {
    if (!(out.data[i] > T(0))) grad.data[i] *= T(kLeakySlope);
  }
}

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 2-D convolution with square kernel, symmetric zero padding, and bias.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride)
      : in_(in_channels),
        out_(out_channels),
        k_(kernel),
        stride_(stride),
        pad_(kernel / 2),
        weight_(name + ".weight", out_channels, in_channels * kernel * kernel, 1),
        bias_(name + ".bias", out_channels, 1, 1) {}

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int stride() const noexcept { return stride_; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }
  const Param<T>& weight() const noexcept { return weight_; }
  const Param<T>& bias() const noexcept { return bias_; }

  int out_size(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

  /// He-normal weights (leaky slope aware), zero bias.
  template <class Rng>
  void init_he(Rng& rng, double gain = 1.0) {
    const double fan_in = static_cast<double>(in_) * k_ * k_;
    const double std_dev = gain * std::sqrt(2.0 / ((1.0 + kLeakySlope * kLeakySlope) * fan_in));
    std::normal_distribution<double> dist(0.0, std_dev);
    for (T& v : weight_.value.data) v = static_cast<T>(dist(rng));
    bias_.value.zero();
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    check_input(x);
    const int oh = out_size(x.h), ow = out_size(x.w);
    Tensor<T> y(out_, oh, ow);
    const int kdim = in_ * k_ * k_;
    Eigen::Map<const RowMatrix<T>> W(weight_.value.data.data(), out_, kdim);
    Eigen::Map<RowMatrix<T>> Y(y.data.data(), out_, oh * ow);
    if (is_pointwise()) {
      Eigen::Map<const RowMatrix<T>> X(x.data.data(), in_, oh * ow);
      Y.noalias() = W * X;
    } else {
      const std::vector<T> col = im2col(x, oh, ow);
      Eigen::Map<const RowMatrix<T>> C(col.data(), kdim, oh * ow);
      Y.noalias() = W * C;
    }
    for (int o = 0; o < out_; ++o) {
      const T b = bias_.value.data[o];
      T* row = y.channel(o);
      for (size_t i = 0; i < y.plane(); ++i) row[i] += b;
    }
    return y;
  }

  /// Accumulates parameter gradients and returns dL/dx (empty when not requested).
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out, bool need_input_grad) {
    const int oh = out_size(x.h), ow = out_size(x.w);
    if (grad_out.c != out_ || grad_out.h != oh || grad_out.w != ow) {
      throw Error(ErrorKind::ShapeMismatch, "conv backward: gradient shape mismatch");
    }
    const int kdim = in_ * k_ * k_;
    Eigen::Map<const RowMatrix<T>> G(grad_out.data.data(), out_, oh * ow);
    Eigen::Map<RowMatrix<T>> dW(weight_.grad.data.data(), out_, kdim);
    for (int o = 0; o < out_; ++o) {
      const T* row = grad_out.channel(o);
      T s = T(0);
      for (size_t i = 0; i < grad_out.plane(); ++i) s += row[i];
      bias_.grad.data[o] += s;
    }
    Eigen::Map<const RowMatrix<T>> W(weight_.value.data.data(), out_, kdim);
    if (is_pointwise()) {
      Eigen::Map<const RowMatrix<T>> X(x.data.data(), in_, oh * ow);
      dW.noalias() += G * X.transpose();
      if (!need_input_grad) return {};
      Tensor<T> dx(in_, x.h, x.w);
      Eigen::Map<RowMatrix<T>> DX(dx.data.data(), in_, oh * ow);
      DX.noalias() = W.transpose() * G;
      return dx;
    }
    const std::vector<T> col = im2col(x, oh, ow);
    Eigen::Map<const RowMatrix<T>> C(col.data(), kdim, oh * ow);
    dW.noalias() += G * C.transpose();
    if (!need_input_grad) return {};
    RowMatrix<T> dcol = W.transpose() * G;
    Tensor<T> dx(in_, x.h, x.w);
    col2im(dcol.data(), oh, ow, dx);
    return dx;
  }

 private:
  bool is_pointwise() const noexcept { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  void check_input(const Tensor<T>& x) const {
    if (x.c != in_) throw Error(ErrorKind::ShapeMismatch, "conv input channel mismatch");
  }

  std::vector<T> im2col(const Tensor<T>& x, int oh, int ow) const {
    std::vector<T> col(static_cast<size_t>(in_) * k_ * k_ * oh * ow);
    size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx, ++r) {
          T* dst = col.data() + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            T* drow = dst + static_cast<size_t>(oy) * ow;
            if (iy < 0 || iy >= x.h) {
              std::fill(drow, drow + ow, T(0));
              continue;
            }
            const T* srow = x.data.data() + (static_cast<size_t>(c) * x.h + iy) * x.w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              drow[ox] = (ix >= 0 && ix < x.w) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
    return col;
  }

  void col2im(const T* col, int oh, int ow, Tensor<T>& dx) const {
    size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx, ++r) {
          const T* src = col + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= dx.h) continue;
            T* drow = dx.data.data() + (static_cast<size_t>(c) * dx.h + iy) * dx.w;
            const T* srow = src + static_cast<size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < dx.w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  Param<T> weight_;
  Param<T> bias_;
};

/// Separable bilinear resampling with half-pixel centers (corner alignment off).
/// Each output coordinate reads two neighbors with weights summing to one.
class ResizeAxis {
 public:
  ResizeAxis(int in, int out) : in_(in), lo_(out), hi_(out), frac_(out) {
    if (in <= 0 || out <= 0) throw Error(ErrorKind::InvalidArgument, "resize sizes must be positive");
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      int lo = static_cast<int>(std::floor(src));
      if (lo > in - 1) lo = in - 1;
      lo_[i] = lo;
      hi_[i] = std::min(lo + 1, in - 1);
      frac_[i] = src - lo;
      if (hi_[i] == lo) frac_[i] = 0.0;
    }
  }
  int in() const noexcept { return in_; }
  int out() const noexcept { return static_cast<int>(lo_.size()); }
  int lo(int i) const { return lo_[i]; }
  int hi(int i) const { return hi_[i]; }
  double frac(int i) const { return frac_[i]; }

 private:
  int in_;
  std::vector<int> lo_, hi_;
  std::vector<double> frac_;
};

template <class T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w) {
  const ResizeAxis ay(x.h, out_h), ax(x.w, out_w);
  Tensor<T> y(x.c, out_h, out_w);
  for (int c = 0; c < x.c; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ay.frac(oy));
      const int y0 = ay.lo(oy), y1 = ay.hi(oy);
      for (int ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(ax.frac(ox));
        const int x0 = ax.lo(ox), x1 = ax.hi(ox);
        const T top = x.at(c, y0, x0) * (T(1) - fx) + x.at(c, y0, x1) * fx;
        const T bot = x.at(c, y1, x0) * (T(1) - fx) + x.at(c, y1, x1) * fx;
        y.at(c, oy, ox) = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return y;
}

/// Transpose of resize_bilinear: scatters output gradients back to the source grid.
template <class T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& grad_out, int in_h, int in_w) {
  const ResizeAxis ay(in_h, grad_out.h), ax(in_w, grad_out.w);
  Tensor<T> dx(grad_out.c, in_h, in_w);
  for (int c = 0; c < grad_out.c; ++c) {
    for (int oy = 0; oy < grad_out.h; ++oy) {
      const T fy = static_cast<T>(ay.frac(oy));
      const int y0 = ay.lo(oy), y1 = ay.hi(oy);
      for (int ox = 0; ox < grad_out.w; ++ox) {
        const T fx = static_cast<T>(ax.frac(ox));
        const int x0 = ax.lo(ox), x1 = ax.hi(ox);
        const T g = grad_out.at(c, oy, ox);
        dx.at(c, y0, x0) += g * (T(1) - fy) * (T(1) - fx);
        dx.at(c, y0, x1) += g * (T(1) - fy) * fx;
        dx.at(c, y1, x0) += g * fy * (T(1) - fx);
        dx.at(c, y1, x1) += g * fy * fx;
      }
    }
  }
  return dx;
}

template <class T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int oy = 0; oy < y.h; ++oy)
      for (int ox = 0; ox < y.w; ++ox) y.at(c, oy, ox) = x.at(c, oy / 2, ox / 2);
  return y;
}

template <class T>
Tensor<T> upsample_nearest2_backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(grad_out.c, grad_out.h / 2, grad_out.w / 2);
  for (int c = 0; c < grad_out.c; ++c)
    for (int oy = 0; oy < grad_out.h; ++oy)
      for (int ox = 0; ox < grad_out.w; ++ox) dx.at(c, oy / 2, ox / 2) += grad_out.at(c, oy, ox);
  return dx;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.h != b.h || a.w != b.w) throw Error(ErrorKind::ShapeMismatch, "concat spatial mismatch");
  Tensor<T> y(a.c + b.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<long>(a.size()));
  return y;
}

/// Splits a concat gradient into its first `first_channels` channels and the rest.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int first_channels) {
  Tensor<T> a(first_channels, g.h, g.w), b(g.c - first_channels, g.h, g.w);
  std::copy(g.data.begin(), g.data.begin() + static_cast<long>(a.size()), a.data.begin());
  std::copy(g.data.begin() + static_cast<long>(a.size()), g.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam over a fixed parameter list; moment buffers are parallel to the list.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.c, p->value.h, p->value.w);
      v_.emplace_back(p->value.c, p->value.h, p->value.w);
    }
    frozen_.assign(params_.size(), 0);
  }

  /// Frozen parameters are skipped entirely; their moments stay untouched.
  void set_frozen(size_t index, bool frozen) { frozen_.at(index) = frozen ? 1 : 0; }

  void step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (size_t i = 0; i < params_.size(); ++i) {
      if (frozen_[i]) continue;
      Param<T>& p = *params_[i];
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      for (size_t j = 0; j < p.value.size(); ++j) {
        double g = static_cast<double>(p.grad.data[j]);
        if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * static_cast<double>(p.value.data[j]);
        const double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        const double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = cfg_.learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.epsilon);
        p.value.data[j] = static_cast<T>(static_cast<double>(p.value.data[j]) - update);
      }
    }
  }

  /// Scales every accumulated gradient, e.g. by 1/batch.
  void scale_grad(T factor) {
    for (auto* p : params_)
      for (T& g : p->grad.data) g *= factor;
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.zero();
  }

  int64_t steps() const noexcept { return steps_; }
  void set_steps(int64_t s) noexcept { steps_ = s; }
  std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
  std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  std::vector<char> frozen_;
  AdamConfig cfg_;
  int64_t steps_ = 0;
};

/// Fisher-Yates with a 64-bit engine; identical across standard libraries.
template <class Rng>
void deterministic_shuffle(std::span<int> items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace salgate::nn
