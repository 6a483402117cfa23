// Copyright 2026 The even authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVEN_NN_HPP
#define EVEN_NN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "even/rng.hpp"
#include "even/tensor.hpp"

namespace even::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Named view of one learnable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
void zero_grads(std::vector<ParamRef<T>>& params) {
  for (auto& p : params) p.grad->fill(T(0));
}

// ---------------------------------------------------------------------------
// Convolution, same padding, stride 1 or 2, via im2col + GEMM.
// Input and output are CHW tensors.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 0, stride = 1;
  Tensor<T> w, b, gw, gb;

  Conv2d() = default;
  Conv2d(int in, int out, int k, int s = 1)
      : in_ch(in),
        out_ch(out),
        ksize(k),
        stride(s),
        w({out, in, k, k}),
        b({out}),
        gw({out, in, k, k}),
        gb({out}) {
    if (k % 2 == 0) throw std::invalid_argument("Conv2d: even kernel size");
  }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * ksize * ksize);
    for (std::int64_t i = 0; i < w.numel(); ++i)
      w[i] = static_cast<T>(uniform(rng, -bound, bound));
    for (std::int64_t i = 0; i < b.numel(); ++i)
      b[i] = static_cast<T>(uniform(rng, -bound, bound));
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
  }

  Tensor<T> forward(const Tensor<T>& x) {
    check_input(x);
    const int h = x.dim(1), w_in = x.dim(2);
    const int ho = out_dim(h), wo = out_dim(w_in);
    im2col(x, col_);
    in_h_ = h;
    in_w_ = w_in;
    Eigen::Map<const Mat<T>> wmat(w.data(), in_ch * ksize * ksize, out_ch);
    Tensor<T> y({out_ch, ho, wo});
    Eigen::Map<Mat<T>> ymat(y.data(), static_cast<Eigen::Index>(ho) * wo, out_ch);
    ymat.noalias() = col_ * wmat;
    for (int c = 0; c < out_ch; ++c) ymat.col(c).array() += b(c);
    return y;
  }

  /// Accumulates gw/gb and returns the gradient w.r.t. the last forward input.
  Tensor<T> backward(const Tensor<T>& gy) {
    const int ho = gy.dim(1), wo = gy.dim(2);
    Eigen::Map<const Mat<T>> gymat(gy.data(), static_cast<Eigen::Index>(ho) * wo,
                                   out_ch);
    Eigen::Map<Mat<T>> gwmat(gw.data(), in_ch * ksize * ksize, out_ch);
    gwmat.noalias() += col_.transpose() * gymat;
    // Scalar accumulation: vectorized reductions over unaligned maps change
    // summation order with buffer alignment, breaking bitwise reproducibility.
    for (int c = 0; c < out_ch; ++c) {
      T s = T(0);
      for (Eigen::Index r = 0; r < gymat.rows(); ++r) s += gymat(r, c);
      gb(c) += s;
    }
    Mat<T> gcol = gymat * Eigen::Map<const Mat<T>>(w.data(),
                                                   in_ch * ksize * ksize, out_ch)
                              .transpose();
    Tensor<T> gx({in_ch, in_h_, in_w_});
    col2im(gcol, gx);
    return gx;
  }

  int out_dim(int n) const {
    const int pad = ksize / 2;
    return (n + 2 * pad - ksize) / stride + 1;
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(0) != in_ch)
      throw std::invalid_argument("Conv2d: bad input shape " + shape_str(x.shape()));
  }

  // col layout: row = output pixel (oy*wo+ox), col = (ci*k + ky)*k + kx
  void im2col(const Tensor<T>& x, Mat<T>& col) const {
    const int h = x.dim(1), w_in = x.dim(2);
    const int ho = out_dim(h), wo = out_dim(w_in);
    const int pad = ksize / 2;
    col.resize(static_cast<Eigen::Index>(ho) * wo, in_ch * ksize * ksize);
    col.setZero();
    for (int ci = 0; ci < in_ch; ++ci) {
      for (int ky = 0; ky < ksize; ++ky) {
        for (int kx = 0; kx < ksize; ++kx) {
          const int cc = (ci * ksize + ky) * ksize + kx;
          T* dst = col.col(cc).data();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w_in) continue;
              dst[static_cast<std::int64_t>(oy) * wo + ox] = x(ci, iy, ix);
            }
          }
        }
      }
    }
  }

  void col2im(const Mat<T>& gcol, Tensor<T>& gx) const {
    const int h = gx.dim(1), w_in = gx.dim(2);
    const int ho = out_dim(h), wo = out_dim(w_in);
    const int pad = ksize / 2;
    for (int ci = 0; ci < in_ch; ++ci) {
      for (int ky = 0; ky < ksize; ++ky) {
        for (int kx = 0; kx < ksize; ++kx) {
          const int cc = (ci * ksize + ky) * ksize + kx;
          const T* src = gcol.col(cc).data();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w_in) continue;
              gx(ci, iy, ix) += src[static_cast<std::int64_t>(oy) * wo + ox];
            }
          }
        }
      }
    }
  }

  Mat<T> col_;
  int in_h_ = 0, in_w_ = 0;
};

// ---------------------------------------------------------------------------
// Pointwise and structural ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (std::int64_t i = 0; i < y.numel(); ++i)
    if (y[i] < T(0)) y[i] = T(0);
  return y;
}

/// gy masked by the sign of the forward *input*.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
  Tensor<T> gx = gy;
  for (std::int64_t i = 0; i < gx.numel(); ++i)
    if (x[i] <= T(0)) gx[i] = T(0);
  return gx;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) y(ci, yy, xx) = x(ci, yy / 2, xx / 2);
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& gy) {
  const int c = gy.dim(0), h = gy.dim(1) / 2, w = gy.dim(2) / 2;
  Tensor<T> gx({c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) gx(ci, yy / 2, xx / 2) += gy(ci, yy, xx);
  return gx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor<T> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data(), a.data() + a.numel(), y.data());
  std::copy(b.data(), b.data() + b.numel(), y.data() + a.numel());
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& gy, Tensor<T>& ga, Tensor<T>& gb) {
  std::copy(gy.data(), gy.data() + ga.numel(), ga.data());
  std::copy(gy.data() + ga.numel(), gy.data() + gy.numel(), gb.data());
}

/// Per-channel spatial mean: CHW -> length-C vector.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const int c = x.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
  Tensor<T> v({c});
  for (int ci = 0; ci < c; ++ci) {
    T s = T(0);
    const T* p = x.data() + ci * hw;
    for (std::int64_t i = 0; i < hw; ++i) s += p[i];
    v(ci) = s / static_cast<T>(hw);
  }
  return v;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& gv, int h, int w) {
  const int c = gv.dim(0);
  Tensor<T> gx({c, h, w});
  const T scale = T(1) / static_cast<T>(static_cast<std::int64_t>(h) * w);
  for (int ci = 0; ci < c; ++ci) {
    const T g = gv(ci) * scale;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) gx(ci, yy, xx) = g;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Fully connected layer on vectors
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  int in_dim = 0, out_dim = 0;
  Tensor<T> w, b, gw, gb;

  Linear() = default;
  Linear(int in, int out)
      : in_dim(in), out_dim(out), w({out, in}), b({out}), gw({out, in}), gb({out}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (std::int64_t i = 0; i < w.numel(); ++i)
      w[i] = static_cast<T>(uniform(rng, -bound, bound));
    for (std::int64_t i = 0; i < b.numel(); ++i)
      b[i] = static_cast<T>(uniform(rng, -bound, bound));
  }

  void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
  }

  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y({out_dim});
    for (int o = 0; o < out_dim; ++o) {
      T s = b(o);
      for (int i = 0; i < in_dim; ++i) s += w(o, i) * x(i);
      y(o) = s;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx({in_dim});
    for (int o = 0; o < out_dim; ++o) {
      gb(o) += gy(o);
      for (int i = 0; i < in_dim; ++i) {
        gw(o, i) += gy(o) * x_(i);
        gx(i) += w(o, i) * gy(o);
      }
    }
    return gx;
  }

 private:
  Tensor<T> x_;
};

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay) with a step LR scheduler.
// ---------------------------------------------------------------------------

template <typename T>
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 1e-3;

  explicit AdamW(std::vector<ParamRef<T>> params) : params_(std::move(params)) {
    for (auto& p : params_) {
      m_.emplace_back(Tensor<T>::zeros_like(*p.value));
      v_.emplace_back(Tensor<T>::zeros_like(*p.value));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, t_);
    const double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor<T>& p = *params_[pi].value;
      const Tensor<T>& g = *params_[pi].grad;
      Tensor<T>& m = m_[pi];
      Tensor<T>& v = v_[pi];
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
        const double vi =
            beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        double pd = static_cast<double>(p[i]);
        pd -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * pd);
        p[i] = static_cast<T>(pd);
      }
    }
  }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  long t_ = 0;
};

/// lr(epoch) = base * factor^floor(epoch / step_size)
inline double step_lr(double base, int epoch, int step_size, double factor) {
  if (step_size <= 0) return base;
  return base * std::pow(factor, epoch / step_size);
}

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace even::nn

#endif  // EVEN_NN_HPP
