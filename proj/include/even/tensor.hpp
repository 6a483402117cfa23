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

#ifndef EVEN_TENSOR_HPP
#define EVEN_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace even {

/// Dense row-major tensor of rank 1..4. Images are stored CHW, conv weights
/// [out, in, kh, kw]. This is deliberately a plain container; layer code owns
/// the math.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
    }
    data_.assign(numel_of(shape_), T(0));
  }

  Tensor(std::initializer_list<int> shape)
      : Tensor(std::vector<int>(shape)) {}

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data_[static_cast<size_t>(i)];
  }

  T& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  const T& operator()(int i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int i, int j) {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  const T& operator()(int i, int j) const {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }

  T& operator()(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  T& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }
  const T& operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void add_scaled(const Tensor& other, T scale) {
    if (other.numel() != numel())
      throw std::invalid_argument("Tensor::add_scaled: size mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
  }

  T max_abs() const {
    T m = T(0);
    for (T v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (size_t i = 0; i < data_.size(); ++i)
      out[static_cast<std::int64_t>(i)] = static_cast<U>(data_[i]);
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  static std::int64_t numel_of(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace even

#endif  // EVEN_TENSOR_HPP
