#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "protoseg/core/error.hpp"

namespace protoseg {

// Dense row-major tensor of rank <= 4. Feature maps are [C,H,W], conv weights
// [Cout,Cin,Kh,Kw], per-anchor tables [N,D].
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (int d : shape_)
      if (d < 0) throw ValidationError("tensor dimension must be non-negative");
    data_.assign(numel_of(shape_), fill);
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // Rank-specific accessors; bounds are the caller's contract.
  T& at(int i, int j) { return data_[size_t(i) * shape_[1] + j]; }
  const T& at(int i, int j) const { return data_[size_t(i) * shape_[1] + j]; }

  T& at(int c, int y, int x) {
    return data_[(size_t(c) * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(int c, int y, int x) const {
    return data_[(size_t(c) * shape_[1] + y) * shape_[2] + x];
  }

  T& at(int o, int c, int y, int x) {
    return data_[((size_t(o) * shape_[1] + c) * size_t(shape_[2]) + y) * shape_[3] + x];
  }
  const T& at(int o, int c, int y, int x) const {
    return data_[((size_t(o) * shape_[1] + c) * size_t(shape_[2]) + y) * shape_[3] + x];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != data_.size())
      throw ValidationError("reshape changes element count: " + shape_str(shape_) +
                            " -> " + shape_str(shape));
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  static std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
  }

 private:
  static size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return shape.empty() ? 0 : n;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace protoseg
