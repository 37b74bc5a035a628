#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "protoseg/core/ops.hpp"
#include "protoseg/core/rng.hpp"

namespace protoseg {

// Ordered name -> parameter registry. Names are stable module paths
// ("fpn.lateral0.w") used by the optimizer, checkpoints and the freezing
// contract between the two heads.
template <typename T>
struct ParamMap {
  std::vector<std::pair<std::string, ad::Var<T>>> items;

  void add(const std::string& name, const ad::Var<T>& v) { items.emplace_back(name, v); }

  void merge(const ParamMap& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& [name, v] : items) n += v->value.numel();
    return n;
  }

  void zero_grads() const {
    for (const auto& [name, v] : items) {
      ad::ensure_grad(*v);
      v->grad.fill(T(0));
    }
  }

  const ad::Var<T>* find(const std::string& name) const {
    for (const auto& [n, v] : items)
      if (n == name) return &v;
    return nullptr;
  }
};

// 3x3/1x1 convolution layer with He-normal init, SAME padding.
template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int in_ch, int out_ch, int k, int stride, Rng& rng)
      : stride_(stride) {
    Tensor<T> w({out_ch, in_ch, k, k});
    double std_dev = std::sqrt(2.0 / (double(in_ch) * k * k));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = T(rng.normal() * std_dev);
    w_ = ad::leaf(std::move(w), true);
    b_ = ad::leaf(Tensor<T>({out_ch}), true);
  }

  ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::conv2d(x, w_, b_, stride_); }

  void collect(const std::string& prefix, ParamMap<T>& out) const {
    out.add(prefix + ".w", w_);
    out.add(prefix + ".b", b_);
  }

  const ad::Var<T>& weight() const { return w_; }
  const ad::Var<T>& bias() const { return b_; }

 private:
  ad::Var<T> w_, b_;
  int stride_ = 1;
};

template <typename T>
class DepthwiseConv2dLayer {
 public:
  DepthwiseConv2dLayer() = default;
  DepthwiseConv2dLayer(int ch, int k, int stride, Rng& rng) : stride_(stride) {
    Tensor<T> w({ch, 1, k, k});
    double std_dev = std::sqrt(2.0 / (double(k) * k));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = T(rng.normal() * std_dev);
    w_ = ad::leaf(std::move(w), true);
    b_ = ad::leaf(Tensor<T>({ch}), true);
  }

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    return ad::depthwise_conv2d(x, w_, b_, stride_);
  }

  void collect(const std::string& prefix, ParamMap<T>& out) const {
    out.add(prefix + ".w", w_);
    out.add(prefix + ".b", b_);
  }

 private:
  ad::Var<T> w_, b_;
  int stride_ = 1;
};

}  // namespace protoseg
