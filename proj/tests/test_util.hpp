#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "protoseg/core/autodiff.hpp"

namespace protoseg::testutil {

// Relative gradient error with a floor so that near-zero pairs compare on an
// absolute scale.
inline double rel_err(double a, double b) {
  double scale = std::max({1e-6, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

// Central-difference gradient check. `build` must rebuild the whole forward
// graph from the current leaf values and return the scalar loss node. Returns
// the worst relative error over every element of every checked leaf.
template <typename T>
double gradcheck(const std::vector<ad::Var<T>>& leaves,
                 const std::function<ad::Var<T>()>& build, double h = 1e-6) {
  for (const auto& leaf : leaves) {
    ad::ensure_grad(*leaf);
    leaf->grad.fill(T(0));
  }
  ad::Var<T> loss = build();
  ad::backward(loss);

  std::vector<Tensor<T>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) analytic.push_back(leaf->grad);

  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    for (size_t i = 0; i < leaf->value.numel(); ++i) {
      T saved = leaf->value[i];
      double step = h * std::max(1.0, std::abs(double(saved)));
      leaf->value[i] = saved + T(step);
      double up = double(build()->value[0]);
      leaf->value[i] = saved - T(step);
      double down = double(build()->value[0]);
      leaf->value[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, rel_err(double(analytic[li][i]), numeric));
    }
  }
  return worst;
}

}  // namespace protoseg::testutil
