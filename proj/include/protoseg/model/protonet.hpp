#pragma once

#include "protoseg/nn/module.hpp"

namespace protoseg {

// Prototype branch shared by both heads: three 3x3 conv+ReLU layers on P3,
// nearest upsample from stride 8 to stride 4, 1x1 to k channels, ReLU so
// prototypes stay non-negative.
template <typename T>
class ProtoNet {
 public:
  ProtoNet() = default;
  ProtoNet(int in_channels, int num_prototypes, Rng rng) : k_(num_prototypes) {
    for (int i = 0; i < 3; ++i)
      convs_[i] = Conv2dLayer<T>(in_channels, in_channels, 3, 1, rng);
    head_ = Conv2dLayer<T>(in_channels, num_prototypes, 1, 1, rng);
  }

  // p3 is the stride-8 pyramid level; (input_h, input_w) is the network input
  // size, so prototypes land exactly on the stride-4 grid.
  ad::Var<T> forward(const ad::Var<T>& p3, int input_h, int input_w) const {
    ad::Var<T> x = p3;
    for (int i = 0; i < 3; ++i) x = ad::relu(convs_[i](x));
    x = ad::upsample_nearest(x, (input_h + 3) / 4, (input_w + 3) / 4);
    return ad::relu(head_(x));
  }

  int num_prototypes() const { return k_; }

  void collect(const std::string& prefix, ParamMap<T>& out) const {
    for (int i = 0; i < 3; ++i) convs_[i].collect(prefix + ".conv" + std::to_string(i), out);
    head_.collect(prefix + ".proj", out);
  }

 private:
  int k_ = 0;
  std::array<Conv2dLayer<T>, 3> convs_;
  Conv2dLayer<T> head_;
};

}  // namespace protoseg
