#pragma once

#include <array>
#include <vector>

#include "protoseg/nn/module.hpp"

namespace protoseg {

// Feature pyramid over the three backbone taps: 1x1 laterals to a common
// width, top-down nearest upsample + add, 3x3 smoothing, then P6/P7 via
// chained stride-2 convolutions.
template <typename T>
class Fpn {
 public:
  Fpn() = default;
  Fpn(const std::array<int, 3>& tap_channels, int width, Rng rng) : width_(width) {
    for (int i = 0; i < 3; ++i) {
      lateral_[i] = Conv2dLayer<T>(tap_channels[size_t(i)], width, 1, 1, rng);
      smooth_[i] = Conv2dLayer<T>(width, width, 3, 1, rng);
    }
    down6_ = Conv2dLayer<T>(width, width, 3, 2, rng);
    down7_ = Conv2dLayer<T>(width, width, 3, 2, rng);
  }

  // taps: strides 8/16/32 -> P3..P7 at strides 8/16/32/64/128.
  std::array<ad::Var<T>, 5> forward(const std::array<ad::Var<T>, 3>& taps) const {
    std::array<ad::Var<T>, 3> lat;
    for (int i = 0; i < 3; ++i) lat[i] = lateral_[i](taps[size_t(i)]);

    ad::Var<T> m5 = lat[2];
    ad::Var<T> m4 =
        ad::add(lat[1], ad::upsample_nearest(m5, lat[1]->value.dim(1), lat[1]->value.dim(2)));
    ad::Var<T> m3 =
        ad::add(lat[0], ad::upsample_nearest(m4, lat[0]->value.dim(1), lat[0]->value.dim(2)));

    std::array<ad::Var<T>, 5> out;
    out[0] = smooth_[0](m3);
    out[1] = smooth_[1](m4);
    out[2] = smooth_[2](m5);
    out[3] = down6_(out[2]);
    out[4] = down7_(out[3]);
    return out;
  }

  int width() const { return width_; }

  void collect(const std::string& prefix, ParamMap<T>& out) const {
    for (int i = 0; i < 3; ++i) {
      lateral_[i].collect(prefix + ".lateral" + std::to_string(i), out);
      smooth_[i].collect(prefix + ".smooth" + std::to_string(i), out);
    }
    down6_.collect(prefix + ".down6", out);
    down7_.collect(prefix + ".down7", out);
  }

 private:
  int width_ = 0;
  std::array<Conv2dLayer<T>, 3> lateral_, smooth_;
  Conv2dLayer<T> down6_, down7_;
};

}  // namespace protoseg
