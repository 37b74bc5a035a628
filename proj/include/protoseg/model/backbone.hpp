#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "protoseg/nn/module.hpp"

namespace protoseg {

enum class BackboneName { tiny_conv, mobilenet_v2_style };

inline std::string to_string(BackboneName n) {
  return n == BackboneName::tiny_conv ? "tiny_conv" : "mobilenet_v2_style";
}

inline BackboneName backbone_from_string(const std::string& s) {
  if (s == "tiny_conv") return BackboneName::tiny_conv;
  if (s == "mobilenet_v2_style") return BackboneName::mobilenet_v2_style;
  throw ConfigError("unknown backbone '" + s +
                    "' (accepted: tiny_conv, mobilenet_v2_style)");
}

// Every backbone exposes exactly three tap stages at strides 8, 16, 32.
struct BackboneSpec {
  BackboneName name = BackboneName::tiny_conv;
  // Per-stage output channels; stages run at strides {2,4,8,16,32} and the
  // last three are the taps.
  std::vector<int> stage_channels;

  static BackboneSpec tiny() { return {BackboneName::tiny_conv, {16, 24, 32, 48, 64}}; }
  static BackboneSpec mobilenet() {
    return {BackboneName::mobilenet_v2_style, {16, 24, 32, 64, 96}};
  }
  static BackboneSpec by_name(BackboneName n) {
    return n == BackboneName::tiny_conv ? tiny() : mobilenet();
  }

  std::array<int, 3> tap_channels() const {
    return {stage_channels[2], stage_channels[3], stage_channels[4]};
  }
};

inline constexpr std::array<int, 3> kTapStrides = {8, 16, 32};

template <typename T>
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::array<ad::Var<T>, 3> forward(const ad::Var<T>& image) const = 0;
  virtual std::array<int, 3> tap_channels() const = 0;
  virtual void collect(const std::string& prefix, ParamMap<T>& out) const = 0;
};

// Plain stack of stride-2 3x3 convolutions with one refining 3x3 per tap
// stage. Small enough for unit tests and CPU-scale training.
template <typename T>
class TinyConvBackbone final : public Backbone<T> {
 public:
  TinyConvBackbone(const BackboneSpec& spec, Rng rng) : spec_(spec) {
    const auto& ch = spec.stage_channels;
    down_.emplace_back(3, ch[0], 3, 2, rng);
    for (size_t i = 1; i < ch.size(); ++i) down_.emplace_back(ch[i - 1], ch[i], 3, 2, rng);
    for (size_t i = 2; i < ch.size(); ++i) refine_.emplace_back(ch[i], ch[i], 3, 1, rng);
  }

  std::array<ad::Var<T>, 3> forward(const ad::Var<T>& image) const override {
    ad::Var<T> x = image;
    std::array<ad::Var<T>, 3> taps;
    for (size_t i = 0; i < down_.size(); ++i) {
      x = ad::relu(down_[i](x));
      if (i >= 2) {
        x = ad::relu(refine_[i - 2](x));
        taps[i - 2] = x;
      }
    }
    return taps;
  }

  std::array<int, 3> tap_channels() const override { return spec_.tap_channels(); }

  void collect(const std::string& prefix, ParamMap<T>& out) const override {
    for (size_t i = 0; i < down_.size(); ++i)
      down_[i].collect(prefix + ".down" + std::to_string(i), out);
    for (size_t i = 0; i < refine_.size(); ++i)
      refine_[i].collect(prefix + ".refine" + std::to_string(i), out);
  }

 private:
  BackboneSpec spec_;
  std::vector<Conv2dLayer<T>> down_;
  std::vector<Conv2dLayer<T>> refine_;
};

// Inverted-residual backbone: 1x1 expand (ReLU6), 3x3 depthwise (ReLU6),
// 1x1 linear projection, residual when shape-preserving.
template <typename T>
class MobileNetV2StyleBackbone final : public Backbone<T> {
 public:
  MobileNetV2StyleBackbone(const BackboneSpec& spec, Rng rng) : spec_(spec) {
    const auto& ch = spec.stage_channels;
    stem_ = Conv2dLayer<T>(3, ch[0], 3, 2, rng);
    int in = ch[0];
    for (size_t stage = 1; stage < ch.size(); ++stage) {
      blocks_.push_back(Block(in, ch[stage], 2, rng));
      blocks_.push_back(Block(ch[stage], ch[stage], 1, rng));
      in = ch[stage];
      stage_end_.push_back(blocks_.size());
    }
  }

  std::array<ad::Var<T>, 3> forward(const ad::Var<T>& image) const override {
    ad::Var<T> x = ad::relu6(stem_(image));
    std::array<ad::Var<T>, 3> taps;
    size_t stage = 0;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      x = blocks_[i].forward(x);
      if (stage < stage_end_.size() && i + 1 == stage_end_[stage]) {
        if (stage >= 1) taps[stage - 1] = x;  // stages 2..4 are strides 8/16/32
        ++stage;
      }
    }
    return taps;
  }

  std::array<int, 3> tap_channels() const override { return spec_.tap_channels(); }

  void collect(const std::string& prefix, ParamMap<T>& out) const override {
    stem_.collect(prefix + ".stem", out);
    for (size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  }

 private:
  struct Block {
    Conv2dLayer<T> expand, project;
    DepthwiseConv2dLayer<T> dw;
    bool residual;

    Block(int in, int out, int stride, Rng& rng)
        : expand(in, in * 4, 1, 1, rng),
          project(in * 4, out, 1, 1, rng),
          dw(in * 4, 3, stride, rng),
          residual(stride == 1 && in == out) {}

    ad::Var<T> forward(const ad::Var<T>& x) const {
      ad::Var<T> y = ad::relu6(expand(x));
      y = ad::relu6(dw(y));
      y = project(y);
      return residual ? ad::add(x, y) : y;
    }

    void collect(const std::string& prefix, ParamMap<T>& out) const {
      expand.collect(prefix + ".expand", out);
      dw.collect(prefix + ".dw", out);
      project.collect(prefix + ".project", out);
    }
  };

  BackboneSpec spec_;
  Conv2dLayer<T> stem_;
  std::vector<Block> blocks_;
  std::vector<size_t> stage_end_;
};

template <typename T>
std::unique_ptr<Backbone<T>> build_backbone(const BackboneSpec& spec, Rng rng) {
  switch (spec.name) {
    case BackboneName::tiny_conv:
      return std::make_unique<TinyConvBackbone<T>>(spec, rng);
    case BackboneName::mobilenet_v2_style:
      return std::make_unique<MobileNetV2StyleBackbone<T>>(spec, rng);
  }
  throw ConfigError("unknown backbone name");
}

}  // namespace protoseg
