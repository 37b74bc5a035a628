#pragma once

#include <memory>
#include <optional>

#include "protoseg/data/types.hpp"
#include "protoseg/model/anchors.hpp"
#include "protoseg/model/backbone.hpp"
#include "protoseg/model/fpn.hpp"
#include "protoseg/model/head.hpp"
#include "protoseg/model/protonet.hpp"

namespace protoseg {

enum class InputMode { rgb, rgb_rgb, rgb_flow };
enum class FusionMode { concat_project, add };

inline std::string to_string(InputMode m) {
  switch (m) {
    case InputMode::rgb: return "rgb";
    case InputMode::rgb_rgb: return "rgb_rgb";
    case InputMode::rgb_flow: return "rgb_flow";
  }
  return "?";
}

inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "rgb") return InputMode::rgb;
  if (s == "rgb_rgb") return InputMode::rgb_rgb;
  if (s == "rgb_flow") return InputMode::rgb_flow;
  throw ConfigError("unknown input_mode '" + s + "' (accepted: rgb, rgb_rgb, rgb_flow)");
}

inline std::string to_string(FusionMode m) {
  return m == FusionMode::concat_project ? "concat_project" : "add";
}

inline FusionMode fusion_from_string(const std::string& s) {
  if (s == "concat_project") return FusionMode::concat_project;
  if (s == "add") return FusionMode::add;
  throw ConfigError("unknown fusion '" + s + "' (accepted: concat_project, add)");
}

struct ModelConfig {
  BackboneSpec backbone = BackboneSpec::tiny();
  InputMode input_mode = InputMode::rgb_flow;
  FusionMode fusion = FusionMode::concat_project;
  bool share_stream_weights = false;
  int fpn_width = 64;
  int num_prototypes = 32;
  int num_semantic_categories = kNumSemanticCategories;
  double anchor_scale = 3.0;   // anchor side = anchor_scale * level stride
  double flow_scale = 20.0;    // px displacement mapped to the raster value range
  double variance_xy = 0.1;
  double variance_wh = 0.2;

  bool two_stream() const { return input_mode != InputMode::rgb; }
};

// Renders a flow field into a 3-channel raster (u, v, magnitude) in [0,1] so
// both streams can share one backbone definition.
template <typename T>
Tensor<T> flow_to_raster(const FlowField& flow, double flow_scale) {
  Tensor<T> out({3, flow.height, flow.width});
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      double u = flow.u_at(y, x), v = flow.v_at(y, x);
      double un = std::clamp(u / flow_scale, -1.0, 1.0);
      double vn = std::clamp(v / flow_scale, -1.0, 1.0);
      double mag = std::clamp(std::sqrt(u * u + v * v) / flow_scale, 0.0, 1.0);
      out.at(0, y, x) = T(0.5 * (un + 1.0));
      out.at(1, y, x) = T(0.5 * (vn + 1.0));
      out.at(2, y, x) = T(mag);
    }
  return out;
}

// Leaf tensors fed to the network for one frame.
template <typename T>
struct ModelInput {
  ad::Var<T> rgb;
  ad::Var<T> second;  // null in rgb mode
};

template <typename T>
ModelInput<T> prepare_input(const FrameSample& sample, InputMode mode, double flow_scale,
                            bool inputs_require_grad = false) {
  ModelInput<T> in;
  in.rgb = ad::leaf(image_to_chw<T>(sample.image_t), inputs_require_grad);
  if (mode == InputMode::rgb_rgb) {
    if (!sample.image_t1)
      throw InputError("input_mode rgb_rgb requires image_t1 for frame " + sample.frame_id);
    in.second = ad::leaf(image_to_chw<T>(*sample.image_t1), inputs_require_grad);
  } else if (mode == InputMode::rgb_flow) {
    if (!sample.flow)
      throw InputError("input_mode rgb_flow requires a flow field for frame " +
                       sample.frame_id);
    in.second = ad::leaf(flow_to_raster<T>(*sample.flow, flow_scale), inputs_require_grad);
  }
  return in;
}

template <typename T>
struct ForwardResult {
  ad::Var<T> prototypes;  // [k, ceil(H/4), ceil(W/4)], shared by both heads
  std::optional<HeadOutput<T>> semantic;
  std::optional<HeadOutput<T>> motion;
  std::array<LevelShape, 5> level_shapes{};
};

// The joint model: one or two backbone streams, feature-level fusion, FPN,
// shared protonet, and two structurally identical prediction heads.
template <typename T>
class SegModel {
 public:
  explicit SegModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng root(seed);
    stream_rgb_ = build_backbone<T>(cfg.backbone, root.derive("stream_rgb"));
    if (cfg.two_stream() && !cfg.share_stream_weights)
      stream_motion_ = build_backbone<T>(cfg.backbone, root.derive("stream_motion"));
    if (cfg.two_stream() && cfg.fusion == FusionMode::concat_project) {
      auto taps = cfg.backbone.tap_channels();
      Rng frng = root.derive("fusion");
      for (int i = 0; i < 3; ++i)
        fuse_proj_[i] = Conv2dLayer<T>(2 * taps[size_t(i)], taps[size_t(i)], 1, 1, frng);
    }
    fpn_ = Fpn<T>(cfg.backbone.tap_channels(), cfg.fpn_width, root.derive("fpn"));
    protonet_ = ProtoNet<T>(cfg.fpn_width, cfg.num_prototypes, root.derive("protonet"));
    head_semantic_ = PredictionHead<T>(HeadTag::semantic, cfg.fpn_width,
                                       cfg.num_semantic_categories, cfg.num_prototypes,
                                       int(kAnchorRatios.size()), root.derive("head_semantic"));
    head_motion_ = PredictionHead<T>(HeadTag::motion, cfg.fpn_width, 1, cfg.num_prototypes,
                                     int(kAnchorRatios.size()), root.derive("head_motion"));
  }

  const ModelConfig& config() const { return cfg_; }

  // Fused backbone taps for the given input. In rgb mode this is exactly the
  // single-stream backbone output.
  std::array<ad::Var<T>, 3> forward_streams(const ModelInput<T>& in) const {
    auto taps = stream_rgb_->forward(in.rgb);
    if (!cfg_.two_stream()) return taps;
    if (!in.second) throw InputError("two-stream mode requires a second raster");
    const Backbone<T>* motion_stream =
        cfg_.share_stream_weights ? stream_rgb_.get() : stream_motion_.get();
    auto taps2 = motion_stream->forward(in.second);
    std::array<ad::Var<T>, 3> fused;
    for (int i = 0; i < 3; ++i) {
      if (cfg_.fusion == FusionMode::add)
        fused[size_t(i)] = ad::add(taps[size_t(i)], taps2[size_t(i)]);
      else
        fused[size_t(i)] = fuse_proj_[i](ad::concat_ch(taps[size_t(i)], taps2[size_t(i)]));
    }
    return fused;
  }

  ForwardResult<T> forward(const ModelInput<T>& in, bool run_semantic = true,
                           bool run_motion = true) const {
    const int input_h = in.rgb->value.dim(1), input_w = in.rgb->value.dim(2);
    auto taps = forward_streams(in);
    auto pyramid = fpn_.forward(taps);

    ForwardResult<T> out;
    for (size_t i = 0; i < pyramid.size(); ++i)
      out.level_shapes[i] = {pyramid[i]->value.dim(1), pyramid[i]->value.dim(2)};
    out.prototypes = protonet_.forward(pyramid[0], input_h, input_w);
    if (run_semantic) out.semantic = head_semantic_.forward(pyramid);
    if (run_motion) out.motion = head_motion_.forward(pyramid);
    return out;
  }

  std::vector<Anchor> anchors_for(int input_h, int input_w) const {
    std::array<LevelShape, 5> shapes;
    for (size_t i = 0; i < shapes.size(); ++i) {
      int s = kPyramidStrides[i];
      shapes[i] = {(input_h + s - 1) / s, (input_w + s - 1) / s};
    }
    return generate_anchors(shapes, cfg_.anchor_scale);
  }

  // Shared trunk: streams, fusion, FPN and protonet. Updated in every
  // training phase; the heads are phase-exclusive.
  ParamMap<T> trunk_params() const {
    ParamMap<T> out;
    stream_rgb_->collect("stream_rgb", out);
    if (stream_motion_) stream_motion_->collect("stream_motion", out);
    if (cfg_.two_stream() && cfg_.fusion == FusionMode::concat_project)
      for (int i = 0; i < 3; ++i) fuse_proj_[i].collect("fusion.proj" + std::to_string(i), out);
    fpn_.collect("fpn", out);
    protonet_.collect("protonet", out);
    return out;
  }

  ParamMap<T> head_params(HeadTag tag) const {
    ParamMap<T> out;
    if (tag == HeadTag::semantic)
      head_semantic_.collect("head_semantic", out);
    else
      head_motion_.collect("head_motion", out);
    return out;
  }

  ParamMap<T> all_params() const {
    ParamMap<T> out = trunk_params();
    out.merge(head_params(HeadTag::semantic));
    out.merge(head_params(HeadTag::motion));
    return out;
  }

  size_t count_params() const { return all_params().scalar_count(); }

 private:
  ModelConfig cfg_;
  std::unique_ptr<Backbone<T>> stream_rgb_;
  std::unique_ptr<Backbone<T>> stream_motion_;  // null when shared or rgb mode
  std::array<Conv2dLayer<T>, 3> fuse_proj_;
  Fpn<T> fpn_;
  ProtoNet<T> protonet_;
  PredictionHead<T> head_semantic_;
  PredictionHead<T> head_motion_;
};

using SegModelF = SegModel<float>;

}  // namespace protoseg
