#pragma once

#include <optional>
#include <string>
#include <vector>

#include "protoseg/core/box.hpp"
#include "protoseg/core/error.hpp"
#include "protoseg/core/image.hpp"
#include "protoseg/io/flow_io.hpp"

namespace protoseg {

enum class Category { car, truck, van, pedestrian, cyclist, generic };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::car: return "car";
    case Category::truck: return "truck";
    case Category::van: return "van";
    case Category::pedestrian: return "pedestrian";
    case Category::cyclist: return "cyclist";
    case Category::generic: return "generic";
  }
  return "?";
}

inline Category category_from_string(const std::string& s) {
  for (Category c : {Category::car, Category::truck, Category::van, Category::pedestrian,
                     Category::cyclist, Category::generic})
    if (s == to_string(c)) return c;
  throw FormatError("unknown category '" + s + "'");
}

// Semantic-head class ids: background 0, then the five named categories.
inline constexpr int kNumSemanticCategories = 5;

inline int semantic_class_id(Category c) {
  if (c == Category::generic)
    throw ValidationError("category 'generic' has no semantic class id");
  return int(c) + 1;
}

// One instance: binary mask plus box, category and motion state.
struct InstanceAnnotation {
  int instance_id = 0;  // >= 1; 0 is background in indexed rasters
  Category category = Category::generic;
  bool moving = false;
  BoxF box;
  std::vector<uint8_t> mask;  // H*W, values 0/1
};

// One training/eval example. image_t1 and flow are optional because some
// sources (class-agnostic sets) provide neither.
struct FrameSample {
  std::string frame_id;
  std::string sequence_id;
  ImageU8 image_t;
  std::optional<ImageU8> image_t1;
  std::optional<FlowField> flow;
  std::vector<InstanceAnnotation> annotations;
  bool negative_frame = true;  // true iff no annotation is moving

  int width() const { return image_t.width; }
  int height() const { return image_t.height; }

  void refresh_negative_flag() {
    negative_frame = true;
    for (const auto& a : annotations)
      if (a.moving) negative_frame = false;
  }
};

enum class ShapeKind { rectangle, ellipse, triangle };

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::rectangle: return "rectangle";
    case ShapeKind::ellipse: return "ellipse";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

// Synthetic moving-shapes scene description. Velocities are px/frame in the
// world frame; the camera itself pans by ego_translation each frame.
struct SyntheticSceneConfig {
  int height = 128;
  int width = 128;
  int num_shapes = 3;
  std::vector<ShapeKind> shape_kinds = {ShapeKind::rectangle, ShapeKind::ellipse,
                                        ShapeKind::triangle};
  int ego_dx = 1;
  int ego_dy = 0;
  int min_speed = 1;  // per-axis |velocity| bound for moving shapes
  int max_speed = 3;
  double moving_fraction = 0.5;
  int frames_per_sequence = 4;
  int num_sequences = 1;
  int min_shape_size = 16;
  int max_shape_size = 40;
  uint64_t seed = 1;

  void validate() const {
    if (height < 64 || width < 64)
      throw ValidationError("synthetic scene requires H,W >= 64");
    if (moving_fraction < 0.0 || moving_fraction > 1.0)
      throw ValidationError("moving_fraction must lie in [0,1]");
    if (num_shapes < 0 || frames_per_sequence < 1 || num_sequences < 1)
      throw ValidationError("synthetic scene counts must be positive");
    if (shape_kinds.empty()) throw ValidationError("shape_kinds must not be empty");
  }
};

}  // namespace protoseg
