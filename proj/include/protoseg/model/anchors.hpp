#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "protoseg/core/box.hpp"

namespace protoseg {

inline constexpr std::array<int, 5> kPyramidStrides = {8, 16, 32, 64, 128};
inline constexpr std::array<double, 3> kAnchorRatios = {1.0, 0.5, 2.0};  // w/h

struct LevelShape {
  int h = 0;
  int w = 0;
};

struct Anchor {
  float cx, cy, w, h;
  int level;

  BoxF box() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
};

// One scale per level, three aspect ratios per cell, all with equal area
// (w = s*sqrt(r), h = s/sqrt(r)). Ordering is (level, row, col, ratio) and
// matches the head output permutation.
inline std::vector<Anchor> generate_anchors(const std::array<LevelShape, 5>& levels,
                                            double scale_per_stride = 3.0) {
  std::vector<Anchor> anchors;
  size_t total = 0;
  for (const auto& l : levels) total += size_t(l.h) * l.w * kAnchorRatios.size();
  anchors.reserve(total);
  for (size_t li = 0; li < levels.size(); ++li) {
    const int stride = kPyramidStrides[li];
    const double scale = scale_per_stride * stride;
    for (int y = 0; y < levels[li].h; ++y)
      for (int x = 0; x < levels[li].w; ++x)
        for (double r : kAnchorRatios) {
          double sr = std::sqrt(r);
          anchors.push_back(Anchor{float((x + 0.5) * stride), float((y + 0.5) * stride),
                                   float(scale * sr), float(scale / sr), int(li)});
        }
  }
  return anchors;
}

}  // namespace protoseg
