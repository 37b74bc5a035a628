#pragma once

#include <algorithm>

namespace protoseg {

// Axis-aligned box in pixels, corner form with x1 < x2, y1 < y2.
struct BoxF {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  float w() const { return x2 - x1; }
  float h() const { return y2 - y1; }
  float area() const { return std::max(0.f, w()) * std::max(0.f, h()); }
  float cx() const { return 0.5f * (x1 + x2); }
  float cy() const { return 0.5f * (y1 + y2); }

  BoxF clipped(float width, float height) const {
    return {std::clamp(x1, 0.f, width), std::clamp(y1, 0.f, height),
            std::clamp(x2, 0.f, width), std::clamp(y2, 0.f, height)};
  }
};

inline double box_iou(const BoxF& a, const BoxF& b) {
  double ix = std::max(0.f, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double iy = std::max(0.f, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  double inter = ix * iy;
  double uni = double(a.area()) + double(b.area()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace protoseg
