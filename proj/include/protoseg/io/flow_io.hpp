#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "protoseg/core/error.hpp"

namespace protoseg {

// Dense optical flow: planar per-pixel displacement in pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u, v;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), u(size_t(w) * h, 0.f), v(size_t(w) * h, 0.f) {}

  float& u_at(int y, int x) { return u[size_t(y) * width + x]; }
  float& v_at(int y, int x) { return v[size_t(y) * width + x]; }
  float u_at(int y, int x) const { return u[size_t(y) * width + x]; }
  float v_at(int y, int x) const { return v[size_t(y) * width + x]; }
};

// Middlebury .flo container: float magic 202021.25, int32 width, int32 height,
// then (u,v) float pairs in row-major order. All little-endian 32-bit.
inline constexpr float kFlowMagic = 202021.25f;

inline void write_flow(const FlowField& field, const std::string& path) {
  for (size_t i = 0; i < field.u.size(); ++i)
    if (!std::isfinite(field.u[i]) || !std::isfinite(field.v[i]))
      throw ValidationError("flow field contains non-finite values");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open flow file for writing: " + path);
  int32_t w = field.width, h = field.height;
  out.write(reinterpret_cast<const char*>(&kFlowMagic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[size_t(x) * 2] = field.u_at(y, x);
      row[size_t(x) * 2 + 1] = field.v_at(y, x);
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * 4));
  }
  if (!out) throw IoError("flow write failed: " + path);
}

inline FlowField read_flow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open flow file: " + path);
  float magic = 0.f;
  int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || magic != kFlowMagic)
    throw FormatError("not a flow file (bad magic): " + path);
  if (w <= 0 || h <= 0) throw FormatError("flow file has invalid dimensions: " + path);

  FlowField field(w, h);
  std::vector<float> row(size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 4));
    if (!in) throw FormatError("truncated flow payload: " + path);
    for (int x = 0; x < w; ++x) {
      field.u_at(y, x) = row[size_t(x) * 2];
      field.v_at(y, x) = row[size_t(x) * 2 + 1];
    }
  }
  return field;
}

}  // namespace protoseg
