#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "protoseg/core/tensor.hpp"

namespace protoseg {

// Interleaved 8-bit raster (RGB when channels == 3, single plane when 1).
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> data;

  ImageU8() = default;
  ImageU8(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  uint8_t& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  uint8_t at(int y, int x, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

  bool same_size(const ImageU8& o) const { return width == o.width && height == o.height; }
};

// Planar float CHW <-> interleaved u8, with values mapped to [0,1].
template <typename T>
Tensor<T> image_to_chw(const ImageU8& img) {
  Tensor<T> out({img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, y, x) = T(img.at(y, x, c)) / T(255);
  return out;
}

template <typename T>
ImageU8 chw_to_image(const Tensor<T>& chw) {
  ImageU8 img(chw.dim(2), chw.dim(1), chw.dim(0));
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double v = double(chw.at(c, y, x)) * 255.0;
        img.at(y, x, c) = uint8_t(std::clamp(std::lround(v), 0l, 255l));
      }
  return img;
}

// Bilinear resample of a CHW plane stack. Uses half-pixel centers.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, int out_h, int out_w) {
  const int c_n = src.dim(0), in_h = src.dim(1), in_w = src.dim(2);
  Tensor<T> dst({c_n, out_h, out_w});
  const double sy = double(in_h) / out_h, sx = double(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = int(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, in_h - 1), y1c = std::clamp(y0 + 1, 0, in_h - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = int(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, in_w - 1), x1c = std::clamp(x0 + 1, 0, in_w - 1);
      for (int c = 0; c < c_n; ++c) {
        double v00 = src.at(c, y0c, x0c), v01 = src.at(c, y0c, x1c);
        double v10 = src.at(c, y1c, x0c), v11 = src.at(c, y1c, x1c);
        double top = v00 + (v01 - v00) * wx;
        double bot = v10 + (v11 - v10) * wx;
        dst.at(c, y, x) = T(top + (bot - top) * wy);
      }
    }
  }
  return dst;
}

// Nearest-neighbour resample for label rasters.
inline std::vector<uint8_t> resize_nearest_u8(const std::vector<uint8_t>& src, int in_w,
                                              int in_h, int out_w, int out_h) {
  std::vector<uint8_t> dst(size_t(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    int sy = std::min(in_h - 1, int(double(y) * in_h / out_h));
    for (int x = 0; x < out_w; ++x) {
      int sx = std::min(in_w - 1, int(double(x) * in_w / out_w));
      dst[size_t(y) * out_w + x] = src[size_t(sy) * in_w + sx];
    }
  }
  return dst;
}

}  // namespace protoseg
