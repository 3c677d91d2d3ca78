#pragma once

// Image containers and file I/O (8-bit PNG, raw float depth maps).

#include <cstdint>
#include <string>
#include <vector>

namespace radiant {

struct ImageRGB {
  int height = 0, width = 0;
  std::vector<float> data;  // H*W*3, row-major, values in [0,1]

  ImageRGB() = default;
  ImageRGB(int h, int w) : height(h), width(w), data(size_t(h) * size_t(w) * 3, 0.f) {}
  float& at(int y, int x, int c) { return data[(size_t(y) * size_t(width) + size_t(x)) * 3 + size_t(c)]; }
  float at(int y, int x, int c) const {
    return data[(size_t(y) * size_t(width) + size_t(x)) * 3 + size_t(c)];
  }
};

struct ImageGray {
  int height = 0, width = 0;
  std::vector<float> data;  // H*W

  ImageGray() = default;
  ImageGray(int h, int w, float fill = 0.f)
      : height(h), width(w), data(size_t(h) * size_t(w), fill) {}
  float& at(int y, int x) { return data[size_t(y) * size_t(width) + size_t(x)]; }
  float at(int y, int x) const { return data[size_t(y) * size_t(width) + size_t(x)]; }
};

void write_png_rgb(const std::string& path, const ImageRGB& img);
ImageRGB read_png_rgb(const std::string& path);

// 0/255 binary mask as 8-bit grayscale PNG; in memory 0/1 floats.
void write_png_mask(const std::string& path, const ImageGray& mask);
ImageGray read_png_mask(const std::string& path);

// Raw depth: header "DPTH", u32 height, u32 width, then H*W little-endian
// f32 meters (0 = no depth).
void write_depth(const std::string& path, const ImageGray& depth);
ImageGray read_depth(const std::string& path);

}  // namespace radiant
