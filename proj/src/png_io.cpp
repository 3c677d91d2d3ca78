#include "radiant/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace radiant {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t to_byte(float v) {
  float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return uint8_t(c * 255.f + 0.5f);
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + size_t(y) * size_t(width) * size_t(channels)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void read_png(const std::string& path, int& width, int& height, int channels,
              std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed for " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = int(png_get_image_width(png, info));
  height = int(png_get_image_height(png, info));
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (channels == 3)
    png_set_gray_to_rgb(png);
  else if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  bytes.resize(size_t(width) * size_t(height) * size_t(channels));
  for (int y = 0; y < height; ++y)
    png_read_row(png, bytes.data() + size_t(y) * size_t(width) * size_t(channels), nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_rgb(const std::string& path, const ImageRGB& img) {
  std::vector<uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) bytes[i] = to_byte(img.data[i]);
  write_png(path, img.width, img.height, 3, bytes);
}

ImageRGB read_png_rgb(const std::string& path) {
  int w, h;
  std::vector<uint8_t> bytes;
  read_png(path, w, h, 3, bytes);
  ImageRGB img(h, w);
  for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = float(bytes[i]) / 255.f;
  return img;
}

void write_png_mask(const std::string& path, const ImageGray& mask) {
  std::vector<uint8_t> bytes(mask.data.size());
  for (size_t i = 0; i < mask.data.size(); ++i) bytes[i] = mask.data[i] > 0.5f ? 255 : 0;
  write_png(path, mask.width, mask.height, 1, bytes);
}

ImageGray read_png_mask(const std::string& path) {
  int w, h;
  std::vector<uint8_t> bytes;
  read_png(path, w, h, 1, bytes);
  ImageGray mask(h, w);
  for (size_t i = 0; i < bytes.size(); ++i) mask.data[i] = bytes[i] >= 128 ? 1.f : 0.f;
  return mask;
}

void write_depth(const std::string& path, const ImageGray& depth) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  uint32_t h = uint32_t(depth.height), w = uint32_t(depth.width);
  std::fwrite("DPTH", 1, 4, fp.get());
  std::fwrite(&h, 4, 1, fp.get());
  std::fwrite(&w, 4, 1, fp.get());
  std::fwrite(depth.data.data(), 4, depth.data.size(), fp.get());
}

ImageGray read_depth(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  char magic[4];
  uint32_t h = 0, w = 0;
  if (std::fread(magic, 1, 4, fp.get()) != 4 || std::memcmp(magic, "DPTH", 4) != 0)
    throw std::runtime_error("bad depth file magic in " + path);
  if (std::fread(&h, 4, 1, fp.get()) != 1 || std::fread(&w, 4, 1, fp.get()) != 1)
    throw std::runtime_error("truncated depth header in " + path);
  ImageGray depth{int(h), int(w)};
  if (std::fread(depth.data.data(), 4, depth.data.size(), fp.get()) != depth.data.size())
    throw std::runtime_error("truncated depth data in " + path);
  return depth;
}

}  // namespace radiant
