#include "quadprior/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "quadprior/errors.hpp"

namespace qp {

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

ImageF load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw io_error("load_png: cannot open '" + path + "'");

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw io_error("load_png: '" + path + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("load_png: libpng init failed for '" + path + "'");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("load_png: decode error in '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("load_png: unsupported bit depth 16 in '" + path + "'");
  }
  png_set_expand(png);       // palette -> RGB, <8 bit gray -> 8 bit
  png_set_strip_alpha(png);  // drop alpha if present
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int channels;
  if (color == PNG_COLOR_TYPE_GRAY)
    channels = 1;
  else if (color == PNG_COLOR_TYPE_RGB)
    channels = 3;
  else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("load_png: unsupported color type in '" + path + "'");
  }

  const std::size_t stride = png_get_rowbytes(png, info);
  raw.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageF img(static_cast<int>(w), static_cast<int>(h), channels);
  const float inv = 1.0f / 255.0f;
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_byte* row = raw.data() + y * stride;
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(static_cast<int>(x), static_cast<int>(y), c) = row[x * channels + c] * inv;
  }
  return img;
}

void save_png(const ImageF& img, const std::string& path) {
  if (img.empty()) throw std::invalid_argument("save_png: empty image");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("save_png: channels must be 1 or 3");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("save_png: cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw io_error("save_png: libpng init failed for '" + path + "'");
  }
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("save_png: encode error for '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

  raw.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(static_cast<double>(img.at(x, y, c)), 0.0, 1.0) * 255.0;
        raw[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
            static_cast<png_byte>(std::llround(v));  // half away from zero
      }
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = raw.data() + static_cast<std::size_t>(y) * img.width * img.channels;

  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace qp
