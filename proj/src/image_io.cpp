#include "midframe/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace midframe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_magic(std::FILE* f, const unsigned char* magic, int n) {
  unsigned char buf[8] = {0};
  const size_t got = std::fread(buf, 1, static_cast<size_t>(n), f);
  std::rewind(f);
  return got == static_cast<size_t>(n) && std::memcmp(buf, magic, static_cast<size_t>(n)) == 0;
}

void quiet_png_error(png_structp png, png_const_charp) {
  longjmp(png_jmpbuf(png), 1);
}
void quiet_png_warning(png_structp, png_const_charp) {}

Image load_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           quiet_png_error, quiet_png_warning);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<unsigned char> raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode error: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG with zero dimension: " + path);
  }
  if (depth != 8 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG bit depth: " + path);
  }
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG color type (need gray or RGB): " + path);
  }
  const int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  const size_t bytes_per_sample = static_cast<size_t>(depth / 8);
  const size_t row_bytes = static_cast<size_t>(w) * channels * bytes_per_sample;

  raster.resize(row_bytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = raster.data() + y * row_bytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const float denom = depth == 8 ? 255.0f : 65535.0f;
  for (int c = 0; c < channels; ++c) {
    float* dst = img.plane(c);
    for (png_uint_32 y = 0; y < h; ++y) {
      const unsigned char* src = raster.data() + y * row_bytes;
      for (png_uint_32 x = 0; x < w; ++x) {
        const size_t s = (static_cast<size_t>(x) * channels + c) * bytes_per_sample;
        unsigned v = src[s];
        if (depth == 16) v = (v << 8) | src[s + 1];  // PNG is big-endian
        dst[static_cast<size_t>(y) * w + x] = static_cast<float>(v) / denom;
      }
    }
  }
  return img;
}

void skip_pnm_space(std::FILE* f) {
  int c;
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      std::ungetc(c, f);
      return;
    }
  }
}

long read_pnm_int(std::FILE* f, const std::string& path) {
  skip_pnm_space(f);
  long v = 0;
  if (std::fscanf(f, "%ld", &v) != 1) throw IoError("malformed PNM header: " + path);
  return v;
}

Image load_pnm(std::FILE* f, const std::string& path, int channels) {
  std::fgetc(f);  // 'P'
  std::fgetc(f);  // '5' or '6'
  const long w = read_pnm_int(f, path);
  const long h = read_pnm_int(f, path);
  const long maxval = read_pnm_int(f, path);
  if (w < 1 || h < 1) throw DataError("PNM with zero dimension: " + path);
  if (maxval < 1 || maxval > 65535) throw DataError("unsupported PNM maxval: " + path);
  const int c = std::fgetc(f);
  if (c == EOF || !std::isspace(c)) throw IoError("malformed PNM header: " + path);

  const bool wide = maxval > 255;
  const size_t bytes_per_sample = wide ? 2 : 1;
  const size_t n = static_cast<size_t>(w) * h * channels * bytes_per_sample;
  std::vector<unsigned char> raw(n);
  if (std::fread(raw.data(), 1, n, f) != n) throw IoError("truncated PNM payload: " + path);

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const float denom = wide ? 65535.0f : 255.0f;
  for (int ch = 0; ch < channels; ++ch) {
    float* dst = img.plane(ch);
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        const size_t s = ((static_cast<size_t>(y) * w + x) * channels + ch) * bytes_per_sample;
        unsigned v = raw[s];
        if (wide) v = (v << 8) | raw[s + 1];  // PNM 2-byte samples are big-endian
        dst[static_cast<size_t>(y) * w + x] = static_cast<float>(v) / denom;
      }
    }
  }
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  static const unsigned char png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (has_magic(f.get(), png_magic, 8)) return load_png(f.get(), path);
  unsigned char hdr[2] = {0};
  if (std::fread(hdr, 1, 2, f.get()) == 2) {
    std::rewind(f.get());
    if (hdr[0] == 'P' && hdr[1] == '5') return load_pnm(f.get(), path, 1);
    if (hdr[0] == 'P' && hdr[1] == '6') return load_pnm(f.get(), path, 3);
  }
  throw DataError("unsupported image format: " + path);
}

void save_image(const Image& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);

  const int w = img.width, h = img.height, ch = img.channels;
  std::vector<unsigned char> raster(static_cast<size_t>(w) * h * ch);
  for (int c = 0; c < ch; ++c) {
    const float* src = img.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float v = std::clamp(src[static_cast<size_t>(y) * w + x], 0.0f, 1.0f);
        const int q = static_cast<int>(std::floor(v * 255.0f + 0.5f));  // round half up
        raster[(static_cast<size_t>(y) * w + x) * ch + c] =
            static_cast<unsigned char>(std::clamp(q, 0, 255));
      }
    }
  }

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            quiet_png_error, quiet_png_warning);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode error: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] = raster.data() + static_cast<size_t>(y) * w * ch;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace midframe
