/* Copyright 2026 The roadseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadseg/image.hpp"

#include <cstdio>
#include <memory>

#include <fmt/format.h>
#include <png.h>

#include "roadseg/error.hpp"

namespace roadseg {

ImageBuffer::ImageBuffer(int height, int width)
    : h(height), w(width), rgb(static_cast<std::size_t>(height) * width * 3, 0) {}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError(fmt::format("cannot open {}", path.string()));
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw DataError(fmt::format("png: {}", msg));
}

void png_warn(png_structp, png_const_charp) {}

// Decoded samples: `channels` per pixel (1 = gray, 3 = RGB), 8 or 16 bits.
struct Decoded {
  int h = 0;
  int w = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

Decoded decode(const std::filesystem::path& path, bool want_rgb) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(fmt::format("{} is not a PNG file", path.string()));
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("png: out of memory");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  const bool source_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  if (want_rgb) {
    if (depth == 16) png_set_strip_16(png);
    if (source_gray) png_set_gray_to_rgb(png);
  } else if (!source_gray) {
    if (depth == 16) png_set_strip_16(png);
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  Decoded d;
  d.w = static_cast<int>(png_get_image_width(png, info));
  d.h = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(rowbytes * d.h);
  std::vector<png_bytep> rows(d.h);
  for (int y = 0; y < d.h; ++y) rows[y] = raw.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const std::size_t count = static_cast<std::size_t>(d.h) * d.w * d.channels;
  d.samples.resize(count);
  if (d.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      d.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) d.samples[i] = raw[i];
  }
  (void)depth;
  return d;
}

void encode(const std::filesystem::path& path, int h, int w, int color_type, int bit_depth,
            const std::vector<png_byte>& raw) {
  if (h < 1 || w < 1) throw DataError("cannot write an empty image");
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw DataError("png: out of memory");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = raw.size() / h;
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(raw.data() + rowbytes * y));
  }
  png_write_end(png, nullptr);
}

}  // namespace

ImageBuffer read_png_rgb(const std::filesystem::path& path) {
  Decoded d = decode(path, true);
  ImageBuffer img(d.h, d.w);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    img.rgb[i] = static_cast<std::uint8_t>(d.samples[i]);
  }
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  Decoded d = decode(path, false);
  return {d.h, d.w, d.bit_depth, std::move(d.samples)};
}

void write_png_rgb(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.h) * image.w * 3) {
    throw DataError("RGB buffer size does not match its dims");
  }
  encode(path, image.h, image.w, PNG_COLOR_TYPE_RGB, 8, {image.rgb.begin(), image.rgb.end()});
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  const std::size_t count = static_cast<std::size_t>(image.h) * image.w;
  if (image.values.size() != count) throw DataError("gray buffer size does not match its dims");
  std::vector<png_byte> raw;
  if (image.bit_depth == 16) {
    raw.resize(count * 2);
    for (std::size_t i = 0; i < count; ++i) {
      raw[2 * i] = static_cast<png_byte>(image.values[i] >> 8);
      raw[2 * i + 1] = static_cast<png_byte>(image.values[i] & 0xFF);
    }
  } else if (image.bit_depth == 8) {
    raw.resize(count);
    for (std::size_t i = 0; i < count; ++i) raw[i] = static_cast<png_byte>(image.values[i]);
  } else {
    throw DataError(fmt::format("unsupported gray bit depth {}", image.bit_depth));
  }
  encode(path, image.h, image.w, PNG_COLOR_TYPE_GRAY, image.bit_depth, raw);
}

}  // namespace roadseg
