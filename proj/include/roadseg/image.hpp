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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace roadseg {

// Interleaved 8-bit RGB image.
struct ImageBuffer {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> rgb;  // h * w * 3

  ImageBuffer() = default;
  ImageBuffer(int height, int width);
  std::uint8_t* pixel(int y, int x) { return rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3; }
  const std::uint8_t* pixel(int y, int x) const {
    return rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
  bool operator==(const ImageBuffer&) const = default;
};

// Single-channel image, 8 or 16 bits per sample (stored widened to 16).
struct GrayImage {
  int h = 0;
  int w = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> values;
  bool operator==(const GrayImage&) const = default;
};

// PNG decoding accepts any colour type; palette, gray and alpha inputs are
// converted. Throws DataError on unreadable files.
ImageBuffer read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);

void write_png_rgb(const std::filesystem::path& path, const ImageBuffer& image);
// Writes 8- or 16-bit grayscale according to image.bit_depth.
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);

}  // namespace roadseg
