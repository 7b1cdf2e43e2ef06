// Copyright 2026 The cnnslicer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cnnslicer/png.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cnnslicer/error.hpp"

namespace cnnslicer {

namespace {

void on_warning(png_structp, png_const_charp) {}
[[noreturn]] void on_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

}  // namespace

Image8 normalize_to_image(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3)) {
    throw Error(ErrorCode::ShapeMismatch, "images must be [1,H,W] or [3,H,W]");
  }
  Image8 img;
  img.channels = static_cast<int>(chw.dim(0));
  img.height = static_cast<int>(chw.dim(1));
  img.width = static_cast<int>(chw.dim(2));
  img.pixels.resize(chw.size());
  if (chw.size() == 0) return img;
  const auto [mn, mx] = std::minmax_element(chw.data.begin(), chw.data.end());
  const double lo = *mn, range = static_cast<double>(*mx) - lo;
  const std::size_t plane = chw.dim(1) * chw.dim(2);
  for (std::size_t c = 0; c < chw.dim(0); ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = range > 0.0 ? (chw.data[c * plane + p] - lo) / range : 0.0;
      img.pixels[p * chw.dim(0) + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image8& image) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  if (!png) throw Error(ErrorCode::IoError, "png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  // libpng reports errors by longjmp to the setjmp below; every local it may
  // skip over is constructed before that point.
  std::string note = kNormalizationNote;
  char key[] = "Normalization";
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "png: encoding failed");
  }
  {
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
          auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
          sink->insert(sink->end(), data, data + len);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_text text{};
    text.compression = PNG_TEXT_COMPRESSION_NONE;
    text.key = key;
    text.text = note.data();
    png_set_text(png, info, &text, 1);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * stride));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  const auto bytes = encode_png(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes, std::string* normalization) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  if (!png) throw Error(ErrorCode::IoError, "png: cannot create reader");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  Image8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "png: decoding failed");
  }
  {
    png_set_read_fn(png, &cursor, [](png_structp p, png_bytep data, png_size_t len) {
      auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
      if (c->pos + len > c->bytes->size()) png_error(p, "truncated stream");
      std::memcpy(data, c->bytes->data() + c->pos, len);
      c->pos += len;
    });
    png_read_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)) {
      png_error(png, "only 8-bit gray or RGB images are supported");
    }
    img.channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * stride, nullptr);
    png_read_end(png, info);
    if (normalization) {
      png_textp texts = nullptr;
      int count = 0;
      png_get_text(png, info, &texts, &count);
      for (int i = 0; i < count; ++i) {
        if (std::strcmp(texts[i].key, "Normalization") == 0) *normalization = texts[i].text;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace cnnslicer
