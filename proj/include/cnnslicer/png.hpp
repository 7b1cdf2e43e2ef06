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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cnnslicer/npy.hpp"

namespace cnnslicer {

inline constexpr const char* kNormalizationNote = "per-image min-max to 0..255";

/// 8-bit image after per-image min-max scaling. [1,H,W] -> gray, [3,H,W] -> RGB.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

/// Throws ShapeMismatch for anything but 1 or 3 channels. A constant image
/// maps to all zeros.
Image8 normalize_to_image(const Tensor& chw);

/// PNG bytes with a tEXt "Normalization" chunk recording the display scaling.
std::vector<std::uint8_t> encode_png(const Image8& image);
void write_png(const std::filesystem::path& path, const Image8& image);

/// Decodes 8-bit gray/RGB PNGs (used by tests and tooling).
Image8 decode_png(const std::vector<std::uint8_t>& bytes, std::string* normalization = nullptr);

}  // namespace cnnslicer
