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

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cnnslicer {

/// Dense row-major float32 array.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);
  Tensor(std::vector<std::size_t> dims, std::vector<float> values);

  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t size() const noexcept { return data.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::size_t> shape) noexcept;

/// Parsed NPY v1.0 header. Only little-endian float32, C order is accepted.
struct NpyHeader {
  std::vector<std::size_t> shape;
  std::size_t data_offset = 0;
};

/// Parses the header at the start of `bytes`. Throws BadHeader,
/// UnsupportedDtype or UnsupportedOrder.
NpyHeader parse_npy_header(std::span<const std::byte> bytes);

/// Decodes a complete in-memory NPY file.
Tensor decode_npy(std::span<const std::byte> bytes);
std::vector<std::byte> encode_npy(const Tensor& tensor);

/// Reads only the header; cheap enough to index a whole dump.
NpyHeader read_npy_header(const std::filesystem::path& path);
Tensor read_tensor_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);

}  // namespace cnnslicer
