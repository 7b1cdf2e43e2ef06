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

#include "cnnslicer/npy.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string_view>

#include "cnnslicer/error.hpp"

namespace cnnslicer {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read in place; big-endian hosts are unsupported");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kPreamble = 10;  // magic(6) + version(2) + header_len(2)

[[noreturn]] void bad_header(const std::string& what) {
  throw Error(ErrorCode::BadHeader, "npy: " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Returns the raw text of the value stored under `key` in the header dict.
std::string_view dict_value(std::string_view dict, std::string_view key) {
  for (const char quote : {'\'', '"'}) {
    std::string needle;
    needle += quote;
    needle += key;
    needle += quote;
    const auto pos = dict.find(needle);
    if (pos == std::string_view::npos) continue;
    auto rest = dict.substr(pos + needle.size());
    rest = trim(rest);
    if (rest.empty() || rest.front() != ':') bad_header("malformed entry for " + std::string(key));
    rest = trim(rest.substr(1));
    std::size_t end = 0;
    if (!rest.empty() && rest.front() == '(') {
      end = rest.find(')');
      if (end == std::string_view::npos) bad_header("unterminated shape tuple");
      return rest.substr(0, end + 1);
    }
    if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
      end = rest.find(rest.front(), 1);
      if (end == std::string_view::npos) bad_header("unterminated string");
      return rest.substr(0, end + 1);
    }
    end = rest.find_first_of(",}");
    return trim(rest.substr(0, end));
  }
  bad_header("missing key " + std::string(key));
}

std::vector<std::size_t> parse_shape(std::string_view tuple) {
  if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')') bad_header("shape is not a tuple");
  tuple = tuple.substr(1, tuple.size() - 2);
  std::vector<std::size_t> shape;
  while (true) {
    tuple = trim(tuple);
    if (tuple.empty()) break;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(tuple.data(), tuple.data() + tuple.size(), value);
    if (ec != std::errc()) bad_header("non-integer shape entry");
    shape.push_back(value);
    tuple.remove_prefix(static_cast<std::size_t>(ptr - tuple.data()));
    tuple = trim(tuple);
    if (tuple.empty()) break;
    if (tuple.front() != ',') bad_header("malformed shape tuple");
    tuple.remove_prefix(1);
  }
  return shape;
}

std::vector<std::byte> slurp(const std::filesystem::path& path, std::size_t limit = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::size_t>(in.tellg());
  if (limit != 0) size = std::min(size, limit);
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::IoError, "short read on " + path.string());
  return bytes;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims)
    : shape(std::move(dims)), data(element_count(shape), 0.0f) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> values)
    : shape(std::move(dims)), data(std::move(values)) {
  if (data.size() != element_count(shape)) {
    throw Error(ErrorCode::ShapeMismatch, "tensor data does not match its shape");
  }
}

std::size_t element_count(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

NpyHeader parse_npy_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreamble) bad_header("file shorter than preamble");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) bad_header("bad magic");
  const auto major = static_cast<unsigned>(bytes[6]);
  const auto minor = static_cast<unsigned>(bytes[7]);
  if (major != 1 || minor != 0) {
    bad_header("unsupported version " + std::to_string(major) + "." + std::to_string(minor));
  }
  const std::size_t header_len =
      static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreamble + header_len) bad_header("truncated header");
  const std::string_view dict(reinterpret_cast<const char*>(bytes.data()) + kPreamble, header_len);
  const auto body = trim(dict);
  if (body.empty() || body.front() != '{' || body.back() != '}') bad_header("header is not a dict");

  const auto descr = dict_value(body, "descr");
  if (descr != "'<f4'" && descr != "\"<f4\"") {
    throw Error(ErrorCode::UnsupportedDtype, "npy: dtype " + std::string(descr) + " is not <f4");
  }
  const auto fortran = dict_value(body, "fortran_order");
  if (fortran == "True") throw Error(ErrorCode::UnsupportedOrder, "npy: fortran_order is set");
  if (fortran != "False") bad_header("fortran_order is not a bool");

  NpyHeader header;
  header.shape = parse_shape(dict_value(body, "shape"));
  header.data_offset = kPreamble + header_len;
  return header;
}

Tensor decode_npy(std::span<const std::byte> bytes) {
  auto header = parse_npy_header(bytes);
  const std::size_t count = element_count(header.shape);
  const std::size_t payload = bytes.size() - header.data_offset;
  if (payload != count * sizeof(float)) {
    bad_header("payload is " + std::to_string(payload) + " bytes, shape needs " +
               std::to_string(count * sizeof(float)));
  }
  Tensor out;
  out.shape = std::move(header.shape);
  out.data.resize(count);
  std::memcpy(out.data.data(), bytes.data() + header.data_offset, payload);
  return out;
}

std::vector<std::byte> encode_npy(const Tensor& tensor) {
  std::string shape = "(";
  for (std::size_t i = 0; i < tensor.shape.size(); ++i) {
    if (i > 0) shape += ", ";
    shape += std::to_string(tensor.shape[i]);
  }
  if (tensor.shape.size() == 1) shape += ',';  // python 1-tuple
  shape += ')';
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape + ", }";
  // Pad so the payload starts on a 64-byte boundary, newline-terminated.
  const std::size_t unpadded = kPreamble + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';

  std::vector<std::byte> out(kPreamble + dict.size() + tensor.data.size() * sizeof(float));
  std::memcpy(out.data(), kMagic.data(), kMagic.size());
  out[6] = std::byte{1};
  out[7] = std::byte{0};
  out[8] = static_cast<std::byte>(dict.size() & 0xFF);
  out[9] = static_cast<std::byte>((dict.size() >> 8) & 0xFF);
  std::memcpy(out.data() + kPreamble, dict.data(), dict.size());
  if (!tensor.data.empty()) {
    std::memcpy(out.data() + kPreamble + dict.size(), tensor.data.data(),
                tensor.data.size() * sizeof(float));
  }
  return out;
}

NpyHeader read_npy_header(const std::filesystem::path& path) {
  // 64 KiB covers any v1.0 header (header_len is a uint16).
  const auto bytes = slurp(path, kPreamble + 65536);
  return parse_npy_header(bytes);
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  return decode_npy(slurp(path));
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_npy(tensor);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cnnslicer
