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

#include <stdexcept>
#include <string>
#include <string_view>

namespace cnnslicer {

/// Typed failure categories shared by every module. The CLI maps them to exit
/// codes and the HTTP service to status codes; the name is what clients see.
enum class ErrorCode {
  // store / file format
  MissingFile,
  BadHeader,
  UnsupportedDtype,
  UnsupportedOrder,
  ShapeMismatch,
  NonFiniteValue,
  BadManifest,
  BadCsv,
  IoError,
  // query resolution
  UnknownRun,
  UnknownLayer,
  UnknownEpoch,
  UnknownSample,
  LayerNotDumped,
  MissingOutputs,
  MissingSwitches,
  InvalidSlice,
  InvalidArgument,
  // numerics
  DomainError,
  EmptySelection,
  EmptyInput,
  TooFewSamples,
  SampleMisalignment,
  EmptyHistogram,
};

std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace cnnslicer
