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

#include "cnnslicer/error.hpp"

namespace cnnslicer {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::BadCsv: return "BadCsv";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::UnknownLayer: return "UnknownLayer";
    case ErrorCode::UnknownEpoch: return "UnknownEpoch";
    case ErrorCode::UnknownSample: return "UnknownSample";
    case ErrorCode::LayerNotDumped: return "LayerNotDumped";
    case ErrorCode::MissingOutputs: return "MissingOutputs";
    case ErrorCode::MissingSwitches: return "MissingSwitches";
    case ErrorCode::InvalidSlice: return "InvalidSlice";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SampleMisalignment: return "SampleMisalignment";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
  }
  return "Unknown";
}

}  // namespace cnnslicer
