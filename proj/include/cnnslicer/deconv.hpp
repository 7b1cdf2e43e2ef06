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

// Forward inference of a sequential CNN from dumped weights, and deconvnet
// projection of a single channel back to input space.

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cnnslicer/npy.hpp"
#include "cnnslicer/tensor_store.hpp"

namespace cnnslicer {

struct LayerWeights {
  Tensor kernel;  // conv [C_out, C_in, kh, kw]; linear [D_out, D_in]
  Tensor bias;    // [C_out] / [D_out]
};

struct NetworkWeights {
  int epoch = 0;
  std::vector<LayerDescriptor> layers;
  std::map<int, LayerWeights> params;  // keyed by layer index

  /// Reads the conv and linear parameters dumped for `epoch`.
  static NetworkWeights load(const Run& run, int epoch);
  /// Checks parameter shapes against the layer chain. Throws ShapeMismatch.
  void validate() const;
};

/// Argmax positions of one max-pool layer: for every output cell the offset
/// inside its 2x2 window, dy * 2 + dx.
struct PoolSwitches {
  int channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_height = 0;
  int out_width = 0;
  std::vector<std::uint8_t> window_pos;  // [C, H_out, W_out]

  /// Flat index y * in_width + x of the recorded input cell.
  std::size_t input_position(int c, int oy, int ox) const;
};

struct SwitchRecord {
  std::map<int, PoolSwitches> pools;  // keyed by maxpool layer index
};

struct ForwardResult {
  /// Per layer index: [C, H, W]; vector layers [1, 1, D].
  std::vector<Tensor> activations;
  SwitchRecord switches;
};

/// Runs one sample through the network. Conv is cross-correlation, stride 1,
/// zero padding (k-1)/2; max-pool is 2x2 stride 2 with ties going to the first
/// cell in row-major window order. Throws ShapeMismatch.
ForwardResult forward(const NetworkWeights& weights, const Tensor& input);

/// Projects `featmap`, the activation of `channel` at `layer`, back to input
/// space with every other channel zero. Walking down: relu rectifies, max-pool
/// unpools through the recorded switches, conv applies the transposed kernel
/// (no bias), flatten reshapes, linear multiplies by the transposed weights.
/// Throws ShapeMismatch, MissingSwitches, InvalidArgument.
Tensor deconv_project(const NetworkWeights& weights, const SwitchRecord& switches, int layer, int channel,
                      const Tensor& featmap);

/// Recomputes the forward pass for one probe sample from the dumped input and
/// weights of `epoch`, then projects `channel` of `layer`. Returns the input
/// space image [C, H, W].
Tensor project_sample(const Run& run, int epoch, int layer, int channel, int sample);

/// The dumped activation of one channel for one sample, [1, H, W]
/// (vector layers [1, 1, D]).
Tensor feature_map(const Run& run, int epoch, int layer, int channel, int sample);

// Single-step kernels, exposed for tests.
Tensor max_pool_2x2(const Tensor& input, PoolSwitches* switches);
Tensor unpool_2x2(const Tensor& pooled, const PoolSwitches& switches);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias);
Tensor conv2d_transpose(const Tensor& grad, const Tensor& kernel);

}  // namespace cnnslicer
