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
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cnnslicer/entropy.hpp"
#include "cnnslicer/tensor_store.hpp"

namespace cnnslicer {

/// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
  int epoch = 0;
  int num_classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(int actual, int predicted) const {
    return counts[static_cast<std::size_t>(actual) * num_classes + predicted];
  }
  std::uint64_t total() const noexcept;
  std::uint64_t row_sum(int actual) const;
  std::uint64_t column_sum(int predicted) const;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const float> row) noexcept;

ConfusionMatrix tally_confusion(std::span<const int> labels, std::span<const int> predictions, int num_classes,
                                int epoch = 0);

/// Throws MissingOutputs when the epoch has no dumped outputs.
ConfusionMatrix confusion(const Run& run, int epoch);

enum class ConditionalDirection { LabelGivenPred, PredGivenLabel };

std::string_view to_string(ConditionalDirection d) noexcept;
ConditionalDirection parse_conditional_direction(std::string_view text);

/// Per-class conditional entropy of one confusion matrix. PredGivenLabel uses
/// row i, LabelGivenPred column i; an empty column yields std::nullopt.
std::vector<std::optional<double>> conditional_entropies(const ConfusionMatrix& cm, ConditionalDirection d);

struct ConditionalEntropySeries {
  ConditionalDirection direction = ConditionalDirection::PredGivenLabel;
  int num_classes = 0;
  std::vector<int> epochs;
  std::vector<std::optional<double>> values;  // [class][epoch]; nullopt = undefined

  const std::optional<double>& at(int label, std::size_t epoch_index) const {
    return values[static_cast<std::size_t>(label) * epochs.size() + epoch_index];
  }
};

ConditionalEntropySeries conditional_entropy_series(const Run& run, ConditionalDirection d);

struct DiversitySet {
  int per_class_size = 0;
  PointCloud points;  // layer-0 samples, one row each
};

struct DiversityPoint {
  int per_class_size = 0;
  double bits = 0.0;
};

/// Inter-sample entropy of each set, ordered by per-class size.
std::vector<DiversityPoint> input_diversity_experiment(std::span<const DiversitySet> sets,
                                                       int k = kDefaultNeighbors);

/// Same, reading layer 0 at epoch 0 of each run with the full probe set.
std::vector<DiversityPoint> input_diversity_experiment(
    std::span<const std::pair<int, std::shared_ptr<const Run>>> runs, int k = kDefaultNeighbors);

std::vector<LossRow> loss_curve(const Run& run);

}  // namespace cnnslicer
