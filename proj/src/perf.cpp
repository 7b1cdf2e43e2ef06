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

#include "cnnslicer/perf.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "cnnslicer/error.hpp"
#include "cnnslicer/flow.hpp"

namespace cnnslicer {

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(int actual) const {
  std::uint64_t s = 0;
  for (int p = 0; p < num_classes; ++p) s += at(actual, p);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(int predicted) const {
  std::uint64_t s = 0;
  for (int a = 0; a < num_classes; ++a) s += at(a, predicted);
  return s;
}

int argmax(std::span<const float> row) noexcept {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

ConfusionMatrix tally_confusion(std::span<const int> labels, std::span<const int> predictions, int num_classes,
                                int epoch) {
  if (labels.size() != predictions.size()) {
    throw Error(ErrorCode::SampleMisalignment, "labels and predictions differ in length");
  }
  ConfusionMatrix cm;
  cm.epoch = epoch;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes) {
      throw Error(ErrorCode::InvalidArgument, "class index out of range");
    }
    ++cm.counts[static_cast<std::size_t>(labels[i]) * num_classes + predictions[i]];
  }
  return cm;
}

ConfusionMatrix confusion(const Run& run, int epoch) {
  const auto& m = run.manifest();
  m.require_epoch(epoch);
  if (!std::filesystem::exists(run.outputs_path(epoch))) {
    throw Error(ErrorCode::MissingOutputs, "no outputs dumped at epoch " + std::to_string(epoch));
  }
  const auto outputs = run.load_outputs(epoch);
  const auto c = static_cast<std::size_t>(m.num_classes);
  std::vector<int> labels, predictions;
  for (const auto& row : run.samples().rows) {
    labels.push_back(row.label);
    predictions.push_back(argmax(std::span<const float>(outputs.data.data() + static_cast<std::size_t>(row.sample_id) * c, c)));
  }
  return tally_confusion(labels, predictions, m.num_classes, epoch);
}

std::string_view to_string(ConditionalDirection d) noexcept {
  return d == ConditionalDirection::LabelGivenPred ? "label_given_pred" : "pred_given_label";
}

ConditionalDirection parse_conditional_direction(std::string_view text) {
  if (text == "label_given_pred") return ConditionalDirection::LabelGivenPred;
  if (text == "pred_given_label") return ConditionalDirection::PredGivenLabel;
  throw Error(ErrorCode::InvalidArgument, "direction must be label_given_pred or pred_given_label");
}

std::vector<std::optional<double>> conditional_entropies(const ConfusionMatrix& cm, ConditionalDirection d) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(cm.num_classes));
  std::vector<std::uint64_t> line(static_cast<std::size_t>(cm.num_classes));
  for (int i = 0; i < cm.num_classes; ++i) {
    for (int j = 0; j < cm.num_classes; ++j) {
      line[static_cast<std::size_t>(j)] = d == ConditionalDirection::PredGivenLabel ? cm.at(i, j) : cm.at(j, i);
    }
    if (std::all_of(line.begin(), line.end(), [](std::uint64_t v) { return v == 0; })) continue;
    out[static_cast<std::size_t>(i)] = shannon_entropy(DiscreteDistribution::from_counts(line));
  }
  return out;
}

ConditionalEntropySeries conditional_entropy_series(const Run& run, ConditionalDirection d) {
  const auto& m = run.manifest();
  ConditionalEntropySeries s;
  s.direction = d;
  s.num_classes = m.num_classes;
  for (const int t : m.epochs) {
    if (std::filesystem::exists(run.outputs_path(t))) s.epochs.push_back(t);
  }
  if (s.epochs.empty()) throw Error(ErrorCode::MissingOutputs, "run has no dumped outputs");
  s.values.resize(static_cast<std::size_t>(m.num_classes) * s.epochs.size());
  for (std::size_t ei = 0; ei < s.epochs.size(); ++ei) {
    const auto per_class = conditional_entropies(confusion(run, s.epochs[ei]), d);
    for (int i = 0; i < m.num_classes; ++i) {
      s.values[static_cast<std::size_t>(i) * s.epochs.size() + ei] = per_class[static_cast<std::size_t>(i)];
    }
  }
  return s;
}

std::vector<DiversityPoint> input_diversity_experiment(std::span<const DiversitySet> sets, int k) {
  std::vector<DiversityPoint> out;
  out.reserve(sets.size());
  for (const auto& set : sets) out.push_back({set.per_class_size, inter_sample_entropy(set.points, k)});
  std::stable_sort(out.begin(), out.end(),
                   [](const DiversityPoint& a, const DiversityPoint& b) { return a.per_class_size < b.per_class_size; });
  return out;
}

std::vector<DiversityPoint> input_diversity_experiment(
    std::span<const std::pair<int, std::shared_ptr<const Run>>> runs, int k) {
  std::vector<DiversityPoint> out;
  out.reserve(runs.size());
  for (const auto& [size, run] : runs) {
    out.push_back({size, layer_inter_entropy(*run, 0, 0, SampleSelector::all(), k)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DiversityPoint& a, const DiversityPoint& b) { return a.per_class_size < b.per_class_size; });
  return out;
}

std::vector<LossRow> loss_curve(const Run& run) { return run.loss_curve(); }

}  // namespace cnnslicer
