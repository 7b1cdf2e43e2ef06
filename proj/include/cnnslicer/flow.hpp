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

// Layer- and channel-level analyses built on the entropy primitives.

#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnnslicer/entropy.hpp"
#include "cnnslicer/tensor_store.hpp"

namespace cnnslicer {

/// Channel capacity between every channel of layer_i (rows) and every
/// channel of layer_j (columns) at one epoch. Sorting only permutes the
/// display orders; `values` keeps the natural channel order.
struct CapacityMatrix {
  int layer_i = 0;
  int layer_j = 0;
  int epoch = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // [rows, cols]
  std::vector<int> row_order;
  std::vector<int> col_order;

  double at(std::size_t a, std::size_t b) const { return values[a * cols + b]; }
  double mean() const;
};

enum class SortAxis { Rows, Cols, Both };
enum class SortStat { Max, Mean };

struct SortSpec {
  SortAxis axis = SortAxis::Cols;
  SortStat stat = SortStat::Max;
};

/// Parses "rows:max", "cols:mean", "both:max", ... Throws InvalidArgument.
SortSpec parse_sort_spec(std::string_view text);

/// Joint histograms for every channel pair of one capacity query, memoized by
/// (run fingerprint, epoch, layers, selector, bins). Bounded by entry count.
class JointHistogramCache {
 public:
  using Entry = std::shared_ptr<const std::vector<JointHistogram2D>>;

  explicit JointHistogramCache(std::size_t max_entries = 16) : max_entries_(max_entries) {}

  Entry find(const std::string& key);
  void insert(const std::string& key, Entry value);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::size_t max_entries_;
  std::list<std::pair<std::string, Entry>> lru_;
  std::unordered_map<std::string, std::list<std::pair<std::string, Entry>>::iterator> index_;
};

/// Throws LayerNotDumped, UnknownEpoch, TooFewSamples.
CapacityMatrix capacity_matrix(const Run& run, int epoch, int layer_i, int layer_j,
                               const SampleSelector& x = SampleSelector::all(), int bins = kDefaultBins,
                               JointHistogramCache* cache = nullptr);

/// Reorders rows and/or columns by ascending per-line statistic, ties kept in
/// original index order. Orders are always recomputed from the values, so
/// sorting is idempotent.
CapacityMatrix sort_matrix(CapacityMatrix m, SortAxis axis, SortStat stat);

/// Inter-sample entropy of a layer's flattened per-sample outputs.
double layer_inter_entropy(const Run& run, int epoch, int layer, const SampleSelector& x = SampleSelector::all(),
                           int k = kDefaultNeighbors);

/// Mean intra-sample entropy of every channel present in the block, in slot order.
std::vector<double> block_intra_entropies(const ActivationBlock& block, int bins = kDefaultBins);

/// Mean intra-sample entropy of one channel's feature maps over the selection.
double channel_intra_entropy(const Run& run, int epoch, int layer, int channel,
                             const SampleSelector& x = SampleSelector::all(), int bins = kDefaultBins);

/// Mean intra-sample entropy per (channel, class, epoch). Class index
/// num_classes is the "all samples" group.
struct ChannelEntropySeries {
  int layer = 0;
  int channels = 0;
  int num_classes = 0;
  std::vector<int> epochs;
  std::vector<double> values;  // [channel][class + all][epoch]

  int groups() const noexcept { return num_classes + 1; }
  int all_group() const noexcept { return num_classes; }
  double at(int channel, int group, std::size_t epoch_index) const {
    return values[(static_cast<std::size_t>(channel) * groups() + group) * epochs.size() + epoch_index];
  }
};

ChannelEntropySeries channel_entropy_series(const Run& run, int layer, int bins = kDefaultBins);

struct CircleChannelNode {
  int channel = 0;
  double size = 0.0;
};

struct CircleClassNode {
  int label = 0;
  double size = 0.0;  // sum of children
  std::vector<CircleChannelNode> children;
};

struct CirclePackTree {
  int layer = 0;
  int epoch = 0;
  std::vector<CircleClassNode> classes;
};

CirclePackTree circle_pack(const ChannelEntropySeries& series, int epoch);
CirclePackTree circle_pack(const Run& run, int layer, int epoch, int bins = kDefaultBins);

/// One channel of a block as an N x (H*W) point cloud.
PointCloud channel_points(const ActivationBlock& block, std::size_t channel_slot);
/// Every channel of a block flattened, N x (C*H*W).
PointCloud block_points(const ActivationBlock& block);

}  // namespace cnnslicer
