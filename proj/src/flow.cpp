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

#include "cnnslicer/flow.hpp"

#include <algorithm>
#include <numeric>

#include "cnnslicer/error.hpp"
#include "cnnslicer/parallel.hpp"

namespace cnnslicer {

double CapacityMatrix::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

SortSpec parse_sort_spec(std::string_view text) {
  const auto colon = text.find(':');
  const auto axis = text.substr(0, colon);
  const auto stat = colon == std::string_view::npos ? std::string_view("max") : text.substr(colon + 1);
  SortSpec s;
  if (axis == "rows") s.axis = SortAxis::Rows;
  else if (axis == "cols") s.axis = SortAxis::Cols;
  else if (axis == "both") s.axis = SortAxis::Both;
  else throw Error(ErrorCode::InvalidArgument, "sort axis must be rows, cols or both");
  if (stat == "max") s.stat = SortStat::Max;
  else if (stat == "mean") s.stat = SortStat::Mean;
  else throw Error(ErrorCode::InvalidArgument, "sort statistic must be max or mean");
  return s;
}

JointHistogramCache::Entry JointHistogramCache::find(const std::string& key) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->second;
}

void JointHistogramCache::insert(const std::string& key, Entry value) {
  std::lock_guard lock(mutex_);
  if (const auto it = index_.find(key); it != index_.end()) {
    it->second->second = std::move(value);
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  lru_.emplace_front(key, std::move(value));
  index_[key] = lru_.begin();
  while (lru_.size() > max_entries_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
}

std::size_t JointHistogramCache::size() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

PointCloud channel_points(const ActivationBlock& block, std::size_t slot) {
  const std::size_t n = block.samples();
  const std::size_t per_channel = block.data.dim(2) * block.data.dim(3);
  const std::size_t kept = block.data.dim(1);
  PointCloud points(n, per_channel);
  for (std::size_t s = 0; s < n; ++s) {
    const float* src = block.data.data.data() + (s * kept + slot) * per_channel;
    std::copy(src, src + per_channel, points.values.begin() + static_cast<std::ptrdiff_t>(s * per_channel));
  }
  return points;
}

PointCloud block_points(const ActivationBlock& block) {
  const std::size_t n = block.samples();
  const std::size_t stride = block.sample_stride();
  return PointCloud(n, stride, std::vector<double>(block.data.data.begin(), block.data.data.end()));
}

namespace {

std::vector<BinnedDistances> binned_channels(const ActivationBlock& block, int bins) {
  std::vector<BinnedDistances> out(block.channels.size());
  for (std::size_t c = 0; c < block.channels.size(); ++c) {
    out[c] = bin_distances(pairwise_distances(channel_points(block, c)), bins);
  }
  return out;
}

std::vector<int> identity_order(std::size_t n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

std::vector<int> order_by(const std::vector<double>& stats) {
  auto order = identity_order(stats.size());
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return stats[a] < stats[b]; });
  return order;
}

}  // namespace

CapacityMatrix capacity_matrix(const Run& run, int epoch, int layer_i, int layer_j, const SampleSelector& x,
                               int bins, JointHistogramCache* cache) {
  const auto& m = run.manifest();
  m.require_epoch(epoch);
  for (const int l : {layer_i, layer_j}) {
    const auto& d = m.layer(l);
    if (!d.dumped) throw Error(ErrorCode::LayerNotDumped, "layer " + std::to_string(l) + " is not dumped");
  }
  const auto rows = run.select_rows(x);
  if (rows.size() < 2) throw Error(ErrorCode::TooFewSamples, "capacity needs at least two samples");

  const auto& di = m.layer(layer_i);
  const auto& dj = m.layer(layer_j);
  CapacityMatrix out;
  out.layer_i = layer_i;
  out.layer_j = layer_j;
  out.epoch = epoch;
  out.rows = static_cast<std::size_t>(di.channels);
  out.cols = static_cast<std::size_t>(dj.channels);
  out.row_order = identity_order(out.rows);
  out.col_order = identity_order(out.cols);

  const std::string key = run.fingerprint() + "|" + std::to_string(epoch) + "|" + std::to_string(layer_i) + "|" +
                          std::to_string(layer_j) + "|" + format_selector(x) + "|" + std::to_string(bins);
  JointHistogramCache::Entry joints = cache ? cache->find(key) : nullptr;
  if (!joints) {
    const auto bi = binned_channels(run.load_block(epoch, layer_i, rows, std::nullopt), bins);
    const auto bj = layer_j == layer_i ? std::vector<BinnedDistances>{}
                                       : binned_channels(run.load_block(epoch, layer_j, rows, std::nullopt), bins);
    const auto& right = layer_j == layer_i ? bi : bj;
    auto table = std::make_shared<std::vector<JointHistogram2D>>(out.rows * out.cols);
    parallel_for(out.rows * out.cols, [&](std::size_t begin, std::size_t end) {
      for (std::size_t e = begin; e < end; ++e) {
        (*table)[e] = joint_histogram(bi[e / out.cols], right[e % out.cols]);
      }
    });
    joints = table;
    if (cache) cache->insert(key, joints);
  }

  out.values.resize(out.rows * out.cols);
  parallel_for(out.values.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) out.values[e] = channel_capacity((*joints)[e]).capacity;
  });
  return out;
}

CapacityMatrix sort_matrix(CapacityMatrix m, SortAxis axis, SortStat stat) {
  const auto line_stat = [&](std::size_t count, auto&& value) {
    double acc = stat == SortStat::Max ? value(0) : 0.0;
    for (std::size_t t = 0; t < count; ++t) {
      acc = stat == SortStat::Max ? std::max(acc, value(t)) : acc + value(t);
    }
    return stat == SortStat::Max ? acc : acc / static_cast<double>(count);
  };
  if (axis == SortAxis::Cols || axis == SortAxis::Both) {
    std::vector<double> stats(m.cols);
    for (std::size_t b = 0; b < m.cols; ++b) stats[b] = line_stat(m.rows, [&](std::size_t a) { return m.at(a, b); });
    m.col_order = order_by(stats);
  }
  if (axis == SortAxis::Rows || axis == SortAxis::Both) {
    std::vector<double> stats(m.rows);
    for (std::size_t a = 0; a < m.rows; ++a) stats[a] = line_stat(m.cols, [&](std::size_t b) { return m.at(a, b); });
    m.row_order = order_by(stats);
  }
  return m;
}

double layer_inter_entropy(const Run& run, int epoch, int layer, const SampleSelector& x, int k) {
  const auto rows = run.select_rows(x);
  const auto block = run.load_block(epoch, layer, rows, std::nullopt);
  return inter_sample_entropy(block_points(block), k);
}

std::vector<double> block_intra_entropies(const ActivationBlock& block, int bins) {
  const std::size_t slots = block.channels.size();
  const std::size_t per_map = block.layer.channel_size();
  const std::size_t n = block.samples();
  if (n == 0) throw Error(ErrorCode::EmptySelection, "no samples selected");
  std::vector<double> per_sample(slots * n);
  parallel_for(per_sample.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t slot = i / n, s = i % n;
      const float* map = block.data.data.data() + s * block.sample_stride() + slot * per_map;
      per_sample[i] = intra_sample_entropy(std::span<const float>(map, per_map), bins);
    }
  });
  std::vector<double> means(slots, 0.0);
  for (std::size_t slot = 0; slot < slots; ++slot) {
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) sum += per_sample[slot * n + s];
    means[slot] = sum / static_cast<double>(n);
  }
  return means;
}

double channel_intra_entropy(const Run& run, int epoch, int layer, int channel, const SampleSelector& x, int bins) {
  const auto rows = run.select_rows(x);
  return block_intra_entropies(run.load_block(epoch, layer, rows, channel), bins).front();
}

ChannelEntropySeries channel_entropy_series(const Run& run, int layer, int bins) {
  const auto& m = run.manifest();
  const auto& d = m.layer(layer);
  if (!d.dumped) throw Error(ErrorCode::LayerNotDumped, "layer " + std::to_string(layer) + " is not dumped");

  ChannelEntropySeries s;
  s.layer = layer;
  s.channels = d.channels;
  s.num_classes = m.num_classes;
  s.epochs = m.epochs;
  s.values.assign(static_cast<std::size_t>(s.channels) * s.groups() * s.epochs.size(), 0.0);

  std::vector<std::vector<int>> members(static_cast<std::size_t>(s.groups()));
  for (int c = 0; c < m.num_classes; ++c) members[c] = run.samples().ids_with_label(c);
  members[s.all_group()] = run.select_rows(SampleSelector::all());

  const std::size_t n = run.samples().size();
  const std::size_t per_map = d.channel_size();
  const std::size_t channels = static_cast<std::size_t>(d.channels);
  for (std::size_t ei = 0; ei < s.epochs.size(); ++ei) {
    const auto acts = run.load_activations(s.epochs[ei], layer);
    // entropy[sample][channel]
    std::vector<double> entropy(n * channels);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
          entropy[r * channels + c] = intra_sample_entropy(
              std::span<const float>(acts.data.data() + (r * channels + c) * per_map, per_map), bins);
        }
      }
    });
    for (int g = 0; g < s.groups(); ++g) {
      const auto& ids = members[static_cast<std::size_t>(g)];
      for (std::size_t c = 0; c < channels; ++c) {
        double value = 0.0;
        if (!ids.empty()) {
          double sum = 0.0;
          for (const int r : ids) sum += entropy[static_cast<std::size_t>(r) * channels + c];
          value = sum / static_cast<double>(ids.size());
        }
        s.values[(c * s.groups() + static_cast<std::size_t>(g)) * s.epochs.size() + ei] = value;
      }
    }
  }
  return s;
}

CirclePackTree circle_pack(const ChannelEntropySeries& series, int epoch) {
  const auto it = std::find(series.epochs.begin(), series.epochs.end(), epoch);
  if (it == series.epochs.end()) throw Error(ErrorCode::UnknownEpoch, "no dumped epoch " + std::to_string(epoch));
  const auto ei = static_cast<std::size_t>(it - series.epochs.begin());
  CirclePackTree tree;
  tree.layer = series.layer;
  tree.epoch = epoch;
  for (int label = 0; label < series.num_classes; ++label) {
    CircleClassNode node;
    node.label = label;
    for (int c = 0; c < series.channels; ++c) {
      node.children.push_back({c, series.at(c, label, ei)});
      node.size += node.children.back().size;
    }
    tree.classes.push_back(std::move(node));
  }
  return tree;
}

CirclePackTree circle_pack(const Run& run, int layer, int epoch, int bins) {
  const auto& d = run.manifest().layer(layer);
  if (!d.dumped) throw Error(ErrorCode::LayerNotDumped, "layer " + std::to_string(layer) + " is not dumped");
  run.manifest().require_epoch(epoch);
  // Single-epoch version of channel_entropy_series, same summation order.
  const auto& m = run.manifest();
  const auto acts = run.load_activations(epoch, layer);
  const std::size_t channels = static_cast<std::size_t>(d.channels);
  const std::size_t per_map = d.channel_size();
  CirclePackTree tree;
  tree.layer = layer;
  tree.epoch = epoch;
  for (int label = 0; label < m.num_classes; ++label) {
    const auto ids = run.samples().ids_with_label(label);
    CircleClassNode node;
    node.label = label;
    for (std::size_t c = 0; c < channels; ++c) {
      double value = 0.0;
      if (!ids.empty()) {
        double sum = 0.0;
        for (const int r : ids) {
          sum += intra_sample_entropy(
              std::span<const float>(acts.data.data() + (static_cast<std::size_t>(r) * channels + c) * per_map,
                                     per_map),
              bins);
        }
        value = sum / static_cast<double>(ids.size());
      }
      node.children.push_back({static_cast<int>(c), value});
      node.size += value;
    }
    tree.classes.push_back(std::move(node));
  }
  return tree;
}

}  // namespace cnnslicer
