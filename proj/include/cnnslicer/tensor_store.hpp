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

// Read-only store over one training run's dump directory:
//
//   manifest.json
//   samples.csv                       sample_id,label,split
//   loss.csv                          epoch,train_loss,test_accuracy
//   acts/epoch_{t}/layer_{l}.npy      [N,C,H,W] or [N,D]
//   outputs/epoch_{t}.npy             [N,num_classes] softmax rows
//   weights/epoch_{t}/layer_{l}.{kernel,bias}.npy
//
// The data is addressed as a hypercube over (sample, layer, channel, epoch).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnnslicer/npy.hpp"

namespace cnnslicer {

enum class LayerKind { Input, Conv, Relu, MaxPool, Flatten, Linear, Output };

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view text);

struct LayerDescriptor {
  int index = 0;
  std::string name;
  LayerKind kind = LayerKind::Input;
  int channels = 1;
  std::optional<int> height;  // absent for vector layers
  std::optional<int> width;
  std::optional<int> units;   // vector layers only: feature count D
  bool dumped = false;

  bool is_vector() const noexcept { return !height.has_value(); }
  /// Vector layers are viewed as C=1, H=1, W=D.
  int map_height() const noexcept { return is_vector() ? 1 : *height; }
  int map_width() const noexcept { return is_vector() ? units.value_or(0) : *width; }
  std::size_t channel_size() const noexcept {
    return static_cast<std::size_t>(map_height()) * static_cast<std::size_t>(map_width());
  }
  std::size_t feature_count() const noexcept { return channel_size() * static_cast<std::size_t>(channels); }
};

struct RunManifest {
  std::string run_id;
  std::string dataset;
  int num_classes = 0;
  int probe_count = 0;
  std::vector<int> epochs;
  std::vector<LayerDescriptor> layers;
  std::filesystem::path root_path;

  const LayerDescriptor& layer(int index) const;  // throws UnknownLayer
  bool has_epoch(int epoch) const noexcept;
  void require_epoch(int epoch) const;            // throws UnknownEpoch
  int last_layer() const noexcept { return static_cast<int>(layers.size()) - 1; }
};

/// Checks manifest-level invariants (epochs, layer chain, shape rules).
/// Throws BadManifest.
void validate_manifest(const RunManifest& manifest);

enum class Split { Train, Test };

struct SampleRow {
  int sample_id = 0;
  int label = 0;
  Split split = Split::Test;
};

struct SampleTable {
  std::vector<SampleRow> rows;  // rows[i].sample_id == i

  std::size_t size() const noexcept { return rows.size(); }
  std::vector<int> ids_with_label(int label) const;
  std::vector<int> class_sizes(int num_classes) const;
};

SampleTable parse_samples_csv(const std::filesystem::path& path, int num_classes);

struct LossRow {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

/// Parses loss.csv; rows must be strictly ascending by epoch. Throws BadCsv.
std::vector<LossRow> parse_loss_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Slicing

/// Which samples a query covers: everything, one class, or explicit ids.
struct SampleSelector {
  enum class Kind { All, Label, Ids };
  Kind kind = Kind::All;
  int label = 0;
  std::vector<int> ids;

  static SampleSelector all() { return {}; }
  static SampleSelector of_label(int label) { return {Kind::Label, label, {}}; }
  static SampleSelector of_ids(std::vector<int> ids) { return {Kind::Ids, 0, std::move(ids)}; }

  friend bool operator==(const SampleSelector&, const SampleSelector&) = default;
};

/// dCNN(x, l, c, t); std::nullopt stands for "all values" on that axis.
struct SliceSpec {
  SampleSelector x;
  std::optional<int> layer;
  std::optional<int> channel;
  std::optional<int> epoch;

  friend bool operator==(const SliceSpec&, const SliceSpec&) = default;
};

/// Parses `x=<all|label:I|ids:I,...>;l=<int|*>;c=<int|*>;t=<int|*>`.
/// Clauses may appear in any order; omitted clauses mean "all".
/// Throws InvalidSlice.
SliceSpec parse_slice_expression(std::string_view text);
/// Canonical form, always with all four clauses in x;l;c;t order.
std::string format_slice_expression(const SliceSpec& spec);
std::string format_selector(const SampleSelector& x);

struct ActivationBlock {
  LayerDescriptor layer;
  int epoch = 0;
  std::vector<int> channels;    // channel indices present along axis 1
  std::vector<int> sample_ids;  // aligned with axis 0
  Tensor data;                  // [N, C', H, W]; vector layers [N, 1, 1, D]

  std::size_t samples() const noexcept { return sample_ids.size(); }
  std::size_t sample_stride() const noexcept { return data.size() / std::max<std::size_t>(1, samples()); }
};

class Run;

/// Lazily materializes the blocks of a slice in ascending (layer, epoch) order.
/// With l=* only dumped layers are visited, and a fixed channel skips layers
/// that have fewer channels.
class SliceCursor {
 public:
  SliceCursor(std::shared_ptr<const Run> run, SliceSpec spec);

  std::size_t block_count() const noexcept { return keys_.size(); }
  std::optional<ActivationBlock> next();

 private:
  std::shared_ptr<const Run> run_;
  SliceSpec spec_;
  std::vector<int> rows_;
  std::vector<std::pair<int, int>> keys_;  // (layer, epoch)
  std::size_t pos_ = 0;
};

/// Opened, validated run. Immutable; safe to share across threads.
class Run : public std::enable_shared_from_this<Run> {
 public:
  /// Opens a dump directory. With `full_validation` every tensor file is read
  /// and checked for shape and finiteness; otherwise only headers are checked.
  static std::shared_ptr<const Run> open(const std::filesystem::path& dir, bool full_validation = false);

  const RunManifest& manifest() const noexcept { return manifest_; }
  const SampleTable& samples() const noexcept { return samples_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  std::filesystem::path activation_path(int epoch, int layer) const;
  std::filesystem::path outputs_path(int epoch) const;
  std::filesystem::path weight_path(int epoch, int layer, std::string_view part) const;

  /// Full [N, ...] activation tensor of a dumped layer, reshaped to rank 4.
  Tensor load_activations(int epoch, int layer) const;
  Tensor load_outputs(int epoch) const;
  std::vector<LossRow> loss_curve() const;

  /// Resolves a selector to row indices (== sample ids). Throws InvalidSlice,
  /// UnknownSample, EmptySelection.
  std::vector<int> select_rows(const SampleSelector& x) const;
  /// Checks a slice against the manifest. Throws InvalidSlice, UnknownLayer,
  /// UnknownEpoch, LayerNotDumped, EmptySelection.
  void validate_slice(const SliceSpec& spec) const;

  SliceCursor slice(const SliceSpec& spec) const;
  std::vector<ActivationBlock> slice_all(const SliceSpec& spec) const;

  /// One (layer, epoch) block restricted to `rows` and optional channel.
  ActivationBlock load_block(int epoch, int layer, const std::vector<int>& rows,
                             std::optional<int> channel) const;

 private:
  Run() = default;
  RunManifest manifest_;
  SampleTable samples_;
  std::string fingerprint_;
};

/// Validates a dump directory end to end and returns its manifest.
/// Throws MissingFile, ShapeMismatch, NonFiniteValue, BadHeader, BadManifest,
/// BadCsv.
RunManifest ingest(const std::filesystem::path& dump_dir);

/// Run registrations under a data root (`registry.json`: run_id -> path).
/// Ingest is exclusive (file rename); lookups are concurrent.
class Registry {
 public:
  explicit Registry(std::filesystem::path data_root);

  const std::filesystem::path& data_root() const noexcept { return root_; }

  /// ingest() + record. Re-registering an identical directory is a no-op.
  RunManifest register_run(const std::filesystem::path& dump_dir);

  std::vector<std::string> run_ids() const;
  /// Throws UnknownRun. Opened runs are cached for the registry's lifetime.
  std::shared_ptr<const Run> open(const std::string& run_id) const;

 private:
  std::map<std::string, std::filesystem::path> load_index() const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const Run>> open_;
};

/// 64-bit FNV-1a, hex encoded. Used for fingerprints and cache keys.
std::string fnv1a_hex(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace cnnslicer
