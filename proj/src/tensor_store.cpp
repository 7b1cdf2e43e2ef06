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

#include "cnnslicer/tensor_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cnnslicer/error.hpp"
#include "json.hpp"

namespace cnnslicer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_manifest(const std::string& what) {
  throw Error(ErrorCode::BadManifest, "manifest: " + what);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "missing " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = strip(s);
  if (s.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// CSV body lines after a required header; blank trailing lines dropped.
std::vector<std::vector<std::string_view>> read_csv(const std::string& text, std::string_view header,
                                                    const fs::path& path) {
  auto lines = split(text, '\n');
  while (!lines.empty() && strip(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::BadCsv, path.string() + ": empty file");
  if (strip(lines.front()) != header) {
    throw Error(ErrorCode::BadCsv, path.string() + ": expected header '" + std::string(header) + "'");
  }
  std::vector<std::vector<std::string_view>> rows;
  const std::size_t width = split(header, ',').size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split(strip(lines[i]), ',');
    if (cells.size() != width) {
      throw Error(ErrorCode::BadCsv, path.string() + ": line " + std::to_string(i + 1) + " has " +
                                         std::to_string(cells.size()) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

int json_int(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) bad_manifest(std::string("missing integer ") + key);
  return j.at(key).get<int>();
}

std::optional<int> json_opt_int(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number_integer()) bad_manifest(std::string(key) + " is not an integer");
  return j.at(key).get<int>();
}

std::string json_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) bad_manifest(std::string("missing string ") + key);
  return j.at(key).get<std::string>();
}

RunManifest parse_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    bad_manifest(e.what());
  }
  RunManifest m;
  m.run_id = json_string(j, "run_id");
  m.dataset = json_string(j, "dataset");
  m.num_classes = json_int(j, "num_classes");
  m.probe_count = json_int(j, "probe_count");
  if (!j.contains("epochs") || !j["epochs"].is_array()) bad_manifest("epochs must be an array");
  for (const auto& e : j["epochs"]) {
    if (!e.is_number_integer()) bad_manifest("epochs must be integers");
    m.epochs.push_back(e.get<int>());
  }
  if (!j.contains("layers") || !j["layers"].is_array()) bad_manifest("layers must be an array");
  for (const auto& l : j["layers"]) {
    LayerDescriptor d;
    d.index = json_int(l, "index");
    d.name = json_string(l, "name");
    try {
      d.kind = parse_layer_kind(json_string(l, "kind"));
    } catch (const Error& e) {
      bad_manifest(e.what());
    }
    d.channels = json_int(l, "channels");
    d.height = json_opt_int(l, "height");
    d.width = json_opt_int(l, "width");
    d.units = json_opt_int(l, "units");
    if (!l.contains("dumped") || !l["dumped"].is_boolean()) bad_manifest("layer dumped flag missing");
    d.dumped = l["dumped"].get<bool>();
    m.layers.push_back(std::move(d));
  }
  m.root_path = fs::absolute(dir).lexically_normal();
  validate_manifest(m);
  return m;
}

std::vector<std::size_t> expected_activation_shape(const LayerDescriptor& d, int n) {
  if (d.is_vector()) return {static_cast<std::size_t>(n), static_cast<std::size_t>(*d.units)};
  return {static_cast<std::size_t>(n), static_cast<std::size_t>(d.channels),
          static_cast<std::size_t>(*d.height), static_cast<std::size_t>(*d.width)};
}

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

void require_shape(const fs::path& path, const std::vector<std::size_t>& actual,
                   const std::vector<std::size_t>& expected) {
  if (actual != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                path.string() + " has shape " + shape_text(actual) + ", manifest implies " + shape_text(expected));
  }
}

void require_finite(const fs::path& path, const Tensor& t) {
  for (const float v : t.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, path.string() + " holds a non-finite value");
  }
}

NpyHeader header_of(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "missing " + path.string());
  return read_npy_header(path);
}

struct WeightShapes {
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> bias;
};

std::optional<WeightShapes> expected_weight_shapes(const RunManifest& m, const LayerDescriptor& d,
                                                   const std::vector<std::size_t>& kernel_actual) {
  const auto& prev = m.layers[static_cast<std::size_t>(d.index - 1)];
  if (d.kind == LayerKind::Conv) {
    // Kernel extent is free; channel counts are fixed by the layer chain.
    std::size_t kh = kernel_actual.size() == 4 ? kernel_actual[2] : 0;
    std::size_t kw = kernel_actual.size() == 4 ? kernel_actual[3] : 0;
    return WeightShapes{{static_cast<std::size_t>(d.channels), static_cast<std::size_t>(prev.channels), kh, kw},
                        {static_cast<std::size_t>(d.channels)}};
  }
  if (d.kind == LayerKind::Linear) {
    return WeightShapes{{static_cast<std::size_t>(*d.units), prev.feature_count()},
                        {static_cast<std::size_t>(*d.units)}};
  }
  return std::nullopt;
}

// Files whose sizes join the fingerprint; contents of the small text files too.
std::string compute_fingerprint(const RunManifest& m) {
  std::string material;
  for (const char* name : {"manifest.json", "samples.csv", "loss.csv"}) {
    material += read_text(m.root_path / name);
    material += '\0';
  }
  std::error_code ec;
  for (const auto& entry : fs::recursive_directory_iterator(m.root_path, ec)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext != ".npy") continue;
    material += fs::relative(entry.path(), m.root_path).generic_string();
    material += ':' + std::to_string(entry.file_size()) + ';';
  }
  return fnv1a_hex(material);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Linear: return "linear";
    case LayerKind::Output: return "output";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (const auto kind : {LayerKind::Input, LayerKind::Conv, LayerKind::Relu, LayerKind::MaxPool,
                          LayerKind::Flatten, LayerKind::Linear, LayerKind::Output}) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::BadManifest, "unknown layer kind '" + std::string(text) + "'");
}

const LayerDescriptor& RunManifest::layer(int index) const {
  if (index < 0 || index >= static_cast<int>(layers.size())) {
    throw Error(ErrorCode::UnknownLayer, "run " + run_id + " has no layer " + std::to_string(index));
  }
  return layers[static_cast<std::size_t>(index)];
}

bool RunManifest::has_epoch(int epoch) const noexcept {
  return std::binary_search(epochs.begin(), epochs.end(), epoch);
}

void RunManifest::require_epoch(int epoch) const {
  if (!has_epoch(epoch)) {
    throw Error(ErrorCode::UnknownEpoch, "run " + run_id + " has no dumped epoch " + std::to_string(epoch));
  }
}

void validate_manifest(const RunManifest& m) {
  if (m.run_id.empty()) bad_manifest("empty run_id");
  if (m.num_classes < 1) bad_manifest("num_classes must be positive");
  if (m.probe_count < 1) bad_manifest("probe_count must be positive");
  if (m.epochs.empty() || m.epochs.front() != 0) bad_manifest("epochs must start with 0");
  for (std::size_t i = 1; i < m.epochs.size(); ++i) {
    if (m.epochs[i] <= m.epochs[i - 1]) bad_manifest("epochs must be strictly ascending");
  }
  if (m.layers.size() < 2) bad_manifest("need at least an input and an output layer");

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& d = m.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + d.name + ")";
    if (d.index != static_cast<int>(i)) bad_manifest("layer indices must be contiguous from 0");
    if (d.channels < 1) bad_manifest(where + ": channels must be positive");
    if (d.height.has_value() != d.width.has_value()) bad_manifest(where + ": height and width go together");
    if (d.is_vector()) {
      if (d.channels != 1) bad_manifest(where + ": vector layers have one channel");
      if (!d.units || *d.units < 1) bad_manifest(where + ": vector layers need positive units");
    } else {
      if (*d.height < 1 || *d.width < 1) bad_manifest(where + ": spatial extent must be positive");
      if (d.units) bad_manifest(where + ": units only apply to vector layers");
    }

    const bool first = i == 0;
    const bool last = i + 1 == m.layers.size();
    if (first != (d.kind == LayerKind::Input)) bad_manifest(where + ": input must be exactly layer 0");
    if (last != (d.kind == LayerKind::Output)) bad_manifest(where + ": output must be exactly the last layer");
    if (first) {
      if (d.is_vector()) bad_manifest("input layer must be spatial");
      continue;
    }

    const auto& p = m.layers[i - 1];
    switch (d.kind) {
      case LayerKind::Conv:
        if (p.is_vector() || d.is_vector() || *d.height != *p.height || *d.width != *p.width) {
          bad_manifest(where + ": conv must preserve the spatial extent of its input");
        }
        break;
      case LayerKind::Relu:
        if (d.is_vector() != p.is_vector() || d.channels != p.channels || d.map_height() != p.map_height() ||
            d.map_width() != p.map_width()) {
          bad_manifest(where + ": relu must preserve its input shape");
        }
        break;
      case LayerKind::MaxPool:
        if (p.is_vector() || d.is_vector() || d.channels != p.channels || *d.height != *p.height / 2 ||
            *d.width != *p.width / 2 || *d.height < 1 || *d.width < 1) {
          bad_manifest(where + ": maxpool must halve the spatial extent");
        }
        break;
      case LayerKind::Flatten:
        if (!d.is_vector() || static_cast<std::size_t>(*d.units) != p.feature_count()) {
          bad_manifest(where + ": flatten must collapse its input to C*H*W units");
        }
        break;
      case LayerKind::Linear:
        if (!d.is_vector() || !p.is_vector()) bad_manifest(where + ": linear maps a vector to a vector");
        break;
      case LayerKind::Output:
        if (!d.is_vector() || !p.is_vector() || *d.units != m.num_classes || *p.units != m.num_classes) {
          bad_manifest(where + ": output must be a num_classes-wide vector");
        }
        break;
      case LayerKind::Input:
        break;
    }
  }
}

std::vector<int> SampleTable::ids_with_label(int label) const {
  std::vector<int> ids;
  for (const auto& r : rows) {
    if (r.label == label) ids.push_back(r.sample_id);
  }
  return ids;
}

std::vector<int> SampleTable::class_sizes(int num_classes) const {
  std::vector<int> sizes(static_cast<std::size_t>(num_classes), 0);
  for (const auto& r : rows) ++sizes[static_cast<std::size_t>(r.label)];
  return sizes;
}

SampleTable parse_samples_csv(const fs::path& path, int num_classes) {
  const auto text = read_text(path);
  SampleTable table;
  for (const auto& cells : read_csv(text, "sample_id,label,split", path)) {
    const auto id = parse_number<int>(cells[0]);
    const auto label = parse_number<int>(cells[1]);
    const auto split_text = strip(cells[2]);
    if (!id || !label) throw Error(ErrorCode::BadCsv, path.string() + ": non-integer id or label");
    if (*id != static_cast<int>(table.rows.size())) {
      throw Error(ErrorCode::BadCsv, path.string() + ": sample ids must be dense from 0");
    }
    if (*label < 0 || *label >= num_classes) {
      throw Error(ErrorCode::BadCsv, path.string() + ": label " + std::to_string(*label) + " out of range");
    }
    Split split;
    if (split_text == "train") split = Split::Train;
    else if (split_text == "test") split = Split::Test;
    else throw Error(ErrorCode::BadCsv, path.string() + ": split must be train or test");
    table.rows.push_back({*id, *label, split});
  }
  return table;
}

std::vector<LossRow> parse_loss_csv(const fs::path& path) {
  const auto text = read_text(path);
  std::vector<LossRow> rows;
  for (const auto& cells : read_csv(text, "epoch,train_loss,test_accuracy", path)) {
    const auto epoch = parse_number<int>(cells[0]);
    const auto loss = parse_number<double>(cells[1]);
    const auto acc = parse_number<double>(cells[2]);
    if (!epoch || !loss || !acc) throw Error(ErrorCode::BadCsv, path.string() + ": non-numeric cell");
    if (!rows.empty() && *epoch <= rows.back().epoch) {
      throw Error(ErrorCode::BadCsv, path.string() + ": epochs must be strictly ascending");
    }
    rows.push_back({*epoch, *loss, *acc});
  }
  if (rows.empty()) throw Error(ErrorCode::BadCsv, path.string() + ": no rows");
  return rows;
}

// ---------------------------------------------------------------------------

SliceSpec parse_slice_expression(std::string_view text) {
  const auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::InvalidSlice, "slice '" + std::string(text) + "': " + why);
  };
  const auto parse_axis = [&](std::string_view v) -> std::optional<int> {
    v = strip(v);
    if (v == "*" || v == "-" || v == "all") return std::nullopt;
    const auto n = parse_number<int>(v);
    if (!n || *n < 0) throw fail("expected a non-negative integer or '*'");
    return n;
  };

  SliceSpec spec;
  std::set<char> seen;
  for (auto clause : split(text, ';')) {
    clause = strip(clause);
    if (clause.empty()) continue;
    const auto eq = clause.find('=');
    if (eq == std::string_view::npos || eq != 1) throw fail("clause '" + std::string(clause) + "' is not k=v");
    const char key = clause[0];
    if (!seen.insert(key).second) throw fail(std::string("duplicate clause ") + key);
    const auto value = strip(clause.substr(2));
    switch (key) {
      case 'x':
        if (value == "all" || value == "*" || value == "-") {
          spec.x = SampleSelector::all();
        } else if (value.starts_with("label:")) {
          const auto n = parse_number<int>(value.substr(6));
          if (!n || *n < 0) throw fail("bad label");
          spec.x = SampleSelector::of_label(*n);
        } else if (value.starts_with("ids:")) {
          std::vector<int> ids;
          const auto list = strip(value.substr(4));
          if (!list.empty()) {
            for (const auto item : split(list, ',')) {
              const auto n = parse_number<int>(item);
              if (!n || *n < 0) throw fail("bad sample id");
              ids.push_back(*n);
            }
          }
          spec.x = SampleSelector::of_ids(std::move(ids));
        } else {
          throw fail("x must be all, label:I or ids:I,...");
        }
        break;
      case 'l': spec.layer = parse_axis(value); break;
      case 'c': spec.channel = parse_axis(value); break;
      case 't': spec.epoch = parse_axis(value); break;
      default: throw fail(std::string("unknown clause ") + key);
    }
  }
  return spec;
}

std::string format_selector(const SampleSelector& x) {
  switch (x.kind) {
    case SampleSelector::Kind::All: return "all";
    case SampleSelector::Kind::Label: return "label:" + std::to_string(x.label);
    case SampleSelector::Kind::Ids: {
      std::string s = "ids:";
      for (std::size_t i = 0; i < x.ids.size(); ++i) s += (i ? "," : "") + std::to_string(x.ids[i]);
      return s;
    }
  }
  return "all";
}

std::string format_slice_expression(const SliceSpec& spec) {
  const auto axis = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("*"); };
  return "x=" + format_selector(spec.x) + ";l=" + axis(spec.layer) + ";c=" + axis(spec.channel) +
         ";t=" + axis(spec.epoch);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Run> Run::open(const fs::path& dir, bool full_validation) {
  std::shared_ptr<Run> run(new Run());
  run->manifest_ = parse_manifest(dir);
  const auto& m = run->manifest_;
  run->samples_ = parse_samples_csv(m.root_path / "samples.csv", m.num_classes);
  if (static_cast<int>(run->samples_.size()) != m.probe_count) {
    throw Error(ErrorCode::ShapeMismatch, "samples.csv has " + std::to_string(run->samples_.size()) +
                                              " rows, manifest probe_count is " + std::to_string(m.probe_count));
  }
  parse_loss_csv(m.root_path / "loss.csv");

  for (const int epoch : m.epochs) {
    for (const auto& d : m.layers) {
      if (d.dumped) {
        const auto path = run->activation_path(epoch, d.index);
        const auto expected = expected_activation_shape(d, m.probe_count);
        require_shape(path, header_of(path).shape, expected);
        if (full_validation) require_finite(path, read_tensor_file(path));
      }
      if (d.kind == LayerKind::Conv || d.kind == LayerKind::Linear) {
        const auto kpath = run->weight_path(epoch, d.index, "kernel");
        const auto bpath = run->weight_path(epoch, d.index, "bias");
        const auto kshape = header_of(kpath).shape;
        const auto want = expected_weight_shapes(m, d, kshape);
        require_shape(kpath, kshape, want->kernel);
        require_shape(bpath, header_of(bpath).shape, want->bias);
        if (d.kind == LayerKind::Conv && (kshape[2] % 2 == 0 || kshape[3] % 2 == 0)) {
          throw Error(ErrorCode::ShapeMismatch, kpath.string() + ": conv kernels must have odd extent");
        }
        if (full_validation) {
          require_finite(kpath, read_tensor_file(kpath));
          require_finite(bpath, read_tensor_file(bpath));
        }
      }
    }
    const auto opath = run->outputs_path(epoch);
    require_shape(opath, header_of(opath).shape,
                  {static_cast<std::size_t>(m.probe_count), static_cast<std::size_t>(m.num_classes)});
    if (full_validation) {
      const auto outputs = read_tensor_file(opath);
      require_finite(opath, outputs);
      const auto c = static_cast<std::size_t>(m.num_classes);
      for (std::size_t r = 0; r < outputs.dim(0); ++r) {
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) sum += outputs.data[r * c + k];
        if (std::abs(sum - 1.0) > 1e-5) {
          throw Error(ErrorCode::ShapeMismatch,
                      opath.string() + ": row " + std::to_string(r) + " is not a probability vector");
        }
      }
    }
  }
  run->fingerprint_ = compute_fingerprint(m);
  return run;
}

fs::path Run::activation_path(int epoch, int layer) const {
  return manifest_.root_path / "acts" / ("epoch_" + std::to_string(epoch)) / ("layer_" + std::to_string(layer) + ".npy");
}

fs::path Run::outputs_path(int epoch) const {
  return manifest_.root_path / "outputs" / ("epoch_" + std::to_string(epoch) + ".npy");
}

fs::path Run::weight_path(int epoch, int layer, std::string_view part) const {
  return manifest_.root_path / "weights" / ("epoch_" + std::to_string(epoch)) /
         ("layer_" + std::to_string(layer) + "." + std::string(part) + ".npy");
}

Tensor Run::load_activations(int epoch, int layer) const {
  manifest_.require_epoch(epoch);
  const auto& d = manifest_.layer(layer);
  if (!d.dumped) {
    throw Error(ErrorCode::LayerNotDumped, "layer " + std::to_string(layer) + " (" + d.name + ") is not dumped");
  }
  const auto path = activation_path(epoch, layer);
  auto t = read_tensor_file(path);
  require_shape(path, t.shape, expected_activation_shape(d, manifest_.probe_count));
  t.shape = {t.shape[0], static_cast<std::size_t>(d.channels), static_cast<std::size_t>(d.map_height()),
             static_cast<std::size_t>(d.map_width())};
  return t;
}

Tensor Run::load_outputs(int epoch) const {
  manifest_.require_epoch(epoch);
  const auto path = outputs_path(epoch);
  if (!fs::exists(path)) throw Error(ErrorCode::MissingOutputs, "no outputs dumped at epoch " + std::to_string(epoch));
  auto t = read_tensor_file(path);
  require_shape(path, t.shape,
                {static_cast<std::size_t>(manifest_.probe_count), static_cast<std::size_t>(manifest_.num_classes)});
  return t;
}

std::vector<LossRow> Run::loss_curve() const { return parse_loss_csv(manifest_.root_path / "loss.csv"); }

std::vector<int> Run::select_rows(const SampleSelector& x) const {
  std::vector<int> rows;
  switch (x.kind) {
    case SampleSelector::Kind::All:
      rows.resize(samples_.size());
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
      break;
    case SampleSelector::Kind::Label:
      if (x.label < 0 || x.label >= manifest_.num_classes) {
        throw Error(ErrorCode::InvalidSlice, "label " + std::to_string(x.label) + " out of range");
      }
      rows = samples_.ids_with_label(x.label);
      break;
    case SampleSelector::Kind::Ids:
      for (const int id : x.ids) {
        if (id < 0 || id >= static_cast<int>(samples_.size())) {
          throw Error(ErrorCode::UnknownSample, "no sample " + std::to_string(id));
        }
      }
      rows = x.ids;
      break;
  }
  if (rows.empty()) throw Error(ErrorCode::EmptySelection, "selector " + format_selector(x) + " selects no samples");
  return rows;
}

void Run::validate_slice(const SliceSpec& spec) const {
  if (spec.epoch) manifest_.require_epoch(*spec.epoch);
  if (spec.layer) {
    const auto& d = manifest_.layer(*spec.layer);
    if (!d.dumped) {
      throw Error(ErrorCode::LayerNotDumped, "layer " + std::to_string(d.index) + " (" + d.name + ") is not dumped");
    }
    if (spec.channel && *spec.channel >= d.channels) {
      throw Error(ErrorCode::InvalidSlice, "layer " + std::to_string(d.index) + " has " +
                                               std::to_string(d.channels) + " channels");
    }
  } else if (spec.channel) {
    bool any = false;
    for (const auto& d : manifest_.layers) any = any || (d.dumped && *spec.channel < d.channels);
    if (!any) {
      throw Error(ErrorCode::InvalidSlice, "no dumped layer has channel " + std::to_string(*spec.channel));
    }
  }
  select_rows(spec.x);
}

ActivationBlock Run::load_block(int epoch, int layer, const std::vector<int>& rows,
                                std::optional<int> channel) const {
  const auto full = load_activations(epoch, layer);
  const auto& d = manifest_.layer(layer);
  ActivationBlock block;
  block.layer = d;
  block.epoch = epoch;
  block.sample_ids = rows;
  const std::size_t per_channel = d.channel_size();
  const std::size_t per_sample = per_channel * static_cast<std::size_t>(d.channels);
  if (channel) {
    if (*channel < 0 || *channel >= d.channels) {
      throw Error(ErrorCode::InvalidSlice, "channel " + std::to_string(*channel) + " out of range");
    }
    block.channels = {*channel};
  } else {
    block.channels.resize(static_cast<std::size_t>(d.channels));
    for (int c = 0; c < d.channels; ++c) block.channels[static_cast<std::size_t>(c)] = c;
  }
  const std::size_t kept = block.channels.size();
  block.data = Tensor({rows.size(), kept, static_cast<std::size_t>(d.map_height()),
                       static_cast<std::size_t>(d.map_width())});
  float* dst = block.data.data.data();
  for (const int r : rows) {
    const float* src = full.data.data() + static_cast<std::size_t>(r) * per_sample;
    for (const int c : block.channels) {
      std::memcpy(dst, src + static_cast<std::size_t>(c) * per_channel, per_channel * sizeof(float));
      dst += per_channel;
    }
  }
  return block;
}

SliceCursor::SliceCursor(std::shared_ptr<const Run> run, SliceSpec spec)
    : run_(std::move(run)), spec_(std::move(spec)) {
  run_->validate_slice(spec_);
  rows_ = run_->select_rows(spec_.x);
  const auto& m = run_->manifest();
  for (const auto& d : m.layers) {
    if (spec_.layer ? d.index != *spec_.layer : !d.dumped) continue;
    // with every layer selected, a fixed channel skips layers too narrow for it
    if (!spec_.layer && spec_.channel && *spec_.channel >= d.channels) continue;
    for (const int t : m.epochs) {
      if (spec_.epoch && t != *spec_.epoch) continue;
      keys_.emplace_back(d.index, t);
    }
  }
}

std::optional<ActivationBlock> SliceCursor::next() {
  if (pos_ >= keys_.size()) return std::nullopt;
  const auto [layer, epoch] = keys_[pos_++];
  return run_->load_block(epoch, layer, rows_, spec_.channel);
}

SliceCursor Run::slice(const SliceSpec& spec) const { return SliceCursor(shared_from_this(), spec); }

std::vector<ActivationBlock> Run::slice_all(const SliceSpec& spec) const {
  auto cursor = slice(spec);
  std::vector<ActivationBlock> out;
  while (auto block = cursor.next()) out.push_back(std::move(*block));
  return out;
}

RunManifest ingest(const fs::path& dump_dir) {
  if (!fs::is_directory(dump_dir)) throw Error(ErrorCode::MissingFile, "no dump directory " + dump_dir.string());
  return Run::open(dump_dir, /*full_validation=*/true)->manifest();
}

// ---------------------------------------------------------------------------

Registry::Registry(fs::path data_root) : root_(std::move(data_root)) {}

std::map<std::string, fs::path> Registry::load_index() const {
  std::map<std::string, fs::path> index;
  const auto path = root_ / "registry.json";
  if (!fs::exists(path)) return index;
  try {
    const auto j = json::parse(read_text(path));
    for (const auto& [id, p] : j.at("runs").items()) index.emplace(id, fs::path(p.get<std::string>()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadManifest, "registry.json: " + std::string(e.what()));
  }
  return index;
}

RunManifest Registry::register_run(const fs::path& dump_dir) {
  auto manifest = ingest(dump_dir);
  std::lock_guard lock(mutex_);
  auto index = load_index();
  const auto it = index.find(manifest.run_id);
  if (it != index.end() && it->second == manifest.root_path) return manifest;
  index[manifest.run_id] = manifest.root_path;

  json j;
  j["runs"] = json::object();
  for (const auto& [id, p] : index) j["runs"][id] = p.string();
  fs::create_directories(root_);
  const auto tmp = root_ / "registry.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, root_ / "registry.json");
  open_.erase(manifest.run_id);
  return manifest;
}

std::vector<std::string> Registry::run_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : load_index()) ids.push_back(id);
  return ids;
}

std::shared_ptr<const Run> Registry::open(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  if (const auto it = open_.find(run_id); it != open_.end()) return it->second;
  const auto index = load_index();
  const auto it = index.find(run_id);
  if (it == index.end()) throw Error(ErrorCode::UnknownRun, "unknown run '" + run_id + "'");
  auto run = Run::open(it->second);
  open_.emplace(run_id, run);
  return run;
}

std::string fnv1a_hex(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cnnslicer
