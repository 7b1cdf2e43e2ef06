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

#include "mini_run.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

namespace testsupport {

using cnnslicer::Tensor;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("cnnslicer-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

namespace {

constexpr int kSide = 6;
constexpr int kChannels = 3;
constexpr int kPooled = 3;
constexpr int kFlat = kChannels * kPooled * kPooled;

// Straightforward reference layers; the library's own forward pass is tested
// against these elsewhere.
std::vector<float> conv(const std::vector<float>& in, const Tensor& k, const Tensor& b) {
  std::vector<float> out(kChannels * kSide * kSide);
  for (int co = 0; co < kChannels; ++co)
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        double s = b.data[co];
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= kSide || xx >= kSide) continue;
            s += static_cast<double>(k.data[co * 9 + (dy + 1) * 3 + (dx + 1)]) * in[yy * kSide + xx];
          }
        out[(co * kSide + y) * kSide + x] = static_cast<float>(s);
      }
  return out;
}

std::vector<float> pool(const std::vector<float>& in) {
  std::vector<float> out(kFlat);
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < kPooled; ++y)
      for (int x = 0; x < kPooled; ++x) {
        float m = in[(c * kSide + 2 * y) * kSide + 2 * x];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) m = std::max(m, in[(c * kSide + 2 * y + dy) * kSide + 2 * x + dx]);
        out[(c * kPooled + y) * kPooled + x] = m;
      }
  return out;
}

void append(Tensor& dst, std::size_t row, const std::vector<float>& v) {
  std::copy(v.begin(), v.end(), dst.data.begin() + static_cast<std::ptrdiff_t>(row * v.size()));
}

}  // namespace

fs::path write_mini_run(const fs::path& dir, const MiniRunOptions& o) {
  Rng rng(o.seed);
  const auto n = static_cast<std::size_t>(o.probe_count);
  const auto classes = static_cast<std::size_t>(o.num_classes);
  fs::create_directories(dir);

  std::vector<int> labels = o.labels;
  if (labels.empty()) {
    for (int i = 0; i < o.probe_count; ++i) labels.push_back(i % o.num_classes);
  }

  const Tensor inputs = random_tensor(rng, {n, 1, kSide, kSide}, 0.0, 1.0);

  for (const int epoch : o.epochs) {
    const std::string e = "epoch_" + std::to_string(epoch);
    const Tensor ck = random_tensor(rng, {kChannels, 1, 3, 3}, -0.5, 0.5);
    const Tensor cb = random_tensor(rng, {kChannels}, -0.1, 0.1);
    const Tensor lk = random_tensor(rng, {classes, kFlat}, -0.5, 0.5);
    const Tensor lb = random_tensor(rng, {classes}, -0.1, 0.1);
    cnnslicer::write_tensor_file(dir / "weights" / e / "layer_1.kernel.npy", ck);
    cnnslicer::write_tensor_file(dir / "weights" / e / "layer_1.bias.npy", cb);
    cnnslicer::write_tensor_file(dir / "weights" / e / "layer_5.kernel.npy", lk);
    cnnslicer::write_tensor_file(dir / "weights" / e / "layer_5.bias.npy", lb);

    Tensor a1({n, kChannels, kSide, kSide}), a2({n, kChannels, kSide, kSide}), a3({n, kChannels, kPooled, kPooled});
    Tensor out({n, classes});
    for (std::size_t s = 0; s < n; ++s) {
      const std::vector<float> x(inputs.data.begin() + static_cast<std::ptrdiff_t>(s * kSide * kSide),
                                 inputs.data.begin() + static_cast<std::ptrdiff_t>((s + 1) * kSide * kSide));
      auto c = conv(x, ck, cb);
      append(a1, s, c);
      for (auto& v : c) v = std::max(v, 0.0f);
      append(a2, s, c);
      const auto p = pool(c);
      append(a3, s, p);
      std::vector<double> logits(classes);
      for (std::size_t d = 0; d < classes; ++d) {
        double acc = lb.data[d];
        for (int f = 0; f < kFlat; ++f) acc += static_cast<double>(lk.data[d * kFlat + f]) * p[f];
        logits[d] = acc;
      }
      const auto pred = o.predictions.find(epoch);
      if (pred != o.predictions.end()) {
        for (std::size_t d = 0; d < classes; ++d) {
          out.data[s * classes + d] =
              static_cast<int>(d) == pred->second[s] ? 0.9f : static_cast<float>(0.1 / (o.num_classes - 1));
        }
      } else {
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t d = 0; d < classes; ++d) out.data[s * classes + d] = static_cast<float>(logits[d] / z);
      }
    }
    cnnslicer::write_tensor_file(dir / "acts" / e / "layer_0.npy", inputs);
    cnnslicer::write_tensor_file(dir / "acts" / e / "layer_1.npy", a1);
    cnnslicer::write_tensor_file(dir / "acts" / e / "layer_2.npy", a2);
    cnnslicer::write_tensor_file(dir / "acts" / e / "layer_3.npy", a3);
    cnnslicer::write_tensor_file(dir / "acts" / e / "layer_6.npy", out);
    cnnslicer::write_tensor_file(dir / "outputs" / (e + ".npy"), out);
  }

  std::string samples = "sample_id,label,split\n";
  for (int i = 0; i < o.probe_count; ++i) samples += std::to_string(i) + "," + std::to_string(labels[i]) + ",test\n";
  write_text_file(dir / "samples.csv", samples);

  std::string loss = "epoch,train_loss,test_accuracy\n";
  for (std::size_t i = 0; i < o.train_loss.size(); ++i) {
    std::ostringstream row;
    row << (i + 1) << "," << o.train_loss[i] << "," << o.test_accuracy[i] << "\n";
    loss += row.str();
  }
  write_text_file(dir / "loss.csv", loss);

  using nlohmann::json;
  auto map_layer = [](int index, const char* name, const char* kind, int c, int h, bool dumped) {
    return json{{"index", index}, {"name", name}, {"kind", kind}, {"channels", c},
                {"height", h},    {"width", h},   {"dumped", dumped}};
  };
  auto vec_layer = [](int index, const char* name, const char* kind, int units, bool dumped) {
    return json{{"index", index}, {"name", name},      {"kind", kind},     {"channels", 1},
                {"height", nullptr}, {"width", nullptr}, {"units", units}, {"dumped", dumped}};
  };
  json m = {{"run_id", o.run_id},
            {"dataset", "synthetic"},
            {"num_classes", o.num_classes},
            {"probe_count", o.probe_count},
            {"epochs", o.epochs},
            {"layers",
             {map_layer(0, "input", "input", 1, kSide, true), map_layer(1, "conv1", "conv", kChannels, kSide, true),
              map_layer(2, "relu1", "relu", kChannels, kSide, true),
              map_layer(3, "pool1", "maxpool", kChannels, kPooled, true),
              vec_layer(4, "flatten", "flatten", kFlat, false), vec_layer(5, "fc", "linear", o.num_classes, false),
              vec_layer(6, "output", "output", o.num_classes, true)}}};
  write_text_file(dir / "manifest.json", m.dump(2));
  return dir;
}

}  // namespace testsupport
