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

#include "cnnslicer/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnnslicer/error.hpp"

namespace cnnslicer {

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); }

std::vector<std::size_t> layer_shape(const LayerDescriptor& d) {
  return {static_cast<std::size_t>(d.channels), static_cast<std::size_t>(d.map_height()),
          static_cast<std::size_t>(d.map_width())};
}

Tensor relu(Tensor t) {
  for (auto& v : t.data) v = std::max(v, 0.0f);
  return t;
}

Tensor linear(const Tensor& input, const LayerWeights& w) {
  const std::size_t out_dim = w.kernel.dim(0);
  const std::size_t in_dim = w.kernel.dim(1);
  if (input.size() != in_dim) shape_error("linear input has " + std::to_string(input.size()) + " features");
  Tensor out({1, 1, out_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    double acc = w.bias.data[o];
    const float* row = w.kernel.data.data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += static_cast<double>(row[i]) * input.data[i];
    out.data[o] = static_cast<float>(acc);
  }
  return out;
}

Tensor linear_transpose(const Tensor& grad, const LayerWeights& w, const std::vector<std::size_t>& in_shape) {
  const std::size_t out_dim = w.kernel.dim(0);
  const std::size_t in_dim = w.kernel.dim(1);
  std::vector<double> acc(in_dim, 0.0);
  for (std::size_t o = 0; o < out_dim; ++o) {
    const double g = grad.data[o];
    if (g == 0.0) continue;
    const float* row = w.kernel.data.data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc[i] += g * row[i];
  }
  Tensor out(in_shape);
  for (std::size_t i = 0; i < in_dim; ++i) out.data[i] = static_cast<float>(acc[i]);
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  const float mx = *std::max_element(logits.data.begin(), logits.data.end());
  double sum = 0.0;
  for (auto& v : out.data) sum += std::exp(static_cast<double>(v) - mx);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = static_cast<float>(std::exp(static_cast<double>(logits.data[i]) - mx) / sum);
  }
  return out;
}

}  // namespace

std::size_t PoolSwitches::input_position(int c, int oy, int ox) const {
  const auto pos = window_pos[(static_cast<std::size_t>(c) * out_height + oy) * out_width + ox];
  const int y = oy * 2 + pos / 2;
  const int x = ox * 2 + pos % 2;
  return static_cast<std::size_t>(y) * in_width + x;
}

NetworkWeights NetworkWeights::load(const Run& run, int epoch) {
  const auto& m = run.manifest();
  m.require_epoch(epoch);
  NetworkWeights w;
  w.epoch = epoch;
  w.layers = m.layers;
  for (const auto& d : m.layers) {
    if (d.kind != LayerKind::Conv && d.kind != LayerKind::Linear) continue;
    w.params[d.index] = {read_tensor_file(run.weight_path(epoch, d.index, "kernel")),
                         read_tensor_file(run.weight_path(epoch, d.index, "bias"))};
  }
  w.validate();
  return w;
}

void NetworkWeights::validate() const {
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const auto& d = layers[i];
    const auto& prev = layers[i - 1];
    if (d.kind != LayerKind::Conv && d.kind != LayerKind::Linear) continue;
    const auto it = params.find(d.index);
    if (it == params.end()) shape_error("no parameters for layer " + std::to_string(d.index));
    const auto& k = it->second.kernel;
    const auto& b = it->second.bias;
    if (d.kind == LayerKind::Conv) {
      if (k.rank() != 4 || k.dim(0) != static_cast<std::size_t>(d.channels) ||
          k.dim(1) != static_cast<std::size_t>(prev.channels) || k.dim(2) % 2 == 0 || k.dim(3) % 2 == 0) {
        shape_error("conv kernel of layer " + std::to_string(d.index) + " does not fit the layer chain");
      }
      if (b.size() != static_cast<std::size_t>(d.channels)) shape_error("conv bias size mismatch");
    } else {
      if (k.rank() != 2 || k.dim(0) != static_cast<std::size_t>(*d.units) || k.dim(1) != prev.feature_count()) {
        shape_error("linear weight of layer " + std::to_string(d.index) + " does not fit the layer chain");
      }
      if (b.size() != static_cast<std::size_t>(*d.units)) shape_error("linear bias size mismatch");
    }
  }
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias) {
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) shape_error("conv kernel expects " + std::to_string(kernel.dim(1)) + " input channels");
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  Tensor out({cout, h, w});
  std::vector<double> acc(h * w);
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(acc.begin(), acc.end(), bias ? static_cast<double>(bias->data[co]) : 0.0);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const float* in = input.data.data() + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double kv = kernel.data[((co * cin + ci) * kh + ky) * kw + kx];
          if (kv == 0.0) continue;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
          const std::size_t y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dy));
          const std::size_t y1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(h) - dy));
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
          const std::size_t x1 = static_cast<std::size_t>(std::min<std::ptrdiff_t>(w, static_cast<std::ptrdiff_t>(w) - dx));
          for (std::size_t y = y0; y < y1; ++y) {
            const float* src = in + (y + dy) * w + dx;
            double* dst = acc.data() + y * w;
            for (std::size_t x = x0; x < x1; ++x) dst[x] += kv * src[x];
          }
        }
      }
    }
    std::transform(acc.begin(), acc.end(), out.data.begin() + static_cast<std::ptrdiff_t>(co * h * w),
                   [](double v) { return static_cast<float>(v); });
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& grad, const Tensor& kernel) {
  const std::size_t cout = grad.dim(0), h = grad.dim(1), w = grad.dim(2);
  const std::size_t cin = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != cout) shape_error("transposed conv kernel expects " + std::to_string(kernel.dim(0)) + " channels");
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  std::vector<double> acc(cin * h * w, 0.0);
  // Scatter form of correlation with the spatially flipped kernel.
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < h; ++oy) {
      for (std::size_t ox = 0; ox < w; ++ox) {
        const double g = grad.data[(co * h + oy) * w + ox];
        if (g == 0.0) continue;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy + ky) - ph;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox + kx) - pw;
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
              acc[(ci * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] +=
                  g * kernel.data[((co * cin + ci) * kh + ky) * kw + kx];
            }
          }
        }
      }
    }
  }
  Tensor out({cin, h, w});
  std::transform(acc.begin(), acc.end(), out.data.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

Tensor max_pool_2x2(const Tensor& input, PoolSwitches* switches) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  if (switches) {
    *switches = PoolSwitches{static_cast<int>(c), static_cast<int>(h), static_cast<int>(w),
                             static_cast<int>(oh), static_cast<int>(ow), std::vector<std::uint8_t>(c * oh * ow)};
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* in = input.data.data() + ch * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::uint8_t best = 0;
        float best_v = in[(oy * 2) * w + ox * 2];
        for (std::uint8_t pos = 1; pos < 4; ++pos) {
          const float v = in[(oy * 2 + pos / 2) * w + ox * 2 + pos % 2];
          if (v > best_v) {
            best_v = v;
            best = pos;
          }
        }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        out.data[o] = best_v;
        if (switches) switches->window_pos[o] = best;
      }
    }
  }
  return out;
}

Tensor unpool_2x2(const Tensor& pooled, const PoolSwitches& sw) {
  if (pooled.rank() != 3 || pooled.dim(0) != static_cast<std::size_t>(sw.channels) ||
      pooled.dim(1) != static_cast<std::size_t>(sw.out_height) || pooled.dim(2) != static_cast<std::size_t>(sw.out_width)) {
    shape_error("pooled map does not match its switch record");
  }
  Tensor out({static_cast<std::size_t>(sw.channels), static_cast<std::size_t>(sw.in_height),
              static_cast<std::size_t>(sw.in_width)});
  const std::size_t plane = static_cast<std::size_t>(sw.in_height) * sw.in_width;
  for (int c = 0; c < sw.channels; ++c) {
    for (int oy = 0; oy < sw.out_height; ++oy) {
      for (int ox = 0; ox < sw.out_width; ++ox) {
        out.data[c * plane + sw.input_position(c, oy, ox)] =
            pooled.data[(static_cast<std::size_t>(c) * sw.out_height + oy) * sw.out_width + ox];
      }
    }
  }
  return out;
}

ForwardResult forward(const NetworkWeights& weights, const Tensor& input) {
  const auto& layers = weights.layers;
  if (layers.empty()) shape_error("network has no layers");
  if (input.shape != layer_shape(layers[0])) shape_error("input does not match layer 0");
  ForwardResult r;
  r.activations.reserve(layers.size());
  r.activations.push_back(input);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const auto& d = layers[i];
    const Tensor& x = r.activations.back();
    Tensor y;
    switch (d.kind) {
      case LayerKind::Conv: {
        const auto& p = weights.params.at(d.index);
        y = conv2d(x, p.kernel, &p.bias);
        break;
      }
      case LayerKind::Relu: y = relu(x); break;
      case LayerKind::MaxPool: {
        PoolSwitches sw;
        y = max_pool_2x2(x, &sw);
        r.switches.pools[d.index] = std::move(sw);
        break;
      }
      case LayerKind::Flatten: y = Tensor({1, 1, x.size()}, x.data); break;
      case LayerKind::Linear: y = linear(x, weights.params.at(d.index)); break;
      case LayerKind::Output: y = softmax(x); break;
      case LayerKind::Input: shape_error("input layer after position 0");
    }
    if (y.shape != layer_shape(d)) shape_error("layer " + std::to_string(d.index) + " produced an unexpected shape");
    r.activations.push_back(std::move(y));
  }
  return r;
}

Tensor deconv_project(const NetworkWeights& weights, const SwitchRecord& switches, int layer, int channel,
                      const Tensor& featmap) {
  const auto& layers = weights.layers;
  if (layer < 0 || layer >= static_cast<int>(layers.size())) {
    throw Error(ErrorCode::UnknownLayer, "no layer " + std::to_string(layer));
  }
  const auto& top = layers[static_cast<std::size_t>(layer)];
  if (top.kind == LayerKind::Output) {
    throw Error(ErrorCode::InvalidArgument, "softmax outputs cannot be projected");
  }
  if (channel < 0 || channel >= top.channels) {
    throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(layer) + " has no channel " + std::to_string(channel));
  }
  const std::size_t plane = top.channel_size();
  if (featmap.size() != plane) {
    shape_error("feature map has " + std::to_string(featmap.size()) + " values, layer " + std::to_string(layer) +
                " maps have " + std::to_string(plane));
  }

  Tensor x(layer_shape(top));
  std::copy(featmap.data.begin(), featmap.data.end(),
            x.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(channel) * plane));

  for (int l = layer; l >= 1; --l) {
    const auto& d = layers[static_cast<std::size_t>(l)];
    const auto below = layer_shape(layers[static_cast<std::size_t>(l - 1)]);
    switch (d.kind) {
      case LayerKind::Relu: x = relu(std::move(x)); break;
      case LayerKind::MaxPool: {
        const auto it = switches.pools.find(l);
        if (it == switches.pools.end()) {
          throw Error(ErrorCode::MissingSwitches, "no switches recorded for layer " + std::to_string(l));
        }
        x = unpool_2x2(x, it->second);
        break;
      }
      case LayerKind::Conv: x = conv2d_transpose(x, weights.params.at(l).kernel); break;
      case LayerKind::Flatten: x = Tensor(below, std::move(x.data)); break;
      case LayerKind::Linear: x = linear_transpose(x, weights.params.at(l), below); break;
      case LayerKind::Output:
      case LayerKind::Input: throw Error(ErrorCode::InvalidArgument, "unexpected layer kind while projecting");
    }
    if (x.shape != below) shape_error("projection through layer " + std::to_string(l) + " changed shape unexpectedly");
  }
  return x;
}

namespace {

Tensor sample_map(const ActivationBlock& block) {
  const auto& d = block.layer;
  return Tensor({block.channels.size(), static_cast<std::size_t>(d.map_height()), static_cast<std::size_t>(d.map_width())},
                block.data.data);
}

}  // namespace

Tensor project_sample(const Run& run, int epoch, int layer, int channel, int sample) {
  const auto rows = run.select_rows(SampleSelector::of_ids({sample}));
  const auto weights = NetworkWeights::load(run, epoch);
  weights.validate();
  const auto input = sample_map(run.load_block(epoch, 0, rows, std::nullopt));
  const auto fwd = forward(weights, input);
  const auto& d = run.manifest().layer(layer);
  if (channel < 0 || channel >= d.channels) {
    throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(layer) + " has no channel " + std::to_string(channel));
  }
  const auto& act = fwd.activations[static_cast<std::size_t>(layer)];
  const std::size_t plane = d.channel_size();
  Tensor featmap({plane});
  std::copy_n(act.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(channel) * plane), plane,
              featmap.data.begin());
  return deconv_project(weights, fwd.switches, layer, channel, featmap);
}

Tensor feature_map(const Run& run, int epoch, int layer, int channel, int sample) {
  const auto rows = run.select_rows(SampleSelector::of_ids({sample}));
  return sample_map(run.load_block(epoch, layer, rows, channel));
}

}  // namespace cnnslicer
