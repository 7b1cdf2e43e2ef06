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

#include "cnnslicer/report.hpp"

#include <cstdio>

namespace cnnslicer {

using nlohmann::json;

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

std::string entropy_csv(const std::vector<EntropyRow>& rows) {
  const bool per_channel = !rows.empty() && rows.front().channel.has_value();
  std::string out = per_channel ? "layer,epoch,channel,bits\n" : "layer,epoch,bits\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layer) + "," + std::to_string(r.epoch) + ",";
    if (per_channel) out += std::to_string(r.channel.value_or(0)) + ",";
    out += format_number(r.bits) + "\n";
  }
  return out;
}

std::string capacity_csv(const CapacityMatrix& m) {
  std::string out = "channel_i";
  for (const int b : m.col_order) out += "," + std::to_string(b);
  out += "\n";
  for (const int a : m.row_order) {
    out += std::to_string(a);
    for (const int b : m.col_order) out += "," + format_number(m.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)));
    out += "\n";
  }
  return out;
}

std::string order_csv(const std::vector<int>& order) {
  std::string out = "rank,channel\n";
  for (std::size_t i = 0; i < order.size(); ++i) out += std::to_string(i) + "," + std::to_string(order[i]) + "\n";
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "actual";
  for (int p = 0; p < cm.num_classes; ++p) out += ",pred_" + std::to_string(p);
  out += "\n";
  for (int a = 0; a < cm.num_classes; ++a) {
    out += std::to_string(a);
    for (int p = 0; p < cm.num_classes; ++p) out += "," + std::to_string(cm.at(a, p));
    out += "\n";
  }
  return out;
}

std::string conditional_csv(const ConditionalEntropySeries& s) {
  std::string out = "class,epoch,bits\n";
  for (int c = 0; c < s.num_classes; ++c) {
    for (std::size_t e = 0; e < s.epochs.size(); ++e) {
      const auto& v = s.at(c, e);
      out += std::to_string(c) + "," + std::to_string(s.epochs[e]) + "," + (v ? format_number(*v) : "") + "\n";
    }
  }
  return out;
}

std::string loss_csv(const std::vector<LossRow>& rows) {
  std::string out = "epoch,train_loss,test_accuracy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + format_number(r.train_loss) + "," + format_number(r.test_accuracy) + "\n";
  }
  return out;
}

std::string series_csv(const ChannelEntropySeries& s) {
  std::string out = "channel,class,epoch,bits\n";
  for (int c = 0; c < s.channels; ++c) {
    for (int g = 0; g < s.groups(); ++g) {
      const std::string label = g == s.all_group() ? "all" : std::to_string(g);
      for (std::size_t e = 0; e < s.epochs.size(); ++e) {
        out += std::to_string(c) + "," + label + "," + std::to_string(s.epochs[e]) + "," + format_number(s.at(c, g, e)) + "\n";
      }
    }
  }
  return out;
}

std::string diversity_csv(const std::vector<DiversityPoint>& points) {
  std::string out = "per_class_size,bits\n";
  for (const auto& p : points) out += std::to_string(p.per_class_size) + "," + format_number(p.bits) + "\n";
  return out;
}

json to_json(const LayerDescriptor& d) {
  json j = {{"index", d.index}, {"name", d.name}, {"kind", std::string(to_string(d.kind))},
            {"channels", d.channels}, {"dumped", d.dumped}};
  j["height"] = d.height ? json(*d.height) : json(nullptr);
  j["width"] = d.width ? json(*d.width) : json(nullptr);
  if (d.units) j["units"] = *d.units;
  return j;
}

json to_json(const RunManifest& m) {
  json layers = json::array();
  for (const auto& d : m.layers) layers.push_back(to_json(d));
  return {{"run_id", m.run_id},         {"dataset", m.dataset}, {"num_classes", m.num_classes},
          {"probe_count", m.probe_count}, {"epochs", m.epochs},   {"layers", layers},
          {"root_path", m.root_path.string()}};
}

json to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (int a = 0; a < cm.num_classes; ++a) {
    json row = json::array();
    for (int p = 0; p < cm.num_classes; ++p) row.push_back(cm.at(a, p));
    rows.push_back(row);
  }
  return {{"epoch", cm.epoch}, {"counts", rows}};
}

json to_json(const ConditionalEntropySeries& s) {
  json values = json::array();
  for (int c = 0; c < s.num_classes; ++c) {
    json line = json::array();
    for (std::size_t e = 0; e < s.epochs.size(); ++e) {
      const auto& v = s.at(c, e);
      line.push_back(v ? json(*v) : json(nullptr));
    }
    values.push_back(line);
  }
  return {{"direction", std::string(to_string(s.direction))}, {"epochs", s.epochs}, {"values", values}};
}

json to_json(const CapacityMatrix& m) {
  json values = json::array();
  for (std::size_t a = 0; a < m.rows; ++a) {
    json row = json::array();
    for (std::size_t b = 0; b < m.cols; ++b) row.push_back(m.at(a, b));
    values.push_back(row);
  }
  return {{"layer_i", m.layer_i},     {"layer_j", m.layer_j},     {"epoch", m.epoch},
          {"values", values},         {"row_order", m.row_order}, {"col_order", m.col_order}};
}

json to_json(const ChannelEntropySeries& s) {
  json classes = json::array();
  for (int g = 0; g < s.groups(); ++g) classes.push_back(g == s.all_group() ? "all" : std::to_string(g));
  json values = json::array();
  for (int c = 0; c < s.channels; ++c) {
    json per_class = json::array();
    for (int g = 0; g < s.groups(); ++g) {
      json line = json::array();
      for (std::size_t e = 0; e < s.epochs.size(); ++e) line.push_back(s.at(c, g, e));
      per_class.push_back(line);
    }
    values.push_back(per_class);
  }
  return {{"layer", s.layer}, {"epochs", s.epochs}, {"classes", classes}, {"values", values}};
}

json to_json(const CirclePackTree& t) {
  json classes = json::array();
  for (const auto& node : t.classes) {
    json children = json::array();
    for (const auto& ch : node.children) children.push_back({{"channel", ch.channel}, {"size", ch.size}});
    classes.push_back({{"class", node.label}, {"size", node.size}, {"children", children}});
  }
  return {{"layer", t.layer}, {"epoch", t.epoch}, {"children", classes}};
}

json to_json(const std::vector<LossRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"test_accuracy", r.test_accuracy}});
  }
  return out;
}

json to_json(const std::vector<EntropyRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j = {{"layer", r.layer}, {"epoch", r.epoch}, {"bits", r.bits}};
    if (r.channel) j["channel"] = *r.channel;
    out.push_back(j);
  }
  return out;
}

}  // namespace cnnslicer
