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

// CSV and JSON encodings of analysis results, shared by the CLI and the
// HTTP service. CSV numbers carry 6 significant digits; JSON keeps full
// double precision. Undefined conditional entropies are an empty CSV field
// and a JSON null.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnnslicer/flow.hpp"
#include "cnnslicer/perf.hpp"
#include "cnnslicer/tensor_store.hpp"
#include "json.hpp"

namespace cnnslicer {

std::string format_number(double v);

/// Result row of an entropy query over a slice.
struct EntropyRow {
  int layer = 0;
  int epoch = 0;
  std::optional<int> channel;  // set for intra-sample metrics
  double bits = 0.0;
};

std::string entropy_csv(const std::vector<EntropyRow>& rows);
/// Wide matrix in display order: header "channel_i,<col ids>", one row per
/// row channel.
std::string capacity_csv(const CapacityMatrix& m);
std::string order_csv(const std::vector<int>& order);
std::string confusion_csv(const ConfusionMatrix& cm);
std::string conditional_csv(const ConditionalEntropySeries& s);
std::string loss_csv(const std::vector<LossRow>& rows);
std::string series_csv(const ChannelEntropySeries& s);
std::string diversity_csv(const std::vector<DiversityPoint>& points);

nlohmann::json to_json(const LayerDescriptor& d);
nlohmann::json to_json(const RunManifest& m);
nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const ConditionalEntropySeries& s);
nlohmann::json to_json(const CapacityMatrix& m);
nlohmann::json to_json(const ChannelEntropySeries& s);
nlohmann::json to_json(const CirclePackTree& t);
nlohmann::json to_json(const std::vector<LossRow>& rows);
nlohmann::json to_json(const std::vector<EntropyRow>& rows);

}  // namespace cnnslicer
