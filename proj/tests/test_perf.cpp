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

#include <cmath>

#include "cnnslicer/error.hpp"
#include "cnnslicer/perf.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support/mini_run.hpp"

using namespace cnnslicer;
using testsupport::Rng;
using testsupport::TempDir;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("argmax breaks ties toward the lowest class") {
  const std::vector<float> a = {0.1f, 0.4f, 0.4f, 0.1f};
  CHECK(argmax(a) == 1);
  const std::vector<float> flat(5, 0.2f);
  CHECK(argmax(flat) == 0);
  const std::vector<float> last = {0.0f, 0.1f, 0.9f};
  CHECK(argmax(last) == 2);
}

TEST_CASE("confusion tally matches a hand count") {
  const std::vector<int> labels = {0, 0, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> preds = {0, 1, 1, 1, 2, 2, 2, 0, 2};
  const auto cm = tally_confusion(labels, preds, 3);
  CHECK(cm.counts == std::vector<std::uint64_t>{1, 1, 0,  //
                                                0, 2, 1,  //
                                                1, 0, 3});
  CHECK(cm.total() == 9);
  CHECK(cm.row_sum(2) == 4);
  CHECK(cm.column_sum(0) == 2);
  const std::vector<int> short_preds = {0};
  CHECK(code_of([&] { tally_confusion(labels, short_preds, 3); }) == ErrorCode::SampleMisalignment);
  const std::vector<int> bad = {0, 0, 1, 1, 1, 2, 2, 2, 3};
  CHECK(code_of([&] { tally_confusion(labels, bad, 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("conditional entropies of a hand-built matrix") {
  const std::vector<int> labels = {0, 0, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> preds = {0, 1, 1, 1, 2, 2, 2, 0, 2};
  const auto cm = tally_confusion(labels, preds, 3);
  const auto rows = conditional_entropies(cm, ConditionalDirection::PredGivenLabel);
  CHECK(*rows[0] == doctest::Approx(1.0));
  CHECK(*rows[1] == doctest::Approx(oracle::entropy_of_counts({0, 2, 1})));
  CHECK(*rows[2] == doctest::Approx(oracle::entropy_of_counts({1, 0, 3})));
  const auto cols = conditional_entropies(cm, ConditionalDirection::LabelGivenPred);
  CHECK(*cols[0] == doctest::Approx(1.0));
  CHECK(*cols[1] == doctest::Approx(oracle::entropy_of_counts({1, 2, 0})));
  CHECK(*cols[2] == doctest::Approx(oracle::entropy_of_counts({0, 1, 3})));
}

TEST_CASE("perfect classifier gives zero conditional entropy") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 10);
  const auto cm = tally_confusion(labels, labels, 10);
  for (const auto d : {ConditionalDirection::PredGivenLabel, ConditionalDirection::LabelGivenPred}) {
    for (const auto& v : conditional_entropies(cm, d)) {
      REQUIRE(v.has_value());
      CHECK(*v == 0.0);
    }
  }
}

TEST_CASE("uniform random predictions approach log2 of the class count") {
  Rng rng(2024);
  std::vector<int> labels, preds;
  for (int i = 0; i < 10000; ++i) {
    labels.push_back(static_cast<int>(rng.below(10)));
    preds.push_back(static_cast<int>(rng.below(10)));
  }
  const auto cm = tally_confusion(labels, preds, 10);
  for (const auto& v : conditional_entropies(cm, ConditionalDirection::PredGivenLabel)) {
    CHECK(std::abs(*v - std::log2(10.0)) <= 0.05);
  }
}

TEST_CASE("an all-zero prediction column is undefined only for label given pred") {
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const std::vector<int> preds = {0, 0, 1, 0, 1, 1};
  const auto cm = tally_confusion(labels, preds, 3);
  const auto cols = conditional_entropies(cm, ConditionalDirection::LabelGivenPred);
  CHECK(cols[0].has_value());
  CHECK(cols[1].has_value());
  CHECK(!cols[2].has_value());
  for (const auto& v : conditional_entropies(cm, ConditionalDirection::PredGivenLabel)) CHECK(v.has_value());
  CHECK(parse_conditional_direction("label_given_pred") == ConditionalDirection::LabelGivenPred);
  CHECK(code_of([] { parse_conditional_direction("sideways"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("run-level confusion and conditional series") {
  TempDir tmp("perf");
  testsupport::MiniRunOptions o;
  std::vector<int> all_zero(24, 0), perfect;
  for (int i = 0; i < 24; ++i) perfect.push_back(i % 3);
  o.predictions[0] = all_zero;
  o.predictions[1] = perfect;
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run", o));

  const auto cm0 = confusion(*run, 0);
  CHECK(cm0.counts == std::vector<std::uint64_t>{8, 0, 0, 8, 0, 0, 8, 0, 0});
  const auto cm1 = confusion(*run, 1);
  CHECK(cm1.counts == std::vector<std::uint64_t>{8, 0, 0, 0, 8, 0, 0, 0, 8});

  const auto s = conditional_entropy_series(*run, ConditionalDirection::LabelGivenPred);
  CHECK(s.epochs == std::vector<int>{0, 1});
  CHECK(*s.at(0, 0) == doctest::Approx(std::log2(3.0)));
  CHECK(!s.at(1, 0).has_value());
  CHECK(!s.at(2, 0).has_value());
  for (int c = 0; c < 3; ++c) CHECK(*s.at(c, 1) == 0.0);

  const auto p = conditional_entropy_series(*run, ConditionalDirection::PredGivenLabel);
  for (int c = 0; c < 3; ++c) {
    CHECK(*p.at(c, 0) == 0.0);
    CHECK(*p.at(c, 1) == 0.0);
  }

  CHECK(code_of([&] { confusion(*run, 2); }) == ErrorCode::UnknownEpoch);
  std::filesystem::remove(run->outputs_path(1));
  CHECK(code_of([&] { confusion(*run, 1); }) == ErrorCode::MissingOutputs);
}

TEST_CASE("loss curve passes through") {
  TempDir tmp("perf-loss");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto rows = loss_curve(*run);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].epoch == 1);
  CHECK(rows[0].train_loss == doctest::Approx(0.9));
  CHECK(rows[1].test_accuracy == doctest::Approx(0.75));
}

TEST_CASE("input diversity experiment orders by set size") {
  Rng rng(5);
  std::vector<DiversitySet> sets;
  for (const int size : {40, 10, 20}) {
    PointCloud pc(static_cast<std::size_t>(size) * 3, 4);
    for (auto& v : pc.values) v = rng.normal();
    sets.push_back({size, pc});
  }
  const auto out = input_diversity_experiment(sets, 5);
  REQUIRE(out.size() == 3);
  CHECK(out[0].per_class_size == 10);
  CHECK(out[2].per_class_size == 40);
  CHECK(out[0].bits == inter_sample_entropy(sets[1].points, 5));
  CHECK(out[0].bits < out[1].bits);
  CHECK(out[1].bits < out[2].bits);

  TempDir tmp("perf-div");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const std::vector<std::pair<int, std::shared_ptr<const Run>>> runs = {{8, run}};
  const auto r = input_diversity_experiment(runs, 5);
  const auto raw = read_tensor_file(run->activation_path(0, 0));
  CHECK(r[0].bits == inter_sample_entropy(PointCloud(24, 36, {raw.data.begin(), raw.data.end()}), 5));
}
