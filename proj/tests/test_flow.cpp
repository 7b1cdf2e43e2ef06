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

#include "cnnslicer/error.hpp"
#include "cnnslicer/flow.hpp"
#include "cnnslicer/parallel.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support/mini_run.hpp"

using namespace cnnslicer;
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

// Per-sample maps of one channel straight from the dump file.
oracle::Matrix channel_maps(const Run& run, int epoch, int layer, int channel) {
  const auto& d = run.manifest().layer(layer);
  const auto raw = read_tensor_file(run.activation_path(epoch, layer));
  const std::size_t plane = d.channel_size();
  oracle::Matrix m(static_cast<std::size_t>(run.manifest().probe_count));
  for (std::size_t s = 0; s < m.size(); ++s) {
    const float* p = raw.data.data() + (s * d.channels + channel) * plane;
    m[s].assign(p, p + plane);
  }
  return m;
}

double oracle_capacity(const oracle::Matrix& a, const oracle::Matrix& b, int bins) {
  std::vector<double> da, db;
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t q = p + 1; q < a.size(); ++q) {
      da.push_back(oracle::distance(a[p], a[q]));
      db.push_back(oracle::distance(b[p], b[q]));
    }
  const auto [alo, ahi] = std::minmax_element(da.begin(), da.end());
  const auto [blo, bhi] = std::minmax_element(db.begin(), db.end());
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins * bins), 0);
  for (std::size_t t = 0; t < da.size(); ++t) {
    ++counts[static_cast<std::size_t>(oracle::bin_of(da[t], *alo, *ahi, bins) * bins +
                                      oracle::bin_of(db[t], *blo, *bhi, bins))];
  }
  return oracle::mutual_information(counts, bins, bins);
}

double oracle_intra(const std::vector<double>& v, int bins) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (const double x : v) counts[oracle::bin_of(x, *mn, *mx, bins)] += 1.0;
  return oracle::entropy_of_counts(counts);
}

}  // namespace

TEST_CASE("capacity matrix entries equal the oracle mutual information") {
  TempDir tmp("flow");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  for (const int bins : {4, 32}) {
    const auto m = capacity_matrix(*run, 1, 1, 3, SampleSelector::all(), bins);
    CHECK(m.rows == 3);
    CHECK(m.cols == 3);
    CHECK(m.row_order == std::vector<int>{0, 1, 2});
    CHECK(m.col_order == std::vector<int>{0, 1, 2});
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double want = oracle_capacity(channel_maps(*run, 1, 1, a), channel_maps(*run, 1, 3, b), bins);
        CHECK(std::abs(m.at(a, b) - want) <= 1e-9);
      }
  }
}

TEST_CASE("capacity across layers of different widths and a label subset") {
  TempDir tmp("flow-wide");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto m = capacity_matrix(*run, 0, 0, 6, SampleSelector::of_label(1), 8);
  CHECK(m.rows == 1);
  CHECK(m.cols == 1);
  const auto ids = run->samples().ids_with_label(1);
  const auto a = channel_maps(*run, 0, 0, 0), b = channel_maps(*run, 0, 6, 0);
  oracle::Matrix sa, sb;
  for (const int r : ids) {
    sa.push_back(a[static_cast<std::size_t>(r)]);
    sb.push_back(b[static_cast<std::size_t>(r)]);
  }
  CHECK(std::abs(m.at(0, 0) - oracle_capacity(sa, sb, 8)) <= 1e-9);
}

TEST_CASE("same-layer capacity is symmetric with entropy on the diagonal") {
  TempDir tmp("flow-sym");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto m = capacity_matrix(*run, 0, 2, 2);
  for (std::size_t a = 0; a < m.rows; ++a) {
    for (std::size_t b = 0; b < m.cols; ++b) CHECK(std::abs(m.at(a, b) - m.at(b, a)) <= 1e-12);
    CHECK(m.at(a, a) >= m.at(a, (a + 1) % m.cols) - 1e-12);
  }
  const auto unsorted = sort_matrix(m, SortAxis::Both, SortStat::Max);
  CHECK(unsorted.values == m.values);
}

TEST_CASE("sort_matrix only permutes the display orders") {
  CapacityMatrix m;
  m.rows = 3;
  m.cols = 4;
  m.values = {0.5, 0.1, 0.9, 0.1,  //
              0.2, 0.1, 0.3, 0.1,  //
              0.7, 0.1, 0.1, 0.1};
  m.row_order = {0, 1, 2};
  m.col_order = {0, 1, 2, 3};

  const auto by_col_max = sort_matrix(m, SortAxis::Cols, SortStat::Max);
  CHECK(by_col_max.values == m.values);
  CHECK(by_col_max.col_order == std::vector<int>{1, 3, 0, 2});  // ties keep index order
  CHECK(by_col_max.row_order == m.row_order);

  const auto by_row_mean = sort_matrix(m, SortAxis::Rows, SortStat::Mean);
  CHECK(by_row_mean.row_order == std::vector<int>{1, 2, 0});
  CHECK(by_row_mean.col_order == m.col_order);

  const auto both = sort_matrix(m, SortAxis::Both, SortStat::Max);
  CHECK(both.row_order == std::vector<int>{1, 2, 0});
  CHECK(both.col_order == by_col_max.col_order);
  CHECK(sort_matrix(both, SortAxis::Both, SortStat::Max).row_order == both.row_order);

  CHECK(parse_sort_spec("cols:max").axis == SortAxis::Cols);
  CHECK(parse_sort_spec("rows:mean").stat == SortStat::Mean);
  CHECK(parse_sort_spec("both").stat == SortStat::Max);
  CHECK(code_of([] { parse_sort_spec("diag:max"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { parse_sort_spec("cols:median"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("joint histogram cache is reused and bounded") {
  TempDir tmp("flow-cache");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  JointHistogramCache cache(2);
  const auto a = capacity_matrix(*run, 0, 1, 3, SampleSelector::all(), 32, &cache);
  CHECK(cache.size() == 1);
  const auto b = capacity_matrix(*run, 0, 1, 3, SampleSelector::all(), 32, &cache);
  CHECK(cache.size() == 1);
  CHECK(a.values == b.values);
  capacity_matrix(*run, 1, 1, 3, SampleSelector::all(), 32, &cache);
  capacity_matrix(*run, 0, 2, 3, SampleSelector::all(), 32, &cache);
  CHECK(cache.size() == 2);
}

TEST_CASE("capacity results do not depend on the thread count") {
  TempDir tmp("flow-threads");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  set_thread_count(1);
  const auto a = capacity_matrix(*run, 0, 1, 2);
  set_thread_count(5);
  const auto b = capacity_matrix(*run, 0, 1, 2);
  set_thread_count(0);
  CHECK(a.values == b.values);
}

TEST_CASE("capacity errors") {
  TempDir tmp("flow-errors");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  CHECK(code_of([&] { capacity_matrix(*run, 0, 1, 4); }) == ErrorCode::LayerNotDumped);
  CHECK(code_of([&] { capacity_matrix(*run, 7, 1, 3); }) == ErrorCode::UnknownEpoch);
  CHECK(code_of([&] { capacity_matrix(*run, 0, 1, 9); }) == ErrorCode::UnknownLayer);
  CHECK(code_of([&] { capacity_matrix(*run, 0, 1, 3, SampleSelector::of_ids({3})); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("layer inter entropy uses the flattened layer outputs") {
  TempDir tmp("flow-inter");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto raw = read_tensor_file(run->activation_path(1, 3));
  PointCloud pc(24, 27, std::vector<double>(raw.data.begin(), raw.data.end()));
  CHECK(layer_inter_entropy(*run, 1, 3, SampleSelector::all(), 5) == inter_sample_entropy(pc, 5));
  CHECK(code_of([&] { layer_inter_entropy(*run, 1, 3, SampleSelector::of_label(0), 15); }) ==
        ErrorCode::TooFewSamples);
}

TEST_CASE("channel intra entropy is the mean per-sample entropy") {
  TempDir tmp("flow-intra");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  for (int c = 0; c < 3; ++c) {
    const auto maps = channel_maps(*run, 0, 2, c);
    double sum = 0.0;
    for (int r = 0; r < 24; r += 3) sum += oracle_intra(maps[static_cast<std::size_t>(r)], 16);
    CHECK(std::abs(channel_intra_entropy(*run, 0, 2, c, SampleSelector::of_label(0), 16) - sum / 8.0) <= 1e-9);
  }
}

TEST_CASE("channel entropy series agrees exactly with direct queries") {
  TempDir tmp("flow-series");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto s = channel_entropy_series(*run, 3);
  CHECK(s.channels == 3);
  CHECK(s.groups() == 4);
  CHECK(s.epochs == std::vector<int>{0, 1});
  for (int c = 0; c < 3; ++c) {
    for (std::size_t e = 0; e < 2; ++e) {
      for (int g = 0; g < 3; ++g) {
        CHECK(s.at(c, g, e) == channel_intra_entropy(*run, s.epochs[e], 3, c, SampleSelector::of_label(g)));
      }
      CHECK(s.at(c, s.all_group(), e) == channel_intra_entropy(*run, s.epochs[e], 3, c));
    }
  }
  CHECK(code_of([&] { channel_entropy_series(*run, 5); }) == ErrorCode::LayerNotDumped);
}

TEST_CASE("circle pack nests channels under classes") {
  TempDir tmp("flow-circle");
  const auto run = Run::open(testsupport::write_mini_run(tmp.path() / "run"));
  const auto s = channel_entropy_series(*run, 1);
  const auto tree = circle_pack(*run, 1, 1);
  const auto from_series = circle_pack(s, 1);
  REQUIRE(tree.classes.size() == 3);
  for (std::size_t g = 0; g < 3; ++g) {
    const auto& node = tree.classes[g];
    CHECK(node.label == static_cast<int>(g));
    REQUIRE(node.children.size() == 3);
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(node.children[c].size == s.at(static_cast<int>(c), static_cast<int>(g), 1));
      CHECK(node.children[c].size == from_series.classes[g].children[c].size);
      total += node.children[c].size;
    }
    CHECK(node.size == doctest::Approx(total).epsilon(1e-15));
  }
  CHECK(code_of([&] { circle_pack(s, 4); }) == ErrorCode::UnknownEpoch);
}
