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

#include <algorithm>
#include <sstream>

#include "cnnslicer/cli.hpp"
#include "cnnslicer/png.hpp"
#include "cnnslicer/report.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/mini_run.hpp"

using namespace cnnslicer;
using nlohmann::json;
using testsupport::read_text_file;
using testsupport::TempDir;

namespace fs = std::filesystem;

namespace {

const fs::path kGolden = CNNSLICER_GOLDEN_DIR;

struct Cli {
  TempDir tmp{"cli"};
  fs::path root = tmp.path() / "root";
  std::string out, err;

  Cli() {
    testsupport::MiniRunOptions o;
    std::vector<int> all_zero(24, 0), perfect;
    for (int i = 0; i < 24; ++i) perfect.push_back(i % 3);
    o.predictions[0] = all_zero;
    o.predictions[1] = perfect;
    testsupport::write_mini_run(tmp.path() / "dump", o);
  }

  int operator()(std::vector<std::string> args) {
    args.insert(args.begin(), {"cnnslicer", "--data-root", root.string()});
    std::ostringstream o, e;
    const int rc = run_cli(args, o, e);
    out = o.str();
    err = e.str();
    return rc;
  }

  int ingest() { return (*this)({"ingest", (tmp.path() / "dump").string()}); }
};

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1.584962500721156) == "1.58496");
  CHECK(format_number(1e-7) == "1e-07");
}

TEST_CASE("csv layouts") {
  CHECK(entropy_csv({{3, 6, std::nullopt, 2.5}}) == "layer,epoch,bits\n3,6,2.5\n");
  CHECK(entropy_csv({{1, 0, 2, 0.25}, {1, 0, 3, 1.0}}) == "layer,epoch,channel,bits\n1,0,2,0.25\n1,0,3,1\n");
  CHECK(order_csv({2, 0, 1}) == "rank,channel\n0,2\n1,0\n2,1\n");
  CapacityMatrix m;
  m.layer_i = 1;
  m.layer_j = 3;
  m.rows = 2;
  m.cols = 2;
  m.values = {0.5, 0.25, 1.0, 0.125};
  m.row_order = {1, 0};
  m.col_order = {0, 1};
  CHECK(capacity_csv(m) == "channel_i,0,1\n1,1,0.125\n0,0.5,0.25\n");
  CHECK(diversity_csv({{100, 14.25}, {500, 16.5}}) == "per_class_size,bits\n100,14.25\n500,16.5\n");
  ChannelEntropySeries s;
  s.layer = 2;
  s.channels = 1;
  s.num_classes = 1;
  s.epochs = {0, 3};
  s.values = {1, 2, 3, 4};
  CHECK(series_csv(s) == "channel,class,epoch,bits\n0,0,0,1\n0,0,3,2\n0,all,0,3\n0,all,3,4\n");
}

TEST_CASE("ingest then perf reproduces the golden files") {
  Cli cli;
  REQUIRE(cli.ingest() == kExitOk);
  CHECK(cli.out == "mini\n");
  const auto dir = cli.tmp.path() / "perf";
  REQUIRE(cli({"perf", "--run", "mini", "--out-dir", dir.string()}) == kExitOk);
  for (const auto& entry : fs::directory_iterator(kGolden / "perf")) {
    const auto name = entry.path().filename();
    INFO(name.string());
    CHECK(read_text_file(dir / name) == read_text_file(entry.path()));
  }
}

TEST_CASE("query, capacity and series outputs") {
  Cli cli;
  REQUIRE(cli.ingest() == kExitOk);
  REQUIRE(cli({"query", "--run", "mini", "--slice", "x=*;l=3;c=*;t=*", "--metric", "intra"}) == kExitOk);
  CHECK(cli.out.rfind("layer,epoch,channel,bits\n", 0) == 0);
  CHECK(std::count(cli.out.begin(), cli.out.end(), '\n') == 7);

  const auto csv = cli.tmp.path() / "cap.csv";
  REQUIRE(cli({"capacity", "--run", "mini", "--epoch", "1", "--layers", "1,3", "--sort", "both:mean", "--out",
               csv.string()}) == kExitOk);
  CHECK(read_text_file(csv).rfind("channel_i,", 0) == 0);
  const auto rows = read_text_file(cli.tmp.path() / "cap.row_order.csv");
  CHECK(rows.rfind("rank,channel\n", 0) == 0);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 4);
  CHECK(fs::exists(cli.tmp.path() / "cap.col_order.csv"));

  REQUIRE(cli({"series", "--run", "mini", "--layer", "2"}) == kExitOk);
  // 3 channels x (3 classes + all) x 2 epochs
  CHECK(std::count(cli.out.begin(), cli.out.end(), '\n') == 25);

  const auto pack = cli.tmp.path() / "pack.json";
  REQUIRE(cli({"circlepack", "--run", "mini", "--layer", "3", "--epoch", "0", "--out", pack.string()}) == kExitOk);
  CHECK(json::parse(read_text_file(pack)).at("children").size() == 3);

  const auto png = cli.tmp.path() / "p.png";
  REQUIRE(cli({"deconv", "--run", "mini", "--epoch", "0", "--layer", "3", "--channel", "0", "--sample", "2", "--out",
               png.string()}) == kExitOk);
  const auto bytes = read_text_file(png);
  const auto img = decode_png(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  CHECK(img.width == 6);
}

TEST_CASE("exit codes and error reporting") {
  Cli cli;
  CHECK(cli({"query"}) == kExitUsage);
  CHECK(cli({"bogus"}) == kExitUsage);
  CHECK(cli({}) == kExitUsage);
  REQUIRE(cli.ingest() == kExitOk);

  CHECK(cli({"query", "--run", "mini", "--slice", "x=*;l=4;c=*;t=0"}) == kExitData);
  CHECK(json::parse(cli.err).at("code") == "LayerNotDumped");
  CHECK(cli({"query", "--run", "ghost", "--slice", "x=*;l=1;c=*;t=0"}) == kExitData);
  CHECK(json::parse(cli.err).at("code") == "UnknownRun");
  CHECK(cli({"query", "--run", "mini", "--slice", "l=one;c=*"}) == kExitData);
  CHECK(json::parse(cli.err).at("code") == "InvalidSlice");
  CHECK(cli({"capacity", "--run", "mini", "--epoch", "0", "--layers", "1"}) == kExitUsage);
  CHECK(cli({"capacity", "--run", "mini", "--epoch", "0", "--layers", "1,3", "--sort", "up"}) == kExitUsage);
  CHECK(cli({"ingest", (cli.tmp.path() / "missing").string()}) == kExitData);
}

TEST_CASE("options can come from a config file") {
  Cli cli;
  REQUIRE(cli.ingest() == kExitOk);
  const auto cfg = cli.tmp.path() / "cs.toml";
  testsupport::write_text_file(cfg, "data-root = \"" + cli.root.string() + "\"\n");
  std::ostringstream o, e;
  CHECK(run_cli({"cnnslicer", "--config", cfg.string(), "perf", "--run", "mini", "--out-dir",
                 (cli.tmp.path() / "p").string()},
                o, e) == kExitOk);
}
