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

#include "cnnslicer/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "cnnslicer/deconv.hpp"
#include "cnnslicer/error.hpp"
#include "cnnslicer/flow.hpp"
#include "cnnslicer/parallel.hpp"
#include "cnnslicer/perf.hpp"
#include "cnnslicer/png.hpp"
#include "cnnslicer/report.hpp"
#include "cnnslicer/service.hpp"
#include "json.hpp"

namespace cnnslicer {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void emit(std::ostream& out, const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_text(out_path, text);
  }
}

// "a.csv" -> "a.<tag>.csv"
fs::path sibling(const fs::path& p, const std::string& tag) {
  return p.parent_path() / (p.stem().string() + "." + tag + p.extension().string());
}

std::string default_data_root() {
  if (const char* env = std::getenv("CNNSLICER_DATA_ROOT"); env && *env) return env;
  return "cnnslicer-data";
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << nlohmann::json{{"code", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slice and analyze dumped CNN activations", "cnnslicer"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags win");

  std::string data_root = default_data_root();
  unsigned threads = 0;
  app.add_option("--data-root", data_root, "Registry directory (env CNNSLICER_DATA_ROOT)");
  app.add_option("--threads", threads, "Worker threads, 0 = hardware concurrency");

  std::string run_id, out_path, slice, metric = "inter", sort, layers_text;
  int k = kDefaultNeighbors, bins = kDefaultBins, epoch = 0, layer = 0, channel = 0, sample = 0;

  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a dump directory and register it");
  std::string dump_dir;
  ingest_cmd->add_option("dir", dump_dir, "Dump directory")->required();

  auto* query_cmd = app.add_subcommand("query", "Entropy of a slice");
  query_cmd->add_option("--run", run_id)->required();
  query_cmd->add_option("--slice", slice, "x=...;l=...;c=...;t=...")->required();
  query_cmd->add_option("--metric", metric)->check(CLI::IsMember({"inter", "intra"}));
  query_cmd->add_option("-k,--k", k, "Neighbors for inter-sample entropy");
  query_cmd->add_option("-B,--bins", bins, "Bins for intra-sample entropy");
  query_cmd->add_option("--out", out_path);

  auto* capacity_cmd = app.add_subcommand("capacity", "Channel capacity matrix between two layers");
  capacity_cmd->add_option("--run", run_id)->required();
  capacity_cmd->add_option("--epoch", epoch)->required();
  capacity_cmd->add_option("--layers", layers_text, "li,lj")->required();
  capacity_cmd->add_option("--sort", sort, "rows|cols|both:max|mean");
  capacity_cmd->add_option("-B,--bins", bins);
  capacity_cmd->add_option("--out", out_path, "Matrix CSV; order files are written beside it");

  auto* perf_cmd = app.add_subcommand("perf", "Confusion matrices, conditional entropies and loss");
  perf_cmd->add_option("--run", run_id)->required();
  perf_cmd->add_option("--out-dir", out_path)->required();

  auto* series_cmd = app.add_subcommand("series", "Per-channel, per-class entropy over epochs");
  series_cmd->add_option("--run", run_id)->required();
  series_cmd->add_option("--layer", layer)->required();
  series_cmd->add_option("-B,--bins", bins);
  series_cmd->add_option("--out", out_path);

  auto* circle_cmd = app.add_subcommand("circlepack", "Class/channel hierarchy as JSON");
  circle_cmd->add_option("--run", run_id)->required();
  circle_cmd->add_option("--layer", layer)->required();
  circle_cmd->add_option("--epoch", epoch)->required();
  circle_cmd->add_option("-B,--bins", bins);
  circle_cmd->add_option("--out", out_path);

  auto* deconv_cmd = app.add_subcommand("deconv", "Project one channel of one sample to input space");
  bool raw_map = false;
  deconv_cmd->add_option("--run", run_id)->required();
  deconv_cmd->add_option("--epoch", epoch)->required();
  deconv_cmd->add_option("--layer", layer)->required();
  deconv_cmd->add_option("--channel", channel)->required();
  deconv_cmd->add_option("--sample", sample)->required();
  deconv_cmd->add_flag("--feature-map", raw_map, "Write the dumped activation instead of the projection");
  deconv_cmd->add_option("--out", out_path)->required();

  auto* diversity_cmd = app.add_subcommand("diversity", "Inter-sample entropy of input sets of growing size");
  std::vector<std::string> sets;
  diversity_cmd->add_option("--set", sets, "SIZE=path.npy, one [N, D] array per set")->required();
  diversity_cmd->add_option("-k,--k", k);
  diversity_cmd->add_option("--out", out_path);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP analysis service");
  std::string host = "127.0.0.1", cors;
  int port = 8080;
  std::size_t cache_mb = 512;
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--cache-mb", cache_mb);
  serve_cmd->add_option("--cors-origin", cors);

  std::vector<std::string> argv_rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "Usage", e.what());
    return kExitUsage;
  }

  try {
    set_thread_count(threads);
    Registry registry(data_root);
    auto open = [&] { return registry.open(run_id); };

    if (*ingest_cmd) {
      const auto m = registry.register_run(dump_dir);
      out << m.run_id << "\n";
    } else if (*query_cmd) {
      const auto run = open();
      const auto spec = parse_slice_expression(slice);
      run->validate_slice(spec);
      std::vector<EntropyRow> rows;
      auto cursor = run->slice(spec);
      while (auto block = cursor.next()) {
        if (metric == "inter") {
          rows.push_back({block->layer.index, block->epoch, spec.channel, inter_sample_entropy(block_points(*block), k)});
        } else {
          const auto means = block_intra_entropies(*block, bins);
          for (std::size_t i = 0; i < means.size(); ++i) {
            rows.push_back({block->layer.index, block->epoch, block->channels[i], means[i]});
          }
        }
      }
      emit(out, out_path, entropy_csv(rows));
    } else if (*capacity_cmd) {
      const auto comma = layers_text.find(',');
      int li = 0, lj = 0;
      try {
        if (comma == std::string::npos) throw std::invalid_argument("");
        std::size_t used = 0;
        li = std::stoi(layers_text.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("");
        lj = std::stoi(layers_text.substr(comma + 1), &used);
        if (used != layers_text.size() - comma - 1) throw std::invalid_argument("");
      } catch (const std::logic_error&) {
        print_error(err, "Usage", "--layers expects two integers, e.g. 3,4");
        return kExitUsage;
      }
      std::optional<SortSpec> spec;
      if (!sort.empty()) {
        try {
          spec = parse_sort_spec(sort);
        } catch (const Error& e) {
          print_error(err, "Usage", e.what());
          return kExitUsage;
        }
      }
      const auto run = open();
      auto m = capacity_matrix(*run, epoch, li, lj, SampleSelector::all(), bins);
      if (spec) m = sort_matrix(std::move(m), spec->axis, spec->stat);
      emit(out, out_path, capacity_csv(m));
      if (!out_path.empty()) {
        write_text(sibling(out_path, "row_order"), order_csv(m.row_order));
        write_text(sibling(out_path, "col_order"), order_csv(m.col_order));
      }
    } else if (*perf_cmd) {
      const auto run = open();
      const fs::path dir = out_path;
      for (const int t : run->manifest().epochs) {
        write_text(dir / ("confusion_epoch_" + std::to_string(t) + ".csv"), confusion_csv(confusion(*run, t)));
      }
      for (const auto d : {ConditionalDirection::LabelGivenPred, ConditionalDirection::PredGivenLabel}) {
        write_text(dir / ("conditional_" + std::string(to_string(d)) + ".csv"),
                   conditional_csv(conditional_entropy_series(*run, d)));
      }
      write_text(dir / "loss.csv", loss_csv(loss_curve(*run)));
    } else if (*series_cmd) {
      const auto run = open();
      emit(out, out_path, series_csv(channel_entropy_series(*run, layer, bins)));
    } else if (*circle_cmd) {
      const auto run = open();
      emit(out, out_path, to_json(circle_pack(*run, layer, epoch, bins)).dump(2) + "\n");
    } else if (*deconv_cmd) {
      const auto run = open();
      const auto chw = raw_map ? feature_map(*run, epoch, layer, channel, sample)
                               : project_sample(*run, epoch, layer, channel, sample);
      write_png(out_path, normalize_to_image(chw));
    } else if (*diversity_cmd) {
      std::vector<DiversitySet> inputs;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        int size = 0;
        try {
          if (eq == std::string::npos) throw std::invalid_argument("");
          size = std::stoi(s.substr(0, eq));
        } catch (const std::logic_error&) {
          print_error(err, "Usage", "--set expects SIZE=path.npy, got '" + s + "'");
          return kExitUsage;
        }
        const auto t = read_tensor_file(s.substr(eq + 1));
        if (t.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "diversity sets must be [N, D] arrays");
        PointCloud pc{t.dim(0), t.dim(1), std::vector<double>(t.data.begin(), t.data.end())};
        inputs.push_back({size, std::move(pc)});
      }
      emit(out, out_path, diversity_csv(input_diversity_experiment(inputs, k)));
    } else if (*serve_cmd) {
      AnalysisService service({data_root, cache_mb << 20, cors});
      HttpFrontend http(service);
      const int bound = http.bind(host, port);
      err << "listening on " << host << ":" << bound << "\n";
      http.listen();
    }
    return kExitOk;
  } catch (const Error& e) {
    print_error(err, std::string(e.name()), e.what());
    return kExitData;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what());
    return kExitData;
  }
}

}  // namespace cnnslicer
