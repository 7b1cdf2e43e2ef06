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

#include "cnnslicer/service.hpp"

#include <charconv>
#include <functional>
#include <optional>
#include <vector>

#include "cnnslicer/deconv.hpp"
#include "cnnslicer/perf.hpp"
#include "cnnslicer/png.hpp"
#include "cnnslicer/report.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cnnslicer {

using nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSlice:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DomainError:
      return 400;
    case ErrorCode::UnknownRun:
    case ErrorCode::UnknownLayer:
    case ErrorCode::UnknownEpoch:
    case ErrorCode::UnknownSample:
      return 404;
    case ErrorCode::LayerNotDumped:
    case ErrorCode::MissingOutputs:
    case ErrorCode::MissingSwitches:
    case ErrorCode::EmptySelection:
    case ErrorCode::EmptyInput:
    case ErrorCode::TooFewSamples:
    case ErrorCode::SampleMisalignment:
    case ErrorCode::EmptyHistogram:
      return 422;
    default:
      return 500;
  }
}

std::string api_error_json(const ApiError& e) {
  return json{{"code", e.code}, {"message", e.message}, {"http_status", e.http_status}}.dump();
}

std::shared_ptr<const HttpReply> ReplyCache::find(const std::string& key) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->second;
}

void ReplyCache::insert(const std::string& key, std::shared_ptr<const HttpReply> reply) {
  const std::size_t cost = key.size() + reply->body.size();
  std::lock_guard lock(mutex_);
  if (cost > max_bytes_ || index_.count(key)) return;
  lru_.emplace_front(key, std::move(reply));
  index_[key] = lru_.begin();
  bytes_ += cost;
  while (bytes_ > max_bytes_) {
    const auto& victim = lru_.back();
    bytes_ -= victim.first.size() + victim.second->body.size();
    index_.erase(victim.first);
    lru_.pop_back();
  }
}

std::size_t ReplyCache::bytes() const {
  std::lock_guard lock(mutex_);
  return bytes_;
}

std::size_t ReplyCache::entries() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

namespace {

struct Plan {
  std::string canonical;  // endpoint plus normalized parameters
  std::string fingerprint;
  std::function<HttpReply()> compute;
};

std::optional<std::string> param(const QueryParams& q, const std::string& name) {
  const auto it = q.find(name);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

int parse_int(const std::string& name, const std::string& text) {
  int v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "parameter " + name + " must be an integer, got '" + text + "'");
  }
  return v;
}

int require_int(const QueryParams& q, const std::string& name) {
  const auto v = param(q, name);
  if (!v) throw Error(ErrorCode::InvalidArgument, "missing parameter " + name);
  return parse_int(name, *v);
}

int int_or(const QueryParams& q, const std::string& name, int fallback) {
  const auto v = param(q, name);
  return v ? parse_int(name, *v) : fallback;
}

HttpReply json_reply(const json& j) {
  HttpReply r;
  r.body = j.dump();
  return r;
}

HttpReply png_reply(const Tensor& chw) {
  HttpReply r;
  r.content_type = "image/png";
  const auto bytes = encode_png(normalize_to_image(chw));
  r.body.assign(bytes.begin(), bytes.end());
  return r;
}

std::string sort_name(const SortSpec& s) {
  const char* axis = s.axis == SortAxis::Rows ? "rows" : s.axis == SortAxis::Cols ? "cols" : "both";
  return std::string(axis) + ":" + (s.stat == SortStat::Max ? "max" : "mean");
}

HttpReply error_reply(const ApiError& e) {
  HttpReply r;
  r.status = e.http_status;
  r.body = api_error_json(e);
  return r;
}

}  // namespace

AnalysisService::AnalysisService(ServiceOptions options)
    : options_(std::move(options)), registry_(options_.data_root), cache_(options_.cache_bytes) {}

HttpReply AnalysisService::handle(std::string_view path, const QueryParams& q, std::string_view if_none_match) const {
  Plan plan;
  try {
    constexpr std::string_view kPrefix = "/api/runs";
    if (path.substr(0, kPrefix.size()) != kPrefix) {
      return error_reply({"NotFound", "no endpoint " + std::string(path), 404});
    }
    std::string_view rest = path.substr(kPrefix.size());
    if (!rest.empty() && rest.back() == '/') rest.remove_suffix(1);

    if (rest.empty()) {
      const auto ids = registry_.run_ids();
      std::string joined;
      for (const auto& id : ids) joined += id + "\n";
      plan = {"runs", fnv1a_hex(joined), [ids] { return json_reply(json{{"runs", ids}}); }};
    } else {
      if (rest.front() != '/') return error_reply({"NotFound", "no endpoint " + std::string(path), 404});
      rest.remove_prefix(1);
      const auto slash = rest.find('/');
      const std::string id(rest.substr(0, slash));
      const std::string endpoint = slash == std::string_view::npos ? "" : std::string(rest.substr(slash + 1));
      const auto run = registry_.open(id);
      const std::string base = "run=" + id + "&endpoint=" + endpoint;
      plan.fingerprint = run->fingerprint();

      if (endpoint.empty()) {
        plan.canonical = base;
        plan.compute = [run] { return json_reply(to_json(run->manifest())); };
      } else if (endpoint == "loss") {
        plan.canonical = base;
        plan.compute = [run] { return json_reply(to_json(loss_curve(*run))); };
      } else if (endpoint == "confusion") {
        const int epoch = require_int(q, "epoch");
        run->manifest().require_epoch(epoch);
        plan.canonical = base + "&epoch=" + std::to_string(epoch);
        plan.compute = [run, epoch] { return json_reply(to_json(confusion(*run, epoch))); };
      } else if (endpoint == "conditional") {
        const auto text = param(q, "direction");
        if (!text) throw Error(ErrorCode::InvalidArgument, "missing parameter direction");
        const auto d = parse_conditional_direction(*text);
        plan.canonical = base + "&direction=" + std::string(to_string(d));
        plan.compute = [run, d] { return json_reply(to_json(conditional_entropy_series(*run, d))); };
      } else if (endpoint == "entropy") {
        const auto text = param(q, "slice");
        if (!text) throw Error(ErrorCode::InvalidArgument, "missing parameter slice");
        const auto spec = parse_slice_expression(*text);
        const std::string metric = param(q, "metric").value_or("inter");
        if (metric != "inter" && metric != "intra") {
          throw Error(ErrorCode::InvalidArgument, "metric must be inter or intra");
        }
        const int k = int_or(q, "k", kDefaultNeighbors);
        const int bins = int_or(q, "B", kDefaultBins);
        if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be at least 2");
        if (bins < 1) throw Error(ErrorCode::InvalidArgument, "B must be positive");
        run->validate_slice(spec);
        const std::string slice = format_slice_expression(spec);
        plan.canonical = base + "&slice=" + slice + "&metric=" + metric +
                         (metric == "inter" ? "&k=" + std::to_string(k) : "&B=" + std::to_string(bins));
        plan.compute = [run, spec, slice, metric, k, bins] {
          std::vector<EntropyRow> rows;
          auto cursor = run->slice(spec);
          while (auto block = cursor.next()) {
            if (metric == "inter") {
              EntropyRow r{block->layer.index, block->epoch, spec.channel, 0.0};
              r.bits = inter_sample_entropy(block_points(*block), k);
              rows.push_back(r);
            } else {
              const auto means = block_intra_entropies(*block, bins);
              for (std::size_t i = 0; i < means.size(); ++i) {
                rows.push_back({block->layer.index, block->epoch, block->channels[i], means[i]});
              }
            }
          }
          json j = {{"slice", slice}, {"metric", metric}, {"values", to_json(rows)}};
          if (rows.size() == 1) j["value"] = rows.front().bits;
          return json_reply(j);
        };
      } else if (endpoint == "capacity") {
        const int epoch = require_int(q, "epoch");
        const int li = require_int(q, "li");
        const int lj = require_int(q, "lj");
        const int bins = int_or(q, "B", kDefaultBins);
        if (bins < 1) throw Error(ErrorCode::InvalidArgument, "B must be positive");
        std::optional<SortSpec> sort;
        if (const auto s = param(q, "sort"); s && !s->empty() && *s != "none") sort = parse_sort_spec(*s);
        run->manifest().require_epoch(epoch);
        run->manifest().layer(li);
        run->manifest().layer(lj);
        plan.canonical = base + "&epoch=" + std::to_string(epoch) + "&li=" + std::to_string(li) +
                         "&lj=" + std::to_string(lj) + "&B=" + std::to_string(bins) +
                         "&sort=" + (sort ? sort_name(*sort) : "none");
        plan.compute = [this, run, epoch, li, lj, bins, sort] {
          auto m = capacity_matrix(*run, epoch, li, lj, SampleSelector::all(), bins, &joint_cache_);
          if (sort) m = sort_matrix(std::move(m), sort->axis, sort->stat);
          return json_reply(to_json(m));
        };
      } else if (endpoint == "series") {
        const int layer = require_int(q, "layer");
        const int bins = int_or(q, "B", kDefaultBins);
        if (bins < 1) throw Error(ErrorCode::InvalidArgument, "B must be positive");
        run->manifest().layer(layer);
        plan.canonical = base + "&layer=" + std::to_string(layer) + "&B=" + std::to_string(bins);
        plan.compute = [run, layer, bins] { return json_reply(to_json(channel_entropy_series(*run, layer, bins))); };
      } else if (endpoint == "circlepack") {
        const int layer = require_int(q, "layer");
        const int epoch = require_int(q, "epoch");
        const int bins = int_or(q, "B", kDefaultBins);
        if (bins < 1) throw Error(ErrorCode::InvalidArgument, "B must be positive");
        run->manifest().layer(layer);
        run->manifest().require_epoch(epoch);
        plan.canonical = base + "&layer=" + std::to_string(layer) + "&epoch=" + std::to_string(epoch) +
                         "&B=" + std::to_string(bins);
        plan.compute = [run, layer, epoch, bins] { return json_reply(to_json(circle_pack(*run, layer, epoch, bins))); };
      } else if (endpoint == "deconv" || endpoint == "featuremap") {
        const int epoch = require_int(q, "epoch");
        const int layer = require_int(q, "layer");
        const int channel = require_int(q, "channel");
        const int sample = require_int(q, "sample");
        run->manifest().require_epoch(epoch);
        run->manifest().layer(layer);
        plan.canonical = base + "&epoch=" + std::to_string(epoch) + "&layer=" + std::to_string(layer) +
                         "&channel=" + std::to_string(channel) + "&sample=" + std::to_string(sample);
        const bool project = endpoint == "deconv";
        plan.compute = [run, epoch, layer, channel, sample, project] {
          return png_reply(project ? project_sample(*run, epoch, layer, channel, sample)
                                   : feature_map(*run, epoch, layer, channel, sample));
        };
      } else {
        return error_reply({"NotFound", "no endpoint " + std::string(path), 404});
      }
    }

    const std::string etag = "\"" + fnv1a_hex(plan.canonical + "|" + plan.fingerprint) + "\"";
    if (!if_none_match.empty() && (if_none_match == etag || if_none_match == "*")) {
      HttpReply r;
      r.status = 304;
      r.content_type.clear();
      r.etag = etag;
      return r;
    }
    if (auto hit = cache_.find(etag)) return *hit;
    HttpReply reply = plan.compute();
    reply.etag = etag;
    cache_.insert(etag, std::make_shared<const HttpReply>(reply));
    return reply;
  } catch (const Error& e) {
    return error_reply({std::string(e.name()), e.what(), http_status_for(e.code())});
  } catch (const std::exception& e) {
    return error_reply({"Internal", e.what(), 500});
  }
}

struct HttpFrontend::Impl {
  const AnalysisService& service;
  httplib::Server server;
};

HttpFrontend::HttpFrontend(const AnalysisService& service) : impl_(new Impl{service, {}}) {
  auto& svc = impl_->service;
  const std::string cors = svc.options().cors_origin;
  impl_->server.Get(R"(/.*)", [&svc, cors](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    const auto reply = svc.handle(req.path, q, req.get_header_value("If-None-Match"));
    res.status = reply.status;
    if (!reply.etag.empty()) res.set_header("ETag", reply.etag);
    if (!cors.empty()) res.set_header("Access-Control-Allow-Origin", cors);
    if (reply.status != 304) res.set_content(reply.body, reply.content_type);
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpFrontend::listen() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace cnnslicer
