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

// Read-only HTTP facade over the analysis modules. AnalysisService::handle is
// the whole request logic and can be called without a socket; HttpFrontend
// binds it to cpp-httplib.

#pragma once

#include <cstddef>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "cnnslicer/error.hpp"
#include "cnnslicer/flow.hpp"
#include "cnnslicer/tensor_store.hpp"

namespace cnnslicer {

struct ServiceOptions {
  std::filesystem::path data_root;
  std::size_t cache_bytes = std::size_t{512} << 20;
  std::string cors_origin;  // empty: no CORS header
};

struct ApiError {
  std::string code;
  std::string message;
  int http_status = 500;
};

/// 400 parse errors, 404 unknown run/layer/epoch/sample, 422 valid but
/// unsatisfiable, 500 everything else.
int http_status_for(ErrorCode code) noexcept;
std::string api_error_json(const ApiError& e);

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::string etag;
};

using QueryParams = std::map<std::string, std::string>;

/// LRU over reply bodies, bounded by total key + body bytes.
class ReplyCache {
 public:
  explicit ReplyCache(std::size_t max_bytes) : max_bytes_(max_bytes) {}
  std::shared_ptr<const HttpReply> find(const std::string& key);
  void insert(const std::string& key, std::shared_ptr<const HttpReply> reply);
  std::size_t bytes() const;
  std::size_t entries() const;

 private:
  using Item = std::pair<std::string, std::shared_ptr<const HttpReply>>;
  mutable std::mutex mutex_;
  std::size_t max_bytes_;
  std::size_t bytes_ = 0;
  std::list<Item> lru_;
  std::unordered_map<std::string, std::list<Item>::iterator> index_;
};

class AnalysisService {
 public:
  explicit AnalysisService(ServiceOptions options);

  /// `path` without the query string. An `if_none_match` equal to the reply's
  /// ETag yields 304 with an empty body.
  HttpReply handle(std::string_view path, const QueryParams& params, std::string_view if_none_match = {}) const;

  const ServiceOptions& options() const noexcept { return options_; }
  const ReplyCache& cache() const noexcept { return cache_; }

 private:
  ServiceOptions options_;
  Registry registry_;
  mutable ReplyCache cache_;
  mutable JointHistogramCache joint_cache_;
};

class HttpFrontend {
 public:
  explicit HttpFrontend(const AnalysisService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cnnslicer
