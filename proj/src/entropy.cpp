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

#include "cnnslicer/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "cnnslicer/error.hpp"
#include "cnnslicer/parallel.hpp"

namespace cnnslicer {

double information_content(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw Error(ErrorCode::DomainError, "probability " + std::to_string(p) + " outside (0, 1]");
  }
  return -std::log2(p);
}

DiscreteDistribution::DiscreteDistribution(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw Error(ErrorCode::EmptyInput, "empty distribution");
  double sum = 0.0;
  for (const double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::DomainError, "negative or non-finite probability");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::DomainError, "probabilities sum to " + std::to_string(sum));
  }
}

DiscreteDistribution DiscreteDistribution::from_counts(std::span<const std::uint64_t> counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no counts");
  std::vector<double> p(counts.size());
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) * inv;
  return DiscreteDistribution(std::move(p));
}

double shannon_entropy(const DiscreteDistribution& d) {
  double h = 0.0;
  for (const double p : d.p()) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

namespace {

double entropy_of_counts(std::span<const std::uint64_t> counts) {
  return shannon_entropy(DiscreteDistribution::from_counts(counts));
}

// Four independent accumulators let the compiler vectorize without
// reassociating, so the result is reproducible across builds.
inline double squared_distance(const double* a, const double* b, std::size_t dim) noexcept {
  // 16 independent partial sums keep the vector units busy; the reduction
  // order is fixed, so results do not depend on the caller.
  double acc[16] = {};
  std::size_t t = 0;
  for (; t + 16 <= dim; t += 16) {
    for (int l = 0; l < 16; ++l) {
      const double d = a[t + l] - b[t + l];
      acc[l] += d * d;
    }
  }
  for (int l = 0; t < dim; ++t, ++l) {
    const double d = a[t] - b[t];
    acc[l] += d * d;
  }
  for (int w = 8; w >= 1; w /= 2) {
    for (int l = 0; l < w; ++l) acc[l] += acc[l + w];
  }
  return acc[0];
}

// Bounded max-heap keeping the k smallest (distance, index) pairs.
class TopK {
 public:
  explicit TopK(int k) : k_(static_cast<std::size_t>(k)) { items_.reserve(k_); }

  void offer(double dist, std::uint32_t id) {
    const Item item{dist, id};
    if (items_.size() < k_) {
      items_.push_back(item);
      std::push_heap(items_.begin(), items_.end());
    } else if (item < items_.front()) {
      std::pop_heap(items_.begin(), items_.end());
      items_.back() = item;
      std::push_heap(items_.begin(), items_.end());
    }
  }

  void drain(std::uint32_t* ids, double* dists) {
    std::sort(items_.begin(), items_.end());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      ids[i] = items_[i].id;
      dists[i] = items_[i].dist;
    }
  }

 private:
  struct Item {
    double dist;
    std::uint32_t id;
    bool operator<(const Item& o) const noexcept {
      return dist < o.dist || (dist == o.dist && id < o.id);
    }
  };
  std::size_t k_;
  std::vector<Item> items_;
};

constexpr std::size_t kTile = 32;

}  // namespace

PointCloud::PointCloud(std::size_t rows, std::size_t cols)
    : n(rows), dim(cols), values(rows * cols, 0.0) {}

PointCloud::PointCloud(std::size_t rows, std::size_t cols, std::vector<double> data)
    : n(rows), dim(cols), values(std::move(data)) {
  if (values.size() != rows * cols) {
    throw Error(ErrorCode::ShapeMismatch, "point cloud data does not match rows x cols");
  }
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_distance(a.data(), b.data(), std::min(a.size(), b.size())));
}

SigmaSolution solve_sigma(std::span<const double> dists) {
  const std::size_t k = dists.size();
  if (k < 2) throw Error(ErrorCode::DomainError, "solve_sigma needs k >= 2 distances");
  for (const double d : dists) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::DomainError, "neighbor distances must be finite and non-negative");
    }
  }
  const double target = std::log2(static_cast<double>(k));
  const auto residual = [&](double sigma) {
    double sum = 0.0;
    for (const double d : dists) sum += std::exp(-d / sigma);
    return sum - target;
  };

  SigmaSolution out;
  const double at_min = residual(kSigmaMin);
  if (at_min >= -kSigmaTolerance) {
    out.sigma = kSigmaMin;
    out.residual = at_min;
    out.degenerate = at_min > kSigmaTolerance;
    return out;
  }

  double lo = kSigmaMin;
  double hi = kSigmaMax;
  double mid = 1.0;
  double r = 0.0;
  int it = 0;
  while (it < kSigmaMaxIterations) {
    ++it;
    mid = std::sqrt(lo) * std::sqrt(hi);
    r = residual(mid);
    if (std::abs(r) <= kSigmaTolerance) break;
    if (r > 0.0) hi = mid;
    else lo = mid;
  }
  out.sigma = mid;
  out.residual = r;
  out.iterations = it;
  return out;
}

SmoothKnnParams knn_search(const PointCloud& points, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  const std::size_t n = points.n;
  if (n < static_cast<std::size_t>(k) + 1) {
    throw Error(ErrorCode::TooFewSamples,
                "kNN with k=" + std::to_string(k) + " needs at least " + std::to_string(k + 1) +
                    " samples, got " + std::to_string(n));
  }
  SmoothKnnParams out;
  out.n = n;
  out.k = k;
  out.neighbor_ids.resize(n * k);
  out.neighbor_dists.resize(n * k);

  const std::size_t dim = points.dim;
  const double* base = points.values.data();
  const std::size_t blocks = (n + kTile - 1) / kTile;

  if (thread_count() <= 1) {
    // One pass over the upper triangle; each distance feeds both rows.
    std::vector<TopK> heaps(n, TopK(k));
    for (std::size_t bi = 0; bi < blocks; ++bi) {
      const std::size_t i0 = bi * kTile, i1 = std::min(n, i0 + kTile);
      for (std::size_t bj = bi; bj < blocks; ++bj) {
        const std::size_t j0 = bj * kTile, j1 = std::min(n, j0 + kTile);
        for (std::size_t i = i0; i < i1; ++i) {
          const double* xi = base + i * dim;
          for (std::size_t j = std::max(j0, i + 1); j < j1; ++j) {
            const double d = std::sqrt(squared_distance(xi, base + j * dim, dim));
            heaps[i].offer(d, static_cast<std::uint32_t>(j));
            heaps[j].offer(d, static_cast<std::uint32_t>(i));
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      heaps[i].drain(&out.neighbor_ids[i * k], &out.neighbor_dists[i * k]);
    }
  } else {
    // Rows are independent; the kth-smallest set under (distance, index) is
    // unique, so this agrees exactly with the sequential path.
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const std::size_t i0 = bi * kTile, i1 = std::min(n, i0 + kTile);
        std::vector<TopK> heaps(i1 - i0, TopK(k));
        for (std::size_t bj = 0; bj < blocks; ++bj) {
          const std::size_t j0 = bj * kTile, j1 = std::min(n, j0 + kTile);
          for (std::size_t i = i0; i < i1; ++i) {
            const double* xi = base + i * dim;
            for (std::size_t j = j0; j < j1; ++j) {
              if (j == i) continue;
              const double d = std::sqrt(squared_distance(xi, base + j * dim, dim));
              heaps[i - i0].offer(d, static_cast<std::uint32_t>(j));
            }
          }
        }
        for (std::size_t i = i0; i < i1; ++i) {
          heaps[i - i0].drain(&out.neighbor_ids[i * k], &out.neighbor_dists[i * k]);
        }
      }
    });
  }
  return out;
}

ConditionalAffinity knn_affinities(const PointCloud& points, int k) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be at least 2");
  ConditionalAffinity out;
  out.knn = knn_search(points, k);
  const std::size_t n = out.knn.n;
  out.knn.sigma.resize(n);
  out.knn.degenerate.resize(n);
  out.prob.resize(n * k);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::span<const double> row(&out.knn.neighbor_dists[i * k], static_cast<std::size_t>(k));
      const auto sol = solve_sigma(row);
      out.knn.sigma[i] = sol.sigma;
      out.knn.degenerate[i] = sol.degenerate ? 1 : 0;
      for (int j = 0; j < k; ++j) out.prob[i * k + j] = std::exp(-row[j] / sol.sigma);
    }
  });
  return out;
}

double PairwiseAffinity::at(std::uint32_t i, std::uint32_t j) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{i, j},
                                   [](const AffinityEntry& e, const std::pair<std::uint32_t, std::uint32_t>& key) {
                                     return e.i < key.first || (e.i == key.first && e.j < key.second);
                                   });
  if (it != entries.end() && it->i == i && it->j == j) return it->p;
  return 0.0;
}

double PairwiseAffinity::total() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.p;
  return sum;
}

PairwiseAffinity symmetrize_normalize(const ConditionalAffinity& cond) {
  const std::size_t n = cond.knn.n;
  const std::size_t k = static_cast<std::size_t>(cond.knn.k);

  // One record per directed kNN edge, keyed by its unordered pair.
  struct Edge {
    std::uint32_t lo, hi;
    bool forward;  // true when the edge is lo -> hi
    double p;
  };
  std::vector<Edge> edges;
  edges.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const auto src = static_cast<std::uint32_t>(i);
      const auto dst = cond.knn.neighbor_ids[i * k + t];
      edges.push_back({std::min(src, dst), std::max(src, dst), src < dst, cond.prob[i * k + t]});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    if (a.hi != b.hi) return a.hi < b.hi;
    return a.forward > b.forward;
  });

  PairwiseAffinity out;
  out.n = n;
  out.entries.reserve(edges.size() * 2);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t e = 0; e < edges.size();) {
    double p_hi_given_lo = 0.0;
    double p_lo_given_hi = 0.0;
    std::size_t f = e;
    for (; f < edges.size() && edges[f].lo == edges[e].lo && edges[f].hi == edges[e].hi; ++f) {
      (edges[f].forward ? p_hi_given_lo : p_lo_given_hi) = edges[f].p;
    }
    const double p = (p_hi_given_lo + p_lo_given_hi) * scale;
    out.entries.push_back({edges[e].lo, edges[e].hi, p});
    out.entries.push_back({edges[e].hi, edges[e].lo, p});
    e = f;
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const AffinityEntry& a, const AffinityEntry& b) {
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  });

  const double total = out.total();
  if (!(total > 0.0)) throw Error(ErrorCode::DomainError, "affinity table has zero mass");
  for (auto& e : out.entries) e.p /= total;
  return out;
}

double inter_sample_entropy(const PointCloud& points, int k) {
  const auto joint = symmetrize_normalize(knn_affinities(points, k));
  std::vector<double> p(joint.entries.size());
  std::transform(joint.entries.begin(), joint.entries.end(), p.begin(),
                 [](const AffinityEntry& e) { return e.p; });
  return shannon_entropy(DiscreteDistribution(std::move(p)));
}

// ---------------------------------------------------------------------------

std::uint64_t Histogram1D::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

int bin_index(double v, double lo, double hi, int bins) noexcept {
  if (!(hi > lo)) return 0;
  const double t = (v - lo) / (hi - lo);
  const auto b = static_cast<long long>(std::floor(t * bins));
  return static_cast<int>(std::clamp<long long>(b, 0, bins - 1));
}

namespace {

template <typename T>
Histogram1D intra_histogram_impl(std::span<const T> values, int bins) {
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "bin count must be positive");
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "intra-sample entropy of an empty map");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const T v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite value in feature map");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  // After min-max rescaling onto (-1, 1) the bins are 2/B wide; binning the
  // fraction (v - min) / (max - min) is the same partition.
  Histogram1D h;
  h.bins = bins;
  h.lo = -1.0;
  h.hi = 1.0;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const T v : values) ++h.counts[static_cast<std::size_t>(bin_index(v, lo, hi, bins))];
  return h;
}

}  // namespace

Histogram1D intra_histogram(std::span<const float> values, int bins) {
  return intra_histogram_impl(values, bins);
}
Histogram1D intra_histogram(std::span<const double> values, int bins) {
  return intra_histogram_impl(values, bins);
}

double intra_sample_entropy(std::span<const float> values, int bins) {
  return entropy_of_counts(intra_histogram(values, bins).counts);
}
double intra_sample_entropy(std::span<const double> values, int bins) {
  return entropy_of_counts(intra_histogram(values, bins).counts);
}

std::vector<double> pairwise_distances(const PointCloud& points) {
  const std::size_t n = points.n;
  std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2);
  const std::size_t dim = points.dim;
  const double* base = points.values.data();
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const double* xp = base + p * dim;
      double* dst = out.data() + (p * (2 * n - p - 1)) / 2;
      for (std::size_t q = p + 1; q < n; ++q) {
        *dst++ = std::sqrt(squared_distance(xp, base + q * dim, dim));
      }
    }
  });
  return out;
}

std::vector<double> equal_width_edges(double lo, double hi, int bins) {
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * b / bins;
  edges.back() = hi;
  return edges;
}

BinnedDistances bin_distances(std::span<const double> dists, int bins) {
  if (bins < 1 || bins > 65535) throw Error(ErrorCode::InvalidArgument, "bin count out of range");
  BinnedDistances out;
  out.bins = bins;
  if (dists.empty()) return out;
  const auto [mn, mx] = std::minmax_element(dists.begin(), dists.end());
  out.lo = *mn;
  out.hi = *mx;
  out.index.resize(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    out.index[i] = static_cast<std::uint16_t>(bin_index(dists[i], out.lo, out.hi, bins));
  }
  return out;
}

Histogram1D to_histogram(const BinnedDistances& binned) {
  Histogram1D h;
  h.bins = binned.bins;
  h.lo = binned.lo;
  h.hi = binned.hi;
  h.counts.assign(static_cast<std::size_t>(binned.bins), 0);
  for (const auto b : binned.index) ++h.counts[b];
  return h;
}

std::uint64_t JointHistogram2D::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<std::uint64_t> JointHistogram2D::marginal_x() const {
  std::vector<std::uint64_t> m(static_cast<std::size_t>(bins), 0);
  for (int x = 0; x < bins; ++x)
    for (int y = 0; y < bins; ++y) m[x] += at(x, y);
  return m;
}

std::vector<std::uint64_t> JointHistogram2D::marginal_y() const {
  std::vector<std::uint64_t> m(static_cast<std::size_t>(bins), 0);
  for (int x = 0; x < bins; ++x)
    for (int y = 0; y < bins; ++y) m[y] += at(x, y);
  return m;
}

JointHistogram2D JointHistogram2D::transposed() const {
  JointHistogram2D t;
  t.bins = bins;
  t.edges_x = edges_y;
  t.edges_y = edges_x;
  t.counts.resize(counts.size());
  for (int x = 0; x < bins; ++x)
    for (int y = 0; y < bins; ++y) t.counts[static_cast<std::size_t>(y) * bins + x] = at(x, y);
  return t;
}

JointHistogram2D joint_histogram(const BinnedDistances& x, const BinnedDistances& y) {
  if (x.index.size() != y.index.size() || x.bins != y.bins) {
    throw Error(ErrorCode::SampleMisalignment, "binned distance sets are not aligned");
  }
  JointHistogram2D h;
  h.bins = x.bins;
  h.edges_x = equal_width_edges(x.lo, x.hi, x.bins);
  h.edges_y = equal_width_edges(y.lo, y.hi, y.bins);
  h.counts.assign(static_cast<std::size_t>(x.bins) * x.bins, 0);
  const std::size_t b = static_cast<std::size_t>(x.bins);
  const std::uint16_t* xi = x.index.data();
  const std::uint16_t* yi = y.index.data();
  std::uint64_t* counts = h.counts.data();
  for (std::size_t i = 0, n = x.index.size(); i < n; ++i) ++counts[xi[i] * b + yi[i]];
  return h;
}

JointHistogram2D joint_distance_histogram(const PointCloud& maps_a, const PointCloud& maps_b, int bins) {
  if (maps_a.n != maps_b.n) {
    throw Error(ErrorCode::SampleMisalignment, "channel maps cover " + std::to_string(maps_a.n) +
                                                   " and " + std::to_string(maps_b.n) + " samples");
  }
  if (maps_a.n < 2) throw Error(ErrorCode::TooFewSamples, "joint distance histogram needs two samples");
  return joint_histogram(bin_distances(pairwise_distances(maps_a), bins),
                         bin_distances(pairwise_distances(maps_b), bins));
}

CapacityResult channel_capacity(const JointHistogram2D& joint) {
  if (joint.total() == 0) throw Error(ErrorCode::EmptyHistogram, "joint histogram is empty");
  CapacityResult r;
  r.h_x = entropy_of_counts(joint.marginal_x());
  r.h_y = entropy_of_counts(joint.marginal_y());
  const double h_xy = entropy_of_counts(joint.counts);
  r.h_x_given_y = h_xy - r.h_y;
  r.h_y_given_x = h_xy - r.h_x;
  r.capacity = r.h_x - r.h_x_given_y;
  return r;
}

}  // namespace cnnslicer
