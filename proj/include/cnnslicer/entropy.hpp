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

// Entropy and channel-capacity primitives. All logarithms are base 2, so
// every quantity is in bits. Every function here is pure.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cnnslicer {

inline constexpr int kDefaultBins = 32;
inline constexpr int kDefaultNeighbors = 15;

/// -log2(p). Throws DomainError unless 0 < p <= 1.
double information_content(double p);

/// Probability vector; construction validates p_i >= 0 and sum = 1 +- 1e-9.
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<double> p);
  /// Normalizes a non-empty count table; throws EmptyHistogram on zero total.
  static DiscreteDistribution from_counts(std::span<const std::uint64_t> counts);

  std::span<const double> p() const noexcept { return p_; }
  std::size_t size() const noexcept { return p_.size(); }

 private:
  std::vector<double> p_;
};

/// -sum p log2 p with 0 log 0 = 0.
double shannon_entropy(const DiscreteDistribution& d);

// ---------------------------------------------------------------------------
// Inter-sample entropy: adaptive exponential kernels over exact kNN graphs.

/// N points of equal dimension, row-major, double precision.
struct PointCloud {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  PointCloud() = default;
  PointCloud(std::size_t rows, std::size_t cols);
  PointCloud(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
};

double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept;

struct SigmaSolution {
  double sigma = 0.0;
  bool degenerate = false;  // no root: too many zero distances
  int iterations = 0;
  double residual = 0.0;    // sum_j exp(-d_j / sigma) - log2(k)
};

inline constexpr double kSigmaMin = 1e-20;
inline constexpr double kSigmaMax = 1e20;
inline constexpr double kSigmaTolerance = 1e-5;
inline constexpr int kSigmaMaxIterations = 128;

/// Finds sigma with sum_j exp(-d_j / sigma) = log2(k), k = dists.size().
/// The sum is increasing in sigma; the search bisects log(sigma) over
/// [kSigmaMin, kSigmaMax]. When no root exists (the sum already exceeds the
/// target as sigma -> 0) returns kSigmaMin flagged degenerate.
/// Throws DomainError for k < 2 or negative distances.
SigmaSolution solve_sigma(std::span<const double> dists);

/// Exact k nearest neighbors plus per-point kernel bandwidths.
/// Rows of neighbor_ids/neighbor_dists are sorted by (distance, index).
struct SmoothKnnParams {
  std::size_t n = 0;
  int k = 0;
  std::vector<std::uint32_t> neighbor_ids;  // [n, k]
  std::vector<double> neighbor_dists;       // [n, k]
  std::vector<double> sigma;                // [n]
  std::vector<std::uint8_t> degenerate;     // [n]
};

/// Brute-force exact kNN (self excluded, ties to the lower index).
/// Fills ids and dists only. Throws TooFewSamples unless n >= k + 1.
SmoothKnnParams knn_search(const PointCloud& points, int k);

/// Sparse conditional membership P(j|i) = exp(-d_ij / sigma_i), k per row.
struct ConditionalAffinity {
  SmoothKnnParams knn;
  std::vector<double> prob;  // [n, k], aligned with knn.neighbor_ids
};

ConditionalAffinity knn_affinities(const PointCloud& points, int k);

struct AffinityEntry {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double p = 0.0;
};

/// Symmetric joint table over ordered pairs, sorted by (i, j), no diagonal.
struct PairwiseAffinity {
  std::size_t n = 0;
  std::vector<AffinityEntry> entries;

  double at(std::uint32_t i, std::uint32_t j) const;  // 0 when absent
  double total() const;
};

/// P_ij = (P(j|i) + P(i|j)) / 2N, then rescaled so all stored entries sum to 1.
PairwiseAffinity symmetrize_normalize(const ConditionalAffinity& cond);

/// Entropy of the normalized pairwise affinity table, summed over ordered pairs.
double inter_sample_entropy(const PointCloud& points, int k = kDefaultNeighbors);

// ---------------------------------------------------------------------------
// Histograms.

struct Histogram1D {
  int bins = kDefaultBins;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const noexcept;
};

/// Equal-width bin index of v within [lo, hi], max edge inclusive.
/// A zero-width range puts everything in bin 0.
int bin_index(double v, double lo, double hi, int bins) noexcept;

/// Values min-max rescaled onto (-1, 1) and binned into B equal bins.
Histogram1D intra_histogram(std::span<const float> values, int bins = kDefaultBins);
Histogram1D intra_histogram(std::span<const double> values, int bins = kDefaultBins);

/// Throws EmptyInput / NonFiniteValue. Result lies in [0, log2 B].
double intra_sample_entropy(std::span<const float> values, int bins = kDefaultBins);
double intra_sample_entropy(std::span<const double> values, int bins = kDefaultBins);

/// Condensed pairwise Euclidean distances: entry for (p, q), p < q, stored
/// row-major by p. Size n(n-1)/2.
std::vector<double> pairwise_distances(const PointCloud& points);

inline std::size_t condensed_index(std::size_t n, std::size_t p, std::size_t q) noexcept {
  return p * (2 * n - p - 1) / 2 + (q - p - 1);
}

/// Distances binned over their observed [min, max].
struct BinnedDistances {
  int bins = kDefaultBins;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint16_t> index;  // per pair bin
};

BinnedDistances bin_distances(std::span<const double> dists, int bins = kDefaultBins);
Histogram1D to_histogram(const BinnedDistances& binned);

struct JointHistogram2D {
  int bins = kDefaultBins;
  std::vector<double> edges_x;  // bins + 1
  std::vector<double> edges_y;
  std::vector<std::uint64_t> counts;  // [bins(x), bins(y)] row-major

  std::uint64_t at(int x, int y) const { return counts[static_cast<std::size_t>(x) * bins + y]; }
  std::uint64_t total() const noexcept;
  std::vector<std::uint64_t> marginal_x() const;
  std::vector<std::uint64_t> marginal_y() const;
  JointHistogram2D transposed() const;
};

std::vector<double> equal_width_edges(double lo, double hi, int bins);

/// Tallies aligned pairs of binned distances. Throws SampleMisalignment.
JointHistogram2D joint_histogram(const BinnedDistances& x, const BinnedDistances& y);

/// Joint histogram of pairwise distances between samples in two channel
/// spaces. Rows of both inputs must describe the same samples in the same
/// order. Throws SampleMisalignment, TooFewSamples (n < 2).
JointHistogram2D joint_distance_histogram(const PointCloud& maps_a, const PointCloud& maps_b,
                                          int bins = kDefaultBins);

struct CapacityResult {
  double h_x = 0.0;
  double h_y = 0.0;
  double h_x_given_y = 0.0;
  double h_y_given_x = 0.0;
  double capacity = 0.0;
};

/// H(X) - H(X|Y) of the normalized joint histogram. Throws EmptyHistogram.
CapacityResult channel_capacity(const JointHistogram2D& joint);

}  // namespace cnnslicer
