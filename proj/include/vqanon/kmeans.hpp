// Copyright 2026 The vqanon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef VQANON_KMEANS_HPP_
#define VQANON_KMEANS_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vqanon/common.hpp"
#include "vqanon/hash.hpp"
#include "vqanon/parallel.hpp"

namespace vqanon {

struct KMeansParams {
  Index num_clusters = 1024;
  int max_iters = 100;
  // Stop once (previous - current) < rel_tol * previous inertia.
  double rel_tol = 1e-4;
  std::uint64_t seed = 0;
  // Independent k-means++ restarts; the lowest-inertia run is kept (earliest
  // on ties). Restart 0 uses `seed`, restart r > 0 a seed derived from it.
  int num_init = 1;
  // Set for mini-batch training. A batch covering the whole data set is an
  // ordinary Lloyd step, so batch_size >= N trains exactly like full batch.
  std::optional<Index> batch_size;

  void Validate() const {
    if (num_clusters < 1) throw ValidationError("num_clusters must be >= 1");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (num_init < 1) throw ValidationError("num_init must be >= 1");
    if (!(rel_tol >= 0)) throw ValidationError("rel_tol must be >= 0");
    if (batch_size && *batch_size < 1) throw ValidationError("batch_size must be >= 1");
  }
};

template <typename Scalar>
struct KMeansModel {
  Matrix<Scalar> centroids;
  // Sum of squared distances from each training frame to its centroid.
  double inertia = 0.0;
  std::vector<std::string> trained_on;
  std::uint64_t seed = 0;

  Index num_clusters() const { return centroids.rows(); }
  Index dim() const { return centroids.cols(); }
};

// z[t] is the codebook row chosen for frame t.
using Assignments = std::vector<Index>;

// Inertia after the initial assignment followed by one entry per Lloyd
// iteration (full batch), or the single final value (mini-batch).
struct FitTrace {
  std::vector<double> inertia;
  int iterations = 0;
};

// Chosen row indices and, for every pick after the first, the sampling
// distribution over data rows that produced it.
struct SeedingTrace {
  std::vector<Index> chosen_rows;
  std::vector<std::vector<double>> probabilities;
};

namespace detail {

template <typename A, typename B>
double SquaredDistance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return (a.template cast<double>() - b.template cast<double>()).squaredNorm();
}

// Nearest row of `centroids` to `frame`; ties go to the lowest index.
template <typename Row>
std::pair<Index, double> Nearest(const Eigen::MatrixBase<Row>& frame,
                                 const Matrix<double>& centroids) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < centroids.rows(); ++k) {
    double d = (centroids.row(k) - frame).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

// Assigns every row of `data` and fills per-row distances.
inline void AssignAll(const Matrix<double>& data, const Matrix<double>& centroids,
                      Assignments& z, std::vector<double>& dist) {
  z.resize(data.rows());
  dist.resize(data.rows());
  ParallelFor(static_cast<std::size_t>(data.rows()), [&](std::size_t i) {
    auto [k, d] = Nearest(data.row(static_cast<Index>(i)), centroids);
    z[i] = k;
    dist[i] = d;
  });
}

inline double SumInOrder(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

template <typename Derived>
void RequireUsableData(const Eigen::MatrixBase<Derived>& data) {
  if (data.rows() < 1 || data.cols() < 1) throw ValidationError("k-means data is empty");
  if (!data.allFinite()) throw ValidationError("k-means data contains NaN or Inf");
}

}  // namespace detail

// k-means++ seeding: first row uniform, every later row drawn with
// probability proportional to its squared distance from the nearest chosen
// row. When all remaining weight is zero (K exceeds the number of distinct
// rows) the draw falls back to uniform, so duplicates appear instead of an
// error.
template <typename Derived>
Matrix<typename Derived::Scalar> KMeansPlusPlusInit(const Eigen::MatrixBase<Derived>& data,
                                                    Index num_clusters, std::uint64_t seed,
                                                    SeedingTrace* trace = nullptr) {
  using Scalar = typename Derived::Scalar;
  detail::RequireUsableData(data);
  if (num_clusters < 1) throw ValidationError("num_clusters must be >= 1");
  std::mt19937_64 rng(seed);
  const Index n = data.rows();
  const Matrix<double> points = data.template cast<double>();

  Matrix<Scalar> centroids(num_clusters, data.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto take = [&](Index c, Index row) {
    centroids.row(c) = data.row(row);
    for (Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - points.row(row)).squaredNorm());
    }
    if (trace) trace->chosen_rows.push_back(row);
  };

  take(0, std::uniform_int_distribution<Index>(0, n - 1)(rng));
  for (Index c = 1; c < num_clusters; ++c) {
    double total = detail::SumInOrder(d2);
    Index row = n - 1;
    if (total > 0) {
      if (trace) {
        std::vector<double> p(n);
        for (Index i = 0; i < n; ++i) p[i] = d2[i] / total;
        trace->probabilities.push_back(std::move(p));
      }
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double cum = 0.0;
      Index last_positive = 0;
      bool found = false;
      for (Index i = 0; i < n; ++i) {
        if (d2[i] <= 0) continue;
        last_positive = i;
        cum += d2[i];
        if (cum > u) {
          row = i;
          found = true;
          break;
        }
      }
      if (!found) row = last_positive;
    } else {
      if (trace) trace->probabilities.emplace_back(n, 1.0 / static_cast<double>(n));
      row = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    }
    take(c, row);
  }
  return centroids;
}

namespace detail {

// Means of the assigned rows, accumulated per cluster in row order. Empty
// clusters are re-seeded, in ascending cluster order, to the row farthest from
// its current centroid (lowest row index on ties); a row is used at most once.
inline void UpdateMeans(const Matrix<double>& points, const Assignments& z,
                        std::vector<double> dist, Matrix<double>& centroids) {
  const Index k_count = centroids.rows();
  Matrix<double> sums = Matrix<double>::Zero(k_count, points.cols());
  std::vector<Index> counts(k_count, 0);
  for (Index i = 0; i < points.rows(); ++i) {
    sums.row(z[i]) += points.row(i);
    ++counts[z[i]];
  }
  for (Index k = 0; k < k_count; ++k) {
    if (counts[k] > 0) {
      centroids.row(k) = sums.row(k) / static_cast<double>(counts[k]);
      continue;
    }
    Index far = 0;
    for (Index i = 1; i < points.rows(); ++i) {
      if (dist[i] > dist[far]) far = i;
    }
    centroids.row(k) = points.row(far);
    dist[far] = -1.0;
  }
}

template <typename Scalar>
Matrix<double> RoundTo(const Matrix<double>& m) {
  return m.template cast<Scalar>().template cast<double>();
}

}  // namespace detail

namespace detail {

template <typename Derived>
KMeansModel<typename Derived::Scalar> FitOnce(const Eigen::MatrixBase<Derived>& data,
                                              const Matrix<double>& points,
                                              const KMeansParams& params, std::uint64_t seed,
                                              FitTrace& local) {
  using Scalar = typename Derived::Scalar;
  const Index n = points.rows();

  Matrix<double> centroids =
      KMeansPlusPlusInit(data, params.num_clusters, seed).template cast<double>();
  Assignments z;
  std::vector<double> dist;

  const bool mini_batch = params.batch_size && *params.batch_size < n;
  if (!mini_batch) {
    detail::AssignAll(points, centroids, z, dist);
    double prev = detail::SumInOrder(dist);
    local.inertia.push_back(prev);
    for (int it = 0; it < params.max_iters && prev > 0; ++it) {
      Assignments prev_z = z;
      detail::UpdateMeans(points, z, dist, centroids);
      centroids = detail::RoundTo<Scalar>(centroids);
      detail::AssignAll(points, centroids, z, dist);
      double cur = detail::SumInOrder(dist);
      local.inertia.push_back(cur);
      ++local.iterations;
      if (cur > prev) {
        throw InvariantError("k-means inertia increased from " + std::to_string(prev) +
                             " to " + std::to_string(cur));
      }
      bool converged = z == prev_z || prev - cur < params.rel_tol * prev;
      prev = cur;
      if (converged) break;
    }
  } else {
    // Mini-batch updates with per-centroid learning rate 1/count.
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    const Index batch = *params.batch_size;
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::vector<double> counts(params.num_clusters, 0.0);
    for (int it = 0; it < params.max_iters; ++it) {
      for (Index i = 0; i < batch; ++i) {
        Index j = std::uniform_int_distribution<Index>(i, n - 1)(rng);
        std::swap(order[i], order[j]);
      }
      std::vector<Index> rows(order.begin(), order.begin() + batch);
      std::sort(rows.begin(), rows.end());
      Matrix<double> before = centroids;
      for (Index row : rows) {
        Index k = detail::Nearest(points.row(row), before).first;
        counts[k] += 1.0;
        centroids.row(k) += (points.row(row) - centroids.row(k)) / counts[k];
      }
      ++local.iterations;
      double shift = (centroids - before).squaredNorm();
      double scale = before.squaredNorm();
      if (shift <= params.rel_tol * params.rel_tol * std::max(scale, 1e-300)) break;
    }
    centroids = detail::RoundTo<Scalar>(centroids);
    detail::AssignAll(points, centroids, z, dist);
    local.inertia.push_back(detail::SumInOrder(dist));
  }

  KMeansModel<Scalar> model;
  model.centroids = centroids.template cast<Scalar>();
  model.inertia = local.inertia.back();
  return model;
}

}  // namespace detail

// Lloyd's algorithm from k-means++ starts. Full-batch inertia is checked to
// be non-increasing at every iteration (InvariantError otherwise).
template <typename Derived>
KMeansModel<typename Derived::Scalar> Fit(const Eigen::MatrixBase<Derived>& data,
                                          const KMeansParams& params,
                                          FitTrace* trace = nullptr) {
  params.Validate();
  detail::RequireUsableData(data);
  const Matrix<double> points = data.template cast<double>();
  KMeansModel<typename Derived::Scalar> best;
  FitTrace best_trace;
  for (int r = 0; r < params.num_init; ++r) {
    std::uint64_t seed = r == 0 ? params.seed : HashCombine(params.seed, static_cast<std::uint64_t>(r));
    FitTrace local;
    auto model = detail::FitOnce(data, points, params, seed, local);
    if (r == 0 || model.inertia < best.inertia) {
      best = std::move(model);
      best_trace = std::move(local);
    }
  }
  best.seed = params.seed;
  if (trace) *trace = std::move(best_trace);
  return best;
}

template <typename Scalar, typename Derived>
Assignments Assign(const KMeansModel<Scalar>& model, const Eigen::MatrixBase<Derived>& frames) {
  if (frames.cols() != model.dim()) {
    throw ValidationError("dimension mismatch: frames have d=" + std::to_string(frames.cols()) +
                          ", model has d=" + std::to_string(model.dim()));
  }
  const Matrix<double> centroids = model.centroids.template cast<double>();
  const Matrix<double> points = frames.template cast<double>();
  Assignments z;
  std::vector<double> dist;
  detail::AssignAll(points, centroids, z, dist);
  return z;
}

// Center lookup: row t of the result is centroid z[t].
template <typename Scalar>
Matrix<Scalar> Centers(const KMeansModel<Scalar>& model, const Assignments& z) {
  Matrix<Scalar> out(static_cast<Index>(z.size()), model.dim());
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (z[t] < 0 || z[t] >= model.num_clusters()) {
      throw ValidationError("assignment index " + std::to_string(z[t]) + " out of range for K=" +
                            std::to_string(model.num_clusters()));
    }
    out.row(static_cast<Index>(t)) = model.centroids.row(z[t]);
  }
  return out;
}

template <typename Scalar, typename Derived>
Matrix<Scalar> Quantize(const KMeansModel<Scalar>& model, const Eigen::MatrixBase<Derived>& frames) {
  return Centers(model, Assign(model, frames));
}

// Sum of squared row differences, accumulated in double.
template <typename A, typename B>
double Distortion(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  double s = 0.0;
  for (Index t = 0; t < a.rows(); ++t) s += detail::SquaredDistance(a.row(t), b.row(t));
  return s;
}

// "SEFK" model file: version u32, K u32, d u32, seed u64, inertia f64,
// centroids K*d float32 row-major, then a u64-length-prefixed JSON trailer
// carrying trained_on.
void SaveModel(const KMeansModel<float>& model, const std::filesystem::path& path);
KMeansModel<float> LoadModel(const std::filesystem::path& path);

}  // namespace vqanon

#endif  // VQANON_KMEANS_HPP_
