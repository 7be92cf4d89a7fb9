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


#ifndef VQANON_KNN_HPP_
#define VQANON_KNN_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vqanon/common.hpp"
#include "vqanon/corpus.hpp"
#include "vqanon/parallel.hpp"

namespace vqanon {

// All frames of one target speaker, in corpus order.
struct TargetBank {
  std::string speaker_id;
  FeatureMatrix frames;

  Index size() const { return frames.rows(); }
};

TargetBank BuildBank(const Corpus& corpus, const std::string& speaker_id);

// 1 - cos(a, b). A zero-norm operand gets +inf so it sorts after every real
// neighbour.
template <typename A, typename B>
double CosineDistance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double x = static_cast<double>(a(j));
    const double y = static_cast<double>(b(j));
    na += x * x;
    nb += y * y;
    dot += x * y;
  }
  if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::infinity();
  // sqrt(x * x) == x exactly, so a row compared with itself gives distance 0.
  return 1.0 - dot / std::sqrt(na * nb);
}

// Indices of the k bank rows closest to `query` in cosine distance, nearest
// first; equal distances keep the lower bank index first.
template <typename Row, typename Bank>
std::vector<Index> NearestNeighbours(const Eigen::MatrixBase<Row>& query,
                                     const Eigen::MatrixBase<Bank>& bank, Index k) {
  std::vector<double> dist(bank.rows());
  for (Index m = 0; m < bank.rows(); ++m) dist[m] = CosineDistance(query, bank.row(m));
  std::vector<Index> order(bank.rows());
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index x, Index y) {
    return dist[x] < dist[y] || (dist[x] == dist[y] && x < y);
  });
  order.resize(k);
  return order;
}

// Replaces each source frame with the mean of its k nearest bank frames.
template <typename Derived>
Matrix<typename Derived::Scalar> KnnAnonymize(const Eigen::MatrixBase<Derived>& source,
                                              const TargetBank& bank, Index k) {
  using Scalar = typename Derived::Scalar;
  if (k < 1) throw ValidationError("k must be >= 1");
  if (k > bank.size()) {
    throw ValidationError("k=" + std::to_string(k) + " exceeds bank size M=" +
                          std::to_string(bank.size()) + " for speaker " + bank.speaker_id);
  }
  if (source.cols() != bank.frames.cols()) {
    throw ValidationError("dimension mismatch: source d=" + std::to_string(source.cols()) +
                          ", bank d=" + std::to_string(bank.frames.cols()));
  }
  Matrix<Scalar> out(source.rows(), source.cols());
  ParallelFor(static_cast<std::size_t>(source.rows()), [&](std::size_t i) {
    const auto t = static_cast<Index>(i);
    Vector<double> acc = Vector<double>::Zero(source.cols());
    // Summed in bank order so equal neighbour sets give equal rows.
    std::vector<Index> nn = NearestNeighbours(source.row(t), bank.frames, k);
    std::sort(nn.begin(), nn.end());
    for (Index m : nn) {
      acc += bank.frames.row(m).template cast<double>().transpose();
    }
    out.row(t) = (acc / static_cast<double>(k)).template cast<Scalar>().transpose();
  });
  return out;
}

// Applies KnnAnonymize to every utterance of `corpus` against one bank.
Corpus KnnAnonymizeCorpus(const Corpus& corpus, const TargetBank& bank, Index k);

}  // namespace vqanon

#endif  // VQANON_KNN_HPP_
