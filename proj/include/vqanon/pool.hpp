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


#ifndef VQANON_POOL_HPP_
#define VQANON_POOL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqanon/corpus.hpp"
#include "vqanon/kmeans.hpp"

namespace vqanon {

enum class PartitionKind { kAll, kPerGroup, kPerUtterance };

// How a corpus is split into training sets for the pool members.
//   kAll          one codebook over every speaker
//   kPerGroup     one codebook per group of `group_size` speakers
//   kPerUtterance one codebook per utterance, only ever applied to that
//                 utterance (resynthesis upper bound)
struct PartitionStrategy {
  PartitionKind kind = PartitionKind::kAll;
  Index group_size = 0;

  static PartitionStrategy All() { return {PartitionKind::kAll, 0}; }
  static PartitionStrategy PerGroup(Index l) { return {PartitionKind::kPerGroup, l}; }
  static PartitionStrategy PerUtterance() { return {PartitionKind::kPerUtterance, 0}; }

  // "all", "group:<L>" or "utterance".
  std::string ToString() const;
  static PartitionStrategy Parse(std::string_view text);

  bool operator==(const PartitionStrategy&) const = default;
};

enum class Granularity { kUtterance, kFrame };

struct SelectionPolicy {
  Granularity granularity = Granularity::kUtterance;
  std::uint64_t seed = 0;
};

std::string ToString(Granularity g);
Granularity ParseGranularity(std::string_view text);

struct KMeansPool {
  std::vector<KMeansModel<float>> models;
  PartitionStrategy strategy;
  std::string source_corpus_id;
  // kPerUtterance only: utterance_keys[i] is the utterance models[i] was fit on.
  std::vector<std::string> utterance_keys;

  std::size_t size() const { return models.size(); }
  Index dim() const { return models.front().dim(); }
  Index num_clusters() const { return models.front().num_clusters(); }

  void Validate() const;
  // Hash over strategy, member order, trained_on lists and centroid bytes.
  std::string Fingerprint() const;
};

// Speakers are sorted, then cut into floor(S/L) chunks of L; the S mod L
// leftovers join the final chunk. kAll yields one group; kPerUtterance yields
// one singleton group per speaker (utterance-level splitting happens in
// TrainPool).
std::vector<std::vector<std::string>> PartitionSpeakers(std::vector<std::string> speakers,
                                                        const PartitionStrategy& strategy);

// Seed for the pool member at `index`, derived from the base k-means seed.
std::uint64_t MemberSeed(std::uint64_t base_seed, std::size_t index);

KMeansPool TrainPool(const Corpus& corpus, const PartitionStrategy& strategy,
                     const KMeansParams& params);

// Stateless keyed draw. Utterance granularity keys on (seed, utt_id) and
// ignores `frame`; frame granularity keys on (seed, utt_id, frame).
// Per-utterance pools return the member fit on `utt_id`.
std::size_t SelectModel(const KMeansPool& pool, const SelectionPolicy& policy,
                        std::string_view utt_id, std::optional<Index> frame = std::nullopt);

Utterance AnonymizeUtterance(const KMeansPool& pool, const SelectionPolicy& policy,
                             const Utterance& utt);
Corpus AnonymizeCorpus(const KMeansPool& pool, const SelectionPolicy& policy,
                       const Corpus& corpus);

// Directory layout: pool.json plus model_NNNN.sefk per member.
void SavePool(const KMeansPool& pool, const std::filesystem::path& directory);
KMeansPool LoadPool(const std::filesystem::path& directory);

}  // namespace vqanon

#endif  // VQANON_POOL_HPP_
