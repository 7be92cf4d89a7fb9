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


#include "vqanon/pool.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "vqanon/hash.hpp"
#include "vqanon/json_io.hpp"
#include "vqanon/parallel.hpp"

namespace vqanon {

namespace fs = std::filesystem;

namespace {

constexpr int kPoolFormatVersion = 1;

}  // namespace

std::string PartitionStrategy::ToString() const {
  switch (kind) {
    case PartitionKind::kAll:
      return "all";
    case PartitionKind::kPerGroup:
      return "group:" + std::to_string(group_size);
    case PartitionKind::kPerUtterance:
      return "utterance";
  }
  return "?";
}

PartitionStrategy PartitionStrategy::Parse(std::string_view text) {
  if (text == "all") return All();
  if (text == "utterance") return PerUtterance();
  if (text.starts_with("group:")) {
    std::string_view num = text.substr(6);
    Index l = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), l);
    if (ec != std::errc() || ptr != num.data() + num.size() || l < 1) {
      throw ValidationError("invalid group size in strategy '" + std::string(text) + "'");
    }
    return PerGroup(l);
  }
  throw ValidationError("unknown strategy '" + std::string(text) +
                        "' (expected all, group:<L> or utterance)");
}

std::string ToString(Granularity g) {
  return g == Granularity::kUtterance ? "utterance" : "frame";
}

Granularity ParseGranularity(std::string_view text) {
  if (text == "utterance") return Granularity::kUtterance;
  if (text == "frame") return Granularity::kFrame;
  throw ValidationError("unknown granularity '" + std::string(text) +
                        "' (expected utterance or frame)");
}

void KMeansPool::Validate() const {
  if (models.empty()) throw ValidationError("pool has no models");
  for (const auto& m : models) {
    if (m.dim() != dim() || m.num_clusters() != num_clusters()) {
      throw ValidationError("pool members disagree on K or d");
    }
  }
  if (strategy.kind == PartitionKind::kPerGroup) {
    std::set<std::string> seen;
    for (const auto& m : models) {
      for (const auto& spk : m.trained_on) {
        if (!seen.insert(spk).second) {
          throw ValidationError("speaker " + spk + " appears in more than one pool member");
        }
      }
    }
  }
  if (strategy.kind == PartitionKind::kPerUtterance) {
    if (utterance_keys.size() != models.size()) {
      throw ValidationError("per-utterance pool needs one utterance key per model");
    }
  } else if (!utterance_keys.empty()) {
    throw ValidationError("utterance keys are only valid for per-utterance pools");
  }
}

std::string KMeansPool::Fingerprint() const {
  std::uint64_t h = Fnv1a64(strategy.ToString());
  h = Fnv1a64(source_corpus_id, h);
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    h = HashCombine(h, m.seed);
    for (const auto& spk : m.trained_on) h = Fnv1a64(spk, h);
    if (i < utterance_keys.size()) h = Fnv1a64(utterance_keys[i], h);
    h = Fnv1a64(std::as_bytes(std::span(m.centroids.data(), m.centroids.size())), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::vector<std::string>> PartitionSpeakers(std::vector<std::string> speakers,
                                                        const PartitionStrategy& strategy) {
  if (speakers.empty()) throw ValidationError("cannot partition an empty speaker roster");
  std::sort(speakers.begin(), speakers.end());
  std::vector<std::vector<std::string>> groups;
  switch (strategy.kind) {
    case PartitionKind::kAll:
      groups.push_back(std::move(speakers));
      break;
    case PartitionKind::kPerUtterance:
      for (auto& s : speakers) groups.push_back({std::move(s)});
      break;
    case PartitionKind::kPerGroup: {
      const auto s_count = static_cast<Index>(speakers.size());
      const Index l = strategy.group_size;
      if (l < 1) throw ValidationError("group size L must be >= 1");
      if (l > s_count) {
        throw ValidationError("group size L=" + std::to_string(l) + " exceeds speaker count S=" +
                              std::to_string(s_count));
      }
      const Index n_groups = s_count / l;
      groups.resize(n_groups);
      for (Index i = 0; i < s_count; ++i) {
        groups[std::min(i / l, n_groups - 1)].push_back(std::move(speakers[i]));
      }
      break;
    }
  }
  return groups;
}

std::uint64_t MemberSeed(std::uint64_t base_seed, std::size_t index) {
  return HashCombine(base_seed, static_cast<std::uint64_t>(index));
}

KMeansPool TrainPool(const Corpus& corpus, const PartitionStrategy& strategy,
                     const KMeansParams& params) {
  params.Validate();
  if (corpus.utterances.empty()) throw ValidationError("cannot train a pool on an empty corpus");
  KMeansPool pool;
  pool.strategy = strategy;
  pool.source_corpus_id = corpus.Fingerprint();

  std::vector<FeatureMatrix> training_sets;
  std::vector<std::vector<std::string>> owners;
  if (strategy.kind == PartitionKind::kPerUtterance) {
    for (const auto& u : corpus.utterances) {
      training_sets.push_back(u.features);
      owners.push_back({u.speaker_id});
      pool.utterance_keys.push_back(u.utt_id);
    }
  } else {
    auto groups = PartitionSpeakers(corpus.speakers, strategy);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::set<std::string> members(groups[g].begin(), groups[g].end());
      Index rows = 0;
      for (const auto& u : corpus.utterances) {
        if (members.count(u.speaker_id)) rows += u.num_frames();
      }
      if (rows == 0) {
        throw ValidationError("speaker group " + std::to_string(g) + " (first speaker " +
                              groups[g].front() + ") has no frames");
      }
      FeatureMatrix frames(rows, corpus.dim);
      Index at = 0;
      for (const auto& u : corpus.utterances) {
        if (!members.count(u.speaker_id)) continue;
        frames.middleRows(at, u.num_frames()) = u.features;
        at += u.num_frames();
      }
      training_sets.push_back(std::move(frames));
      owners.push_back(std::move(groups[g]));
    }
  }

  pool.models.resize(training_sets.size());
  ParallelFor(training_sets.size(), [&](std::size_t i) {
    KMeansParams member = params;
    member.seed = MemberSeed(params.seed, i);
    pool.models[i] = Fit(training_sets[i], member);
    pool.models[i].trained_on = owners[i];
  });
  return pool;
}

std::size_t SelectModel(const KMeansPool& pool, const SelectionPolicy& policy,
                        std::string_view utt_id, std::optional<Index> frame) {
  if (pool.models.empty()) throw ValidationError("pool has no models");
  if (pool.strategy.kind == PartitionKind::kPerUtterance) {
    auto it = std::find(pool.utterance_keys.begin(), pool.utterance_keys.end(), utt_id);
    if (it == pool.utterance_keys.end()) {
      throw ValidationError("per-utterance pool has no model for utterance " +
                            std::string(utt_id));
    }
    return static_cast<std::size_t>(it - pool.utterance_keys.begin());
  }
  std::uint64_t h = HashCombine(policy.seed, Fnv1a64(utt_id));
  if (policy.granularity == Granularity::kFrame) {
    h = HashCombine(h, static_cast<std::uint64_t>(frame.value_or(0)));
  }
  return static_cast<std::size_t>(UniformIndex(h, pool.models.size()));
}

Utterance AnonymizeUtterance(const KMeansPool& pool, const SelectionPolicy& policy,
                             const Utterance& utt) {
  if (pool.models.empty()) throw ValidationError("pool has no models");
  if (utt.features.cols() != pool.dim()) {
    throw ValidationError("dimension mismatch: utterance " + utt.utt_id + " has d=" +
                          std::to_string(utt.features.cols()) + ", pool has d=" +
                          std::to_string(pool.dim()));
  }
  Utterance out = utt;
  const bool per_frame = policy.granularity == Granularity::kFrame &&
                         pool.strategy.kind != PartitionKind::kPerUtterance;
  if (!per_frame) {
    out.features = Quantize(pool.models[SelectModel(pool, policy, utt.utt_id)], utt.features);
    return out;
  }
  std::vector<std::optional<Matrix<double>>> cache(pool.models.size());
  for (Index t = 0; t < utt.features.rows(); ++t) {
    std::size_t i = SelectModel(pool, policy, utt.utt_id, t);
    if (!cache[i]) cache[i] = pool.models[i].centroids.cast<double>();
    Index k = detail::Nearest(utt.features.row(t).cast<double>(), *cache[i]).first;
    out.features.row(t) = pool.models[i].centroids.row(k);
  }
  return out;
}

Corpus AnonymizeCorpus(const KMeansPool& pool, const SelectionPolicy& policy,
                       const Corpus& corpus) {
  Corpus out;
  out.dim = corpus.dim;
  out.speakers = corpus.speakers;
  out.utterances.resize(corpus.utterances.size());
  ParallelFor(corpus.utterances.size(), [&](std::size_t i) {
    out.utterances[i] = AnonymizeUtterance(pool, policy, corpus.utterances[i]);
  });
  return out;
}

void SavePool(const KMeansPool& pool, const fs::path& directory) {
  pool.Validate();
  EnsureDirectory(directory);
  json doc;
  doc["format_version"] = kPoolFormatVersion;
  doc["strategy"] = pool.strategy.ToString();
  doc["num_models"] = pool.models.size();
  doc["num_clusters"] = pool.num_clusters();
  doc["dim"] = pool.dim();
  doc["source_corpus_id"] = pool.source_corpus_id;
  doc["fingerprint"] = pool.Fingerprint();
  json members = json::array();
  for (std::size_t i = 0; i < pool.models.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "model_%04zu.sefk", i);
    SaveModel(pool.models[i], directory / name);
    json entry;
    entry["file"] = name;
    entry["seed"] = pool.models[i].seed;
    if (pool.strategy.kind == PartitionKind::kPerUtterance) entry["utt_id"] = pool.utterance_keys[i];
    members.push_back(std::move(entry));
  }
  doc["models"] = std::move(members);
  WriteJson(directory / "pool.json", doc);
}

KMeansPool LoadPool(const fs::path& directory) {
  json doc = ReadJson(directory / "pool.json");
  KMeansPool pool;
  try {
    int version = doc.at("format_version").get<int>();
    if (version != kPoolFormatVersion) {
      throw IoError("pool format version mismatch: file has " + std::to_string(version) +
                    ", expected " + std::to_string(kPoolFormatVersion));
    }
    pool.strategy = PartitionStrategy::Parse(doc.at("strategy").get<std::string>());
    pool.source_corpus_id = doc.at("source_corpus_id").get<std::string>();
    const auto& members = doc.at("models");
    if (members.size() != doc.at("num_models").get<std::size_t>()) {
      throw IoError("pool.json num_models disagrees with the model list");
    }
    for (const auto& entry : members) {
      pool.models.push_back(LoadModel(directory / entry.at("file").get<std::string>()));
      if (pool.models.back().seed != entry.at("seed").get<std::uint64_t>()) {
        throw IoError("seed in pool.json disagrees with model file " +
                      entry.at("file").get<std::string>());
      }
      if (pool.strategy.kind == PartitionKind::kPerUtterance) {
        pool.utterance_keys.push_back(entry.at("utt_id").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw IoError("malformed pool.json in " + directory.string() + ": " + e.what());
  }
  try {
    pool.Validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("inconsistent pool on disk: ") + e.what());
  }
  if (pool.num_clusters() != doc.at("num_clusters").get<Index>() ||
      pool.dim() != doc.at("dim").get<Index>()) {
    throw IoError("pool.json K/d disagree with the model files");
  }
  return pool;
}

}  // namespace vqanon
