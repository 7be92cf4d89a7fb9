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


#ifndef VQANON_CORPUS_HPP_
#define VQANON_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vqanon/common.hpp"

namespace vqanon {

struct Utterance {
  std::string utt_id;
  std::string speaker_id;
  int emotion = 0;
  // Ground-truth content class per frame; size equals features.rows().
  std::vector<int> content_labels;
  FeatureMatrix features;

  Index num_frames() const { return features.rows(); }
};

struct Corpus {
  std::vector<Utterance> utterances;
  // Sorted, distinct speaker ids.
  std::vector<std::string> speakers;
  Index dim = 0;

  // Throws ValidationError naming the first broken invariant.
  void Validate() const;

  const Utterance* Find(const std::string& utt_id) const;
  std::vector<const Utterance*> UtterancesOf(const std::string& speaker_id) const;
  Index TotalFrames() const;

  // Content hash over ids, labels and feature bytes, as 16 hex digits.
  std::string Fingerprint() const;
};

// Builds a roster (sorted, distinct) from the utterances' speaker ids.
std::vector<std::string> RosterOf(const std::vector<Utterance>& utterances);

struct SyntheticSpec {
  Index dim = 64;
  int num_phones = 30;
  int num_speakers = 40;
  int num_emotions = 4;
  int utts_per_speaker = 8;
  int min_frames = 40;
  int max_frames = 80;
  double phone_scale = 1.0;
  double speaker_scale = 0.5;
  double emotion_scale = 0.25;
  double noise_scale = 0.2;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Latent structure planted by GenerateCorpus. Rows of speaker_offsets follow
// `speakers`.
struct AnchorSet {
  FeatureMatrix phone_anchors;
  FeatureMatrix speaker_offsets;
  FeatureMatrix emotion_offsets;
  std::vector<std::string> speakers;
  double phone_scale = 1.0;
  double speaker_scale = 1.0;
  double emotion_scale = 1.0;

  Index dim() const { return phone_anchors.cols(); }
};

// Every frame is
//   phone_scale * phone[label] + speaker_scale * speaker[spk]
//     + emotion_scale * emotion[emo] + noise,
// with anchors and offsets drawn from N(0, I) and noise from
// N(0, noise_scale^2 I). Deterministic in spec (including its seed).
std::pair<Corpus, AnchorSet> GenerateCorpus(const SyntheticSpec& spec);

// Writes <directory>/manifest.json plus one feature file per utterance and
// returns the manifest path.
std::filesystem::path SaveCorpus(const Corpus& corpus, const std::filesystem::path& directory);
Corpus LoadCorpus(const std::filesystem::path& manifest);

// Writes <directory>/anchors.json plus three feature files.
std::filesystem::path SaveAnchors(const AnchorSet& anchors, const std::filesystem::path& directory);
AnchorSet LoadAnchors(const std::filesystem::path& index);

std::string SpeakerName(int index);

}  // namespace vqanon

#endif  // VQANON_CORPUS_HPP_
