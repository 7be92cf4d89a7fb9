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


#ifndef VQANON_EVAL_HPP_
#define VQANON_EVAL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqanon/common.hpp"
#include "vqanon/corpus.hpp"
#include "vqanon/json_io.hpp"
#include "vqanon/pool.hpp"

namespace vqanon {

// Mean over frames; the proxy ASV's utterance-level embedding.
template <typename Derived>
Vector<double> UtteranceEmbedding(const Eigen::MatrixBase<Derived>& frames) {
  if (frames.rows() < 1) throw ValidationError("cannot embed an utterance with no frames");
  return frames.template cast<double>().colwise().mean().transpose();
}

// Cosine similarity in [-1, 1]; 0 when either operand has zero norm.
double CosineScore(const Vector<double>& a, const Vector<double>& b);

// Equal error rate in percent. Thresholds range over the pooled score set;
// FAR(t) = fraction of impostors >= t, FRR(t) = fraction of genuine < t.
// Returns (FAR + FRR) / 2 at the threshold minimising |FAR - FRR|, taking the
// lowest such threshold.
double ComputeEer(const std::vector<double>& genuine, const std::vector<double>& impostor);

// Nearest phone anchor (cosine) for every frame; ties go to the lower id.
std::vector<int> ClassifyContent(const FeatureMatrix& frames, const AnchorSet& anchors);

// Percentage of frames whose nearest phone anchor differs from the label.
double ContentErrorRate(const Corpus& corpus, const AnchorSet& anchors);

struct EmotionResult {
  double uar = 0.0;
  // Recall per emotion class present in the corpus.
  std::map<int, double> recall;
  // Predicted class per utterance, in corpus order.
  std::vector<int> predictions;
  std::vector<std::string> warnings;
};

// Per utterance, residual = mean over frames of (frame - scaled nearest phone
// anchor), classified to the nearest scaled emotion offset (Euclidean). UAR is
// the unweighted mean of per-class recalls over classes present in the corpus.
EmotionResult EmotionUar(const Corpus& corpus, const AnchorSet& anchors);

struct SplitRatios {
  double train = 0.5;
  double enroll = 0.25;
  double trial = 0.25;

  void Validate() const;
};

struct CorpusSplits {
  Corpus attacker_train;
  Corpus enroll;
  Corpus trial;

  // Throws ValidationError if an utt_id appears in more than one split.
  void Validate() const;
};

// Speakers are ranked by a keyed hash of (seed, speaker_id) and the first
// round(S * train) of them form the attacker-training split. Each remaining
// speaker's utterances are ranked by a keyed hash of (seed, utt_id) and dealt
// to enrollment and trial in proportion enroll : trial, with at least one of
// each when the speaker has two or more utterances.
CorpusSplits SplitCorpus(const Corpus& corpus, std::uint64_t split_seed,
                         const SplitRatios& ratios = {});

struct Trial {
  std::string enroll_speaker;
  std::string utt_id;
  bool genuine = false;
};

struct TrialList {
  std::vector<Trial> trials;

  std::size_t num_genuine() const;
  std::size_t num_impostor() const;
};

// Every trial utterance against every enrolled speaker.
TrialList BuildTrials(const Corpus& enroll, const Corpus& trial);

enum class BackendKind { kCenter, kWccn };

std::string ToString(BackendKind kind);
BackendKind ParseBackend(std::string_view text);

// Linear scoring backend fitted on (attacker-processed) training embeddings:
// subtract the training mean, then optionally whiten by the within-speaker
// covariance.
struct AsvBackend {
  BackendKind kind = BackendKind::kCenter;
  Vector<double> mean;
  Matrix<double> transform;

  Vector<double> Project(const Vector<double>& embedding) const;
};

AsvBackend TrainBackend(const Corpus& train, BackendKind kind);

// Per-speaker mean of projected enrollment embeddings.
struct SpeakerTemplates {
  std::map<std::string, Vector<double>> templates;
};

SpeakerTemplates BuildTemplates(const Corpus& enroll, const AsvBackend& backend);

struct TrialScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

TrialScores ScoreTrials(const TrialList& trials, const SpeakerTemplates& templates,
                        const Corpus& trial_corpus, const AsvBackend& backend);

enum class AttackMode { kFull, kSemi };

std::string ToString(AttackMode mode);
AttackMode ParseAttackMode(std::string_view text);

// One side of the game. A null pool means the side leaves speech untouched.
struct PartyConfig {
  const KMeansPool* pool = nullptr;
  SelectionPolicy policy;
};

struct AttackConfig {
  PartyConfig user;
  PartyConfig attacker;
  AttackMode mode = AttackMode::kSemi;
  BackendKind backend = BackendKind::kWccn;
  // Copied verbatim into the report.
  json provenance = json::object();
};

struct EvalReport {
  double eer = 0.0;
  double cer = 0.0;
  double uar_proxy = 0.0;
  std::size_t num_genuine = 0;
  std::size_t num_impostor = 0;
  Index num_trial_frames = 0;
  std::size_t num_trial_utterances = 0;
  std::vector<std::string> warnings;
  json config = json::object();

  json ToJson() const;
};

// Corpora as processed inside RunAttack, for embedding dumps.
struct AttackArtifacts {
  Corpus user_trials;
  Corpus attacker_train;
  Corpus attacker_enroll;
};

// The user anonymizes the trials with the user pool; the attacker anonymizes
// its training and enrollment data with its own pool (the user's pool in full
// mode), fits the backend and templates on that, and scores every trial. CER
// and UAR are measured on the user-anonymized trials.
EvalReport RunAttack(const CorpusSplits& splits, const AnchorSet& anchors,
                     const AttackConfig& config, AttackArtifacts* artifacts = nullptr);

}  // namespace vqanon

#endif  // VQANON_EVAL_HPP_
