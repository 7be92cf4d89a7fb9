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


#include "vqanon/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "vqanon/hash.hpp"
#include "vqanon/parallel.hpp"

namespace vqanon {

double CosineScore(const Vector<double>& a, const Vector<double>& b) {
  double na = a.squaredNorm();
  double nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / std::sqrt(na * nb), -1.0, 1.0);
}

double ComputeEer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw ValidationError("EER needs at least one genuine and one impostor score");
  }
  std::vector<double> gen = genuine;
  std::vector<double> imp = impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size());
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_gen = static_cast<double>(gen.size());
  const double n_imp = static_cast<double>(imp.size());
  std::size_t gen_below = 0;
  std::size_t imp_below = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_eer = 0.0;
  for (double t : thresholds) {
    while (gen_below < gen.size() && gen[gen_below] < t) ++gen_below;
    while (imp_below < imp.size() && imp[imp_below] < t) ++imp_below;
    double frr = static_cast<double>(gen_below) / n_gen;
    double far = static_cast<double>(imp.size() - imp_below) / n_imp;
    double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best_eer = 0.5 * (far + frr);
    }
  }
  return 100.0 * best_eer;
}

std::vector<int> ClassifyContent(const FeatureMatrix& frames, const AnchorSet& anchors) {
  if (frames.cols() != anchors.dim()) {
    throw ValidationError("dimension mismatch: frames d=" + std::to_string(frames.cols()) +
                          ", anchors d=" + std::to_string(anchors.dim()));
  }
  const Matrix<double> a = anchors.phone_anchors.cast<double>();
  const Vector<double> a_norm = a.rowwise().norm();
  std::vector<int> out(frames.rows());
  for (Index t = 0; t < frames.rows(); ++t) {
    const Vector<double> x = frames.row(t).cast<double>().transpose();
    const double x_norm = x.norm();
    int best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (Index p = 0; p < a.rows(); ++p) {
      double denom = x_norm * a_norm(p);
      double sim = denom > 0 ? a.row(p).dot(x) / denom : 0.0;
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(p);
      }
    }
    out[t] = best;
  }
  return out;
}

double ContentErrorRate(const Corpus& corpus, const AnchorSet& anchors) {
  std::vector<Index> errors(corpus.utterances.size(), 0);
  ParallelFor(corpus.utterances.size(), [&](std::size_t i) {
    const auto& u = corpus.utterances[i];
    auto pred = ClassifyContent(u.features, anchors);
    for (std::size_t t = 0; t < pred.size(); ++t) errors[i] += pred[t] != u.content_labels[t];
  });
  Index total = corpus.TotalFrames();
  if (total == 0) throw ValidationError("content error rate needs at least one frame");
  Index wrong = 0;
  for (Index e : errors) wrong += e;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(total);
}

EmotionResult EmotionUar(const Corpus& corpus, const AnchorSet& anchors) {
  if (corpus.utterances.empty()) throw ValidationError("emotion UAR needs utterances");
  const Index n_classes = anchors.emotion_offsets.rows();
  const Matrix<double> phones = anchors.phone_scale * anchors.phone_anchors.cast<double>();
  const Matrix<double> emotions = anchors.emotion_scale * anchors.emotion_offsets.cast<double>();

  EmotionResult result;
  result.predictions.resize(corpus.utterances.size());
  ParallelFor(corpus.utterances.size(), [&](std::size_t i) {
    const auto& u = corpus.utterances[i];
    auto pred = ClassifyContent(u.features, anchors);
    Vector<double> residual = Vector<double>::Zero(corpus.dim);
    for (Index t = 0; t < u.num_frames(); ++t) {
      residual += (u.features.row(t).cast<double>() - phones.row(pred[t])).transpose();
    }
    residual /= static_cast<double>(u.num_frames());
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index e = 0; e < n_classes; ++e) {
      double d = (emotions.row(e).transpose() - residual).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(e);
      }
    }
    result.predictions[i] = best;
  });

  std::map<int, std::pair<Index, Index>> tally;  // class -> (correct, total)
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    auto& [correct, total] = tally[corpus.utterances[i].emotion];
    ++total;
    correct += result.predictions[i] == corpus.utterances[i].emotion;
  }
  for (int e = 0; e < n_classes; ++e) {
    if (!tally.count(e)) {
      result.warnings.push_back("emotion class " + std::to_string(e) +
                                " absent from corpus; excluded from UAR");
    }
  }
  double sum = 0.0;
  for (const auto& [cls, ct] : tally) {
    double r = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    result.recall[cls] = r;
    sum += r;
  }
  result.uar = 100.0 * sum / static_cast<double>(tally.size());
  return result;
}

void SplitRatios::Validate() const {
  if (train < 0 || enroll <= 0 || trial <= 0) {
    throw ValidationError("split ratios must be non-negative with enroll and trial > 0");
  }
  if (std::abs(train + enroll + trial - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
}

void CorpusSplits::Validate() const {
  std::set<std::string> seen;
  for (const Corpus* c : {&attacker_train, &enroll, &trial}) {
    for (const auto& u : c->utterances) {
      if (!seen.insert(u.utt_id).second) {
        throw ValidationError("utterance " + u.utt_id + " appears in more than one split");
      }
    }
  }
}

CorpusSplits SplitCorpus(const Corpus& corpus, std::uint64_t split_seed,
                         const SplitRatios& ratios) {
  ratios.Validate();
  // Speakers ranked by keyed hash; the first share goes to attacker training.
  std::vector<std::pair<std::uint64_t, std::string>> ranked_speakers;
  for (const auto& spk : corpus.speakers) {
    ranked_speakers.emplace_back(HashCombine(split_seed, Fnv1a64(spk)), spk);
  }
  std::sort(ranked_speakers.begin(), ranked_speakers.end());
  const auto n_train_speakers = static_cast<std::size_t>(
      std::llround(ratios.train * static_cast<double>(corpus.speakers.size())));
  std::set<std::string> train_speakers;
  for (std::size_t i = 0; i < n_train_speakers && i < ranked_speakers.size(); ++i) {
    train_speakers.insert(ranked_speakers[i].second);
  }

  std::vector<int> which(corpus.utterances.size(), 0);  // 0 train, 1 enroll, 2 trial
  const double enroll_share = ratios.enroll / (ratios.enroll + ratios.trial);
  for (const auto& spk : corpus.speakers) {
    if (train_speakers.count(spk)) continue;
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      const auto& u = corpus.utterances[i];
      if (u.speaker_id == spk) ranked.emplace_back(HashCombine(split_seed, Fnv1a64(u.utt_id)), i);
    }
    std::sort(ranked.begin(), ranked.end());
    const auto n = static_cast<Index>(ranked.size());
    // A single-utterance speaker can only be enrolled.
    Index n_enroll = n < 2 ? n
                           : std::clamp<Index>(std::llround(enroll_share * static_cast<double>(n)),
                                               1, n - 1);
    for (Index r = 0; r < n; ++r) which[ranked[r].second] = r < n_enroll ? 1 : 2;
  }
  CorpusSplits splits;
  Corpus* parts[3] = {&splits.attacker_train, &splits.enroll, &splits.trial};
  for (Corpus* p : parts) p->dim = corpus.dim;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    parts[which[i]]->utterances.push_back(corpus.utterances[i]);
  }
  for (Corpus* p : parts) p->speakers = RosterOf(p->utterances);
  return splits;
}

std::size_t TrialList::num_genuine() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.genuine; }));
}

std::size_t TrialList::num_impostor() const { return trials.size() - num_genuine(); }

TrialList BuildTrials(const Corpus& enroll, const Corpus& trial) {
  std::set<std::string> enrolled(enroll.speakers.begin(), enroll.speakers.end());
  TrialList list;
  for (const auto& u : trial.utterances) {
    if (!enrolled.count(u.speaker_id)) {
      throw ValidationError("trial speaker " + u.speaker_id + " has no enrollment utterances");
    }
    for (const auto& spk : enroll.speakers) {
      list.trials.push_back({spk, u.utt_id, spk == u.speaker_id});
    }
  }
  if (list.num_genuine() == 0 || list.num_impostor() == 0) {
    throw ValidationError("trial list needs at least one genuine and one impostor pair");
  }
  return list;
}

std::string ToString(BackendKind kind) { return kind == BackendKind::kCenter ? "center" : "wccn"; }

BackendKind ParseBackend(std::string_view text) {
  if (text == "center") return BackendKind::kCenter;
  if (text == "wccn") return BackendKind::kWccn;
  throw ValidationError("unknown backend '" + std::string(text) + "' (expected center or wccn)");
}

Vector<double> AsvBackend::Project(const Vector<double>& embedding) const {
  return transform * (embedding - mean);
}

AsvBackend TrainBackend(const Corpus& train, BackendKind kind) {
  if (train.utterances.empty()) throw ValidationError("backend training split is empty");
  const Index d = train.dim;
  std::vector<Vector<double>> emb;
  for (const auto& u : train.utterances) emb.push_back(UtteranceEmbedding(u.features));

  AsvBackend backend;
  backend.kind = kind;
  backend.mean = Vector<double>::Zero(d);
  for (const auto& e : emb) backend.mean += e;
  backend.mean /= static_cast<double>(emb.size());
  backend.transform = Matrix<double>::Identity(d, d);
  if (kind == BackendKind::kCenter) return backend;

  std::map<std::string, std::pair<Vector<double>, Index>> speaker_sum;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    auto& [sum, count] = speaker_sum.try_emplace(train.utterances[i].speaker_id,
                                                 Vector<double>::Zero(d), 0).first->second;
    sum += emb[i];
    ++count;
  }
  Matrix<double> within = Matrix<double>::Zero(d, d);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto& [sum, count] = speaker_sum.at(train.utterances[i].speaker_id);
    Vector<double> r = emb[i] - sum / static_cast<double>(count);
    within += r * r.transpose();
  }
  within /= static_cast<double>(emb.size());
  double floor = 1e-3 * within.trace() / static_cast<double>(d);
  if (!(floor > 0)) return backend;
  within += floor * Matrix<double>::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(within);
  backend.transform = eig.eigenvectors() *
                      eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose();
  return backend;
}

SpeakerTemplates BuildTemplates(const Corpus& enroll, const AsvBackend& backend) {
  SpeakerTemplates out;
  std::map<std::string, Index> counts;
  for (const auto& u : enroll.utterances) {
    Vector<double> y = backend.Project(UtteranceEmbedding(u.features));
    auto [it, inserted] = out.templates.try_emplace(u.speaker_id, y);
    if (!inserted) it->second += y;
    ++counts[u.speaker_id];
  }
  for (auto& [spk, t] : out.templates) t /= static_cast<double>(counts[spk]);
  return out;
}

TrialScores ScoreTrials(const TrialList& trials, const SpeakerTemplates& templates,
                        const Corpus& trial_corpus, const AsvBackend& backend) {
  std::unordered_map<std::string, Vector<double>> projected;
  for (const auto& u : trial_corpus.utterances) {
    projected.emplace(u.utt_id, backend.Project(UtteranceEmbedding(u.features)));
  }
  TrialScores scores;
  for (const auto& t : trials.trials) {
    auto emb = projected.find(t.utt_id);
    auto tmpl = templates.templates.find(t.enroll_speaker);
    if (emb == projected.end() || tmpl == templates.templates.end()) {
      throw ValidationError("trial references unknown id: " + t.enroll_speaker + " / " +
                            t.utt_id);
    }
    double s = CosineScore(tmpl->second, emb->second);
    (t.genuine ? scores.genuine : scores.impostor).push_back(s);
  }
  return scores;
}

std::string ToString(AttackMode mode) { return mode == AttackMode::kFull ? "full" : "semi"; }

AttackMode ParseAttackMode(std::string_view text) {
  if (text == "full") return AttackMode::kFull;
  if (text == "semi") return AttackMode::kSemi;
  throw ValidationError("unknown attack mode '" + std::string(text) + "' (expected full or semi)");
}

namespace {

Corpus Apply(const PartyConfig& party, const Corpus& corpus) {
  if (!party.pool) return corpus;
  return AnonymizeCorpus(*party.pool, party.policy, corpus);
}

json DescribeParty(const PartyConfig& party) {
  json j;
  if (!party.pool) {
    j["pool"] = nullptr;
    return j;
  }
  j["strategy"] = party.pool->strategy.ToString();
  j["num_models"] = party.pool->size();
  j["num_clusters"] = party.pool->num_clusters();
  j["pool_fingerprint"] = party.pool->Fingerprint();
  j["granularity"] = ToString(party.policy.granularity);
  j["selection_seed"] = party.policy.seed;
  return j;
}

}  // namespace

EvalReport RunAttack(const CorpusSplits& splits, const AnchorSet& anchors,
                     const AttackConfig& config, AttackArtifacts* artifacts) {
  splits.Validate();
  if (config.mode == AttackMode::kFull) {
    bool same = config.user.pool == config.attacker.pool ||
                (config.user.pool && config.attacker.pool &&
                 config.user.pool->Fingerprint() == config.attacker.pool->Fingerprint());
    if (!same) throw ValidationError("full attack requires the attacker to use the user's pool");
  }
  TrialList trials = BuildTrials(splits.enroll, splits.trial);

  Corpus user_trials = Apply(config.user, splits.trial);
  Corpus attacker_train = Apply(config.attacker, splits.attacker_train);
  Corpus attacker_enroll = Apply(config.attacker, splits.enroll);

  AsvBackend backend = TrainBackend(attacker_train, config.backend);
  SpeakerTemplates templates = BuildTemplates(attacker_enroll, backend);
  TrialScores scores = ScoreTrials(trials, templates, user_trials, backend);

  EvalReport report;
  report.eer = ComputeEer(scores.genuine, scores.impostor);
  report.cer = ContentErrorRate(user_trials, anchors);
  EmotionResult emotion = EmotionUar(user_trials, anchors);
  report.uar_proxy = emotion.uar;
  report.warnings = emotion.warnings;
  report.num_genuine = scores.genuine.size();
  report.num_impostor = scores.impostor.size();
  report.num_trial_frames = user_trials.TotalFrames();
  report.num_trial_utterances = user_trials.utterances.size();

  report.config["mode"] = ToString(config.mode);
  report.config["asv"] = "proxy-ASV: mean-pooled cosine scoring, " + ToString(config.backend) +
                         " backend";
  report.config["user"] = DescribeParty(config.user);
  report.config["attacker"] = DescribeParty(config.attacker);
  report.config["provenance"] = config.provenance;
  if (artifacts) {
    artifacts->user_trials = std::move(user_trials);
    artifacts->attacker_train = std::move(attacker_train);
    artifacts->attacker_enroll = std::move(attacker_enroll);
  }
  return report;
}

json EvalReport::ToJson() const {
  json j;
  j["eer"] = eer;
  j["cer"] = cer;
  j["uar_proxy"] = uar_proxy;
  j["counts"] = {{"genuine", num_genuine},
                 {"impostor", num_impostor},
                 {"frames", num_trial_frames},
                 {"utterances", num_trial_utterances}};
  j["warnings"] = warnings;
  j["config"] = config;
  return j;
}

}  // namespace vqanon
