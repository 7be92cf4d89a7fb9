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


#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vqanon/eval.hpp"
#include "vqanon/parallel.hpp"

using namespace vqanon;

namespace {

SyntheticSpec Spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.dim = 16;
  s.num_phones = 8;
  s.num_speakers = 12;
  s.num_emotions = 4;
  s.utts_per_speaker = 6;
  s.min_frames = 10;
  s.max_frames = 20;
  s.seed = seed;
  return s;
}

std::vector<double> Draw(std::mt19937_64& rng, int n, double mu, double sd, bool coarse) {
  std::normal_distribution<double> g(mu, sd);
  std::vector<double> v(n);
  for (double& x : v) x = coarse ? std::round(g(rng) * 4) / 4 : g(rng);
  return v;
}

double BinomialSd(double p, double n) { return std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("utterance embedding is the frame mean") {
  FeatureMatrix one(1, 3);
  one << 1, -2, 3;
  CHECK((UtteranceEmbedding(one).transpose().array() == one.cast<double>().array()).all());
  FeatureMatrix sym(2, 3);
  sym << 1, -2, 3, -1, 2, -3;
  CHECK(UtteranceEmbedding(sym).isZero(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  FeatureMatrix r(10, 5);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = g(rng);
  Vector<double> e = UtteranceEmbedding(r);
  for (Index j = 0; j < 5; ++j) {
    double s = 0;
    for (Index t = 0; t < 10; ++t) s += r(t, j);
    CHECK(std::abs(e(j) - s / 10) <= 1e-12);
  }
  CHECK_THROWS_AS(UtteranceEmbedding(FeatureMatrix(0, 3)), ValidationError);
}

TEST_CASE("cosine score conventions") {
  Vector<double> a(3), b(3), z = Vector<double>::Zero(3);
  a << 1, 2, 3;
  b << -2, 1, 0;
  CHECK(CosineScore(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(CosineScore(a, b) == 0.0);
  CHECK(CosineScore(a, z) == 0.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Vector<double> x(7), y(7);
    for (Index j = 0; j < 7; ++j) {
      x(j) = g(rng);
      y(j) = g(rng);
    }
    double s = CosineScore(x, y);
    CHECK(std::abs(s - x.dot(y) / (x.norm() * y.norm())) <= 1e-12);
    CHECK((s >= -1 && s <= 1));
  }
}

TEST_CASE("EER fixed points") {
  CHECK(ComputeEer({1, 1, 1}, {0, 0, 0, 0}) == 0.0);
  std::vector<double> same = {0.1, 0.4, 0.4, 0.9, -0.3};
  CHECK(ComputeEer(same, same) == 50.0);
  auto shuffled = same;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(ComputeEer(same, shuffled) == 50.0);
  CHECK(ComputeEer({0.0}, {1.0}) == 100.0);
  CHECK_THROWS_AS(ComputeEer({}, {1.0}), ValidationError);
  CHECK_THROWS_AS(ComputeEer({1.0}, {}), ValidationError);
}

TEST_CASE("EER matches an exhaustive threshold sweep") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    int ng = std::uniform_int_distribution<int>(1, 120)(rng);
    int ni = std::uniform_int_distribution<int>(1, 120)(rng);
    bool coarse = i % 3 == 0;
    auto gen = Draw(rng, ng, 1.0, 1.0, coarse);
    auto imp = Draw(rng, ni, 0.0, 1.0, coarse);
    CHECK(std::abs(ComputeEer(gen, imp) - oracle::EerSweep(gen, imp)) <= 1e-9);
  }
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto gen = Draw(rng, 40, 0.8, 1.0, i % 2 == 0);
    auto imp = Draw(rng, 60, 0.0, 1.0, i % 2 == 0);
    double e = ComputeEer(gen, imp);
    auto f = [](std::vector<double> v) {
      for (double& x : v) x = std::exp(0.5 * x) + 3;
      return v;
    };
    CHECK(ComputeEer(f(gen), f(imp)) == e);
  }
}

TEST_CASE("content error: exact anchors, constant predictor") {
  SyntheticSpec s = Spec(1);
  s.noise_scale = s.speaker_scale = s.emotion_scale = 0;
  auto [corpus, anchors] = GenerateCorpus(s);
  CHECK(ContentErrorRate(corpus, anchors) == 0.0);

  s = Spec(2);
  s.num_speakers = 20;
  s.utts_per_speaker = 20;
  auto [big, a2] = GenerateCorpus(s);
  Corpus flat = big;
  for (auto& u : flat.utterances) u.features.setConstant(0.7f);
  double n = static_cast<double>(big.TotalFrames());
  double p = 1.0 / s.num_phones;
  double cer = ContentErrorRate(flat, a2);
  CHECK(std::abs(cer - 100.0 * (1 - p)) <= 100.0 * 5 * BinomialSd(p, n));

  Corpus wide = big;
  wide.utterances[0].features = FeatureMatrix::Zero(wide.utterances[0].num_frames(), 3);
  CHECK_THROWS_AS(ContentErrorRate(wide, a2), ValidationError);
}

TEST_CASE("content error on per-utterance codebooks tracks raw features") {
  SyntheticSpec s = Spec(3);
  s.speaker_scale = 0.2;
  s.min_frames = 40;
  s.max_frames = 80;
  auto [corpus, anchors] = GenerateCorpus(s);
  KMeansParams p;
  p.num_clusters = 32;
  p.seed = 9;
  KMeansPool resyn = TrainPool(corpus, PartitionStrategy::PerUtterance(), p);
  double raw = ContentErrorRate(corpus, anchors);
  double anon = ContentErrorRate(AnonymizeCorpus(resyn, {}, corpus), anchors);
  CHECK(std::abs(anon - raw) <= 2.0);
}

TEST_CASE("emotion UAR: planted residual, chance level, recount") {
  SyntheticSpec s = Spec(4);
  s.noise_scale = 0;
  s.speaker_scale = 0;
  auto [clean, anchors] = GenerateCorpus(s);
  CHECK(EmotionUar(clean, anchors).uar == 100.0);

  s = Spec(5);
  s.num_speakers = 40;
  s.utts_per_speaker = 25;
  s.min_frames = 5;
  s.max_frames = 10;
  s.emotion_scale = 1.0;
  auto [big, a2] = GenerateCorpus(s);
  Corpus shuffled = big;
  std::mt19937_64 rng(11);
  std::vector<int> labels;
  for (const auto& u : big.utterances) labels.push_back(u.emotion);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) shuffled.utterances[i].emotion = labels[i];
  EmotionResult r = EmotionUar(shuffled, a2);
  double per_class = static_cast<double>(big.utterances.size()) / s.num_emotions;
  double sd = 100.0 * BinomialSd(0.25, per_class) / std::sqrt(4.0);
  CHECK(std::abs(r.uar - 25.0) <= 5 * sd);

  // Confusion-matrix recount from the predictions.
  EmotionResult e = EmotionUar(big, a2);
  std::vector<std::vector<int>> confusion(4, std::vector<int>(4, 0));
  for (std::size_t i = 0; i < big.utterances.size(); ++i) {
    ++confusion[big.utterances[i].emotion][e.predictions[i]];
  }
  double sum = 0;
  for (int c = 0; c < 4; ++c) {
    int row = 0;
    for (int k = 0; k < 4; ++k) row += confusion[c][k];
    sum += static_cast<double>(confusion[c][c]) / row;
  }
  CHECK(std::abs(e.uar - 100.0 * sum / 4) <= 1e-9);
}

TEST_CASE("emotion UAR warns about absent classes") {
  auto [corpus, anchors] = GenerateCorpus(Spec(6));
  Corpus only;
  only.dim = corpus.dim;
  for (const auto& u : corpus.utterances) {
    if (u.emotion != 2) only.utterances.push_back(u);
  }
  only.speakers = RosterOf(only.utterances);
  EmotionResult r = EmotionUar(only, anchors);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("2") != std::string::npos);
  CHECK(r.recall.count(2) == 0);
  CHECK(r.recall.size() == 3);
}

TEST_CASE("CER and UAR are invariant to utterance order") {
  auto [corpus, anchors] = GenerateCorpus(Spec(7));
  Corpus perm = corpus;
  std::mt19937_64 rng(1);
  std::shuffle(perm.utterances.begin(), perm.utterances.end(), rng);
  CHECK(ContentErrorRate(perm, anchors) == ContentErrorRate(corpus, anchors));
  CHECK(EmotionUar(perm, anchors).uar == EmotionUar(corpus, anchors).uar);
}

TEST_CASE("splits are disjoint, covering and seed-determined") {
  auto [corpus, anchors] = GenerateCorpus(Spec(8));
  CorpusSplits a = SplitCorpus(corpus, 5);
  CorpusSplits b = SplitCorpus(corpus, 5);
  CorpusSplits c = SplitCorpus(corpus, 6);
  CHECK_NOTHROW(a.Validate());
  CHECK(a.attacker_train.utterances.size() + a.enroll.utterances.size() +
            a.trial.utterances.size() == corpus.utterances.size());
  auto ids = [](const Corpus& x) {
    std::vector<std::string> v;
    for (const auto& u : x.utterances) v.push_back(u.utt_id);
    return v;
  };
  CHECK(ids(a.trial) == ids(b.trial));
  CHECK(ids(a.trial) != ids(c.trial));
  // Attacker-training speakers are disjoint from the evaluation speakers.
  std::set<std::string> train(a.attacker_train.speakers.begin(), a.attacker_train.speakers.end());
  CHECK(train.size() == 6);
  for (const auto& s : a.trial.speakers) CHECK(train.count(s) == 0);
  CHECK(a.enroll.speakers == a.trial.speakers);

  CorpusSplits bad = a;
  bad.trial.utterances.push_back(a.enroll.utterances[0]);
  CHECK_THROWS_AS(bad.Validate(), ValidationError);
  CHECK_THROWS_AS(SplitCorpus(corpus, 1, {0.5, 0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(SplitCorpus(corpus, 1, {0.5, 0.5, 0.0}), ValidationError);
}

TEST_CASE("trial list is the full enrolled-speaker cross") {
  auto [corpus, anchors] = GenerateCorpus(Spec(9));
  CorpusSplits s = SplitCorpus(corpus, 2);
  TrialList t = BuildTrials(s.enroll, s.trial);
  CHECK(t.trials.size() == s.trial.utterances.size() * s.enroll.speakers.size());
  CHECK(t.num_genuine() == s.trial.utterances.size());
  Corpus missing = s.enroll;
  std::erase_if(missing.utterances,
                [&](const Utterance& u) { return u.speaker_id == s.trial.utterances[0].speaker_id; });
  missing.speakers = RosterOf(missing.utterances);
  CHECK_THROWS_AS(BuildTrials(missing, s.trial), ValidationError);
}

TEST_CASE("run_attack: verbatim leak gives EER 0") {
  auto [corpus, anchors] = GenerateCorpus(Spec(10));
  CorpusSplits s = SplitCorpus(corpus, 3);
  // Enrollment: one utterance per speaker; trials: verbatim copies under new ids.
  Corpus enroll, trial;
  enroll.dim = trial.dim = corpus.dim;
  std::set<std::string> seen;
  for (const auto& u : s.enroll.utterances) {
    if (!seen.insert(u.speaker_id).second) continue;
    enroll.utterances.push_back(u);
    Utterance copy = u;
    copy.utt_id += "_copy";
    trial.utterances.push_back(copy);
  }
  enroll.speakers = trial.speakers = RosterOf(enroll.utterances);
  CorpusSplits leak{s.attacker_train, enroll, trial};
  KMeansParams p;
  p.num_clusters = 8;
  p.seed = 1;
  KMeansPool pool = TrainPool(s.attacker_train, PartitionStrategy::All(), p);
  AttackConfig cfg;
  cfg.mode = AttackMode::kFull;
  cfg.user = cfg.attacker = {&pool, {Granularity::kUtterance, 4}};
  EvalReport r = RunAttack(leak, anchors, cfg);
  CHECK(r.eer == 0.0);
}

TEST_CASE("run_attack: raw speaker signal vs fresh noise") {
  SyntheticSpec spec = Spec(11);
  spec.num_speakers = 60;
  spec.utts_per_speaker = 16;
  spec.speaker_scale = 1.5;
  spec.noise_scale = 0.3;
  auto [corpus, anchors] = GenerateCorpus(spec);
  CorpusSplits s = SplitCorpus(corpus, 4);
  AttackConfig raw;
  EvalReport r = RunAttack(s, anchors, raw);
  CHECK(r.eer <= 5.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<float> g;
  CorpusSplits noisy = s;
  for (auto& u : noisy.trial.utterances) {
    for (Index i = 0; i < u.features.size(); ++i) u.features.data()[i] = g(rng);
  }
  EvalReport n = RunAttack(noisy, anchors, raw);
  CHECK(std::abs(n.eer - 50.0) <= 10.0);
}

TEST_CASE("run_attack: full mode demands the user's pool; report is deterministic") {
  auto [corpus, anchors] = GenerateCorpus(Spec(12));
  CorpusSplits s = SplitCorpus(corpus, 7);
  KMeansParams p;
  p.num_clusters = 8;
  p.seed = 1;
  KMeansPool a = TrainPool(s.attacker_train, PartitionStrategy::PerGroup(2), p);
  p.seed = 2;
  KMeansPool b = TrainPool(s.attacker_train, PartitionStrategy::All(), p);
  AttackConfig cfg;
  cfg.mode = AttackMode::kFull;
  cfg.user = {&a, {Granularity::kUtterance, 1}};
  cfg.attacker = {&b, {Granularity::kUtterance, 1}};
  CHECK_THROWS_AS(RunAttack(s, anchors, cfg), ValidationError);

  cfg.attacker.pool = &a;
  SetNumThreads(1);
  EvalReport r1 = RunAttack(s, anchors, cfg);
  SetNumThreads(4);
  EvalReport r2 = RunAttack(s, anchors, cfg);
  SetNumThreads(0);
  CHECK(r1.ToJson().dump() == r2.ToJson().dump());
  CHECK(r1.config["user"]["pool_fingerprint"] == r1.config["attacker"]["pool_fingerprint"]);
  for (double v : {r1.eer, r1.cer, r1.uar_proxy}) CHECK((v >= 0 && v <= 100));
  json j = r1.ToJson();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"eer", "cer", "uar_proxy", "counts", "warnings", "config"});
  CHECK(j["config"]["asv"].get<std::string>().find("proxy-ASV") == 0);

  cfg.mode = AttackMode::kSemi;
  cfg.attacker.pool = &b;
  EvalReport semi = RunAttack(s, anchors, cfg);
  CHECK(semi.config["user"]["pool_fingerprint"] != semi.config["attacker"]["pool_fingerprint"]);
  CHECK(semi.num_genuine == s.trial.utterances.size());
}

TEST_CASE("backend names parse") {
  CHECK(ParseBackend("center") == BackendKind::kCenter);
  CHECK(ParseAttackMode("semi") == AttackMode::kSemi);
  CHECK_THROWS_AS(ParseBackend("plda"), ValidationError);
  CHECK_THROWS_AS(ParseAttackMode("half"), ValidationError);
}

}  // TEST_SUITE
