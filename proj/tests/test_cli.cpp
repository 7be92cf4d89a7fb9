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


#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vqanon/cli.hpp"
#include "vqanon/knn.hpp"

using namespace vqanon;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string S(const fs::path& p) { return p.string(); }

// Small corpus on disk shared by several cases.
fs::path MakeCorpus(const fs::path& dir, int speakers = 6, int utts = 4) {
  Run r = Cli({"gen-corpus", "--out", S(dir), "--seed", "3", "--dim", "8", "--speakers",
               std::to_string(speakers), "--utts", std::to_string(utts), "--phones", "5",
               "--min-frames", "8", "--max-frames", "14", "--speaker-scale", "1.5"});
  REQUIRE(r.code == 0);
  return dir / "manifest.json";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-corpus: success, validation and I/O exit codes") {
  auto dir = oracle::ScratchDir("cli_gen");
  Run ok = Cli({"gen-corpus", "--out", S(dir / "c"), "--seed", "1", "--speakers", "3"});
  CHECK(ok.code == 0);
  CHECK(ok.out == S(dir / "c" / "manifest.json") + "\n");
  CHECK(fs::exists(dir / "c" / "manifest.json"));
  CHECK(fs::exists(dir / "c" / "anchors.json"));

  Run neg = Cli({"gen-corpus", "--out", S(dir / "d"), "--seed", "1", "--noise-scale", "-0.5"});
  CHECK(neg.code == 2);
  CHECK(neg.err.find("noise_scale") != std::string::npos);

  Run noseed = Cli({"gen-corpus", "--out", S(dir / "d")});
  CHECK(noseed.code == 2);
  CHECK(noseed.err.find("corpus.spec.seed") != std::string::npos);

  std::ofstream(dir / "blocker") << "x";
  Run io = Cli({"gen-corpus", "--out", S(dir / "blocker" / "sub"), "--seed", "1"});
  CHECK(io.code == 3);
}

TEST_CASE("argument errors and help") {
  CHECK(Cli({}).code == 2);
  CHECK(Cli({"bogus"}).code == 2);
  CHECK(Cli({"gen-corpus", "--no-such-flag", "1"}).code == 2);
  CHECK(Cli({"train-pool", "--clusters", "many"}).code == 2);
  Run help = Cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("attack-sim") != std::string::npos);
  CHECK(Cli({"gen-corpus", "--help"}).code == 0);
}

TEST_CASE("config file with flag and --set overrides; missing config is an I/O error") {
  auto dir = oracle::ScratchDir("cli_config");
  json cfg = {{"corpus", {{"spec", {{"seed", 5}, {"num_speakers", 3}, {"dim", 4}}}}},
              {"output_dir", S(dir / "from_config")}};
  WriteJson(dir / "cfg.json", cfg);
  Run r = Cli({"gen-corpus", "--config", S(dir / "cfg.json"), "--set", "corpus.spec.dim=6",
               "--speakers", "4"});
  REQUIRE(r.code == 0);
  Corpus c = LoadCorpus(dir / "from_config" / "manifest.json");
  CHECK(c.dim == 6);
  CHECK(c.speakers.size() == 4);
  CHECK(Cli({"gen-corpus", "--config", S(dir / "absent.json")}).code == 3);
  CHECK(Cli({"gen-corpus", "--config", S(dir / "cfg.json"), "--set", "novalue"}).code == 2);
  CHECK(Cli({"gen-corpus", "--config", S(dir / "cfg.json"), "--set", "corpus.spec.dim=\"x\""})
            .code == 2);
}

TEST_CASE("train-pool: model counts and byte-identical reruns") {
  auto dir = oracle::ScratchDir("cli_train");
  Run g = Cli({"gen-corpus", "--out", S(dir / "c"), "--seed", "2", "--dim", "4", "--speakers",
               "1160", "--utts", "1", "--phones", "3", "--min-frames", "4", "--max-frames", "6"});
  REQUIRE(g.code == 0);
  auto manifest = S(dir / "c" / "manifest.json");
  Run p = Cli({"train-pool", "--manifest", manifest, "--strategy", "group:20", "--clusters", "2",
               "--seed", "9", "--out", S(dir / "p20")});
  REQUIRE(p.code == 0);
  CHECK(ReadJson(dir / "p20" / "pool.json")["num_models"] == 58);

  auto small = MakeCorpus(dir / "small");
  for (const char* out : {"a1", "a2"}) {
    Run a = Cli({"train-pool", "--manifest", S(small), "--strategy", "all", "--clusters", "4",
                 "--seed", "9", "--out", S(dir / out)});
    REQUIRE(a.code == 0);
  }
  CHECK(ReadJson(dir / "a1" / "pool.json")["num_models"] == 1);
  CHECK(oracle::Snapshot(dir / "a1") == oracle::Snapshot(dir / "a2"));

  CHECK(Cli({"train-pool", "--manifest", S(small), "--strategy", "group:99", "--clusters", "4",
             "--seed", "9", "--out", S(dir / "x")}).code == 2);
  CHECK(Cli({"train-pool", "--manifest", S(small), "--strategy", "bad", "--seed", "9", "--out",
             S(dir / "x")}).code == 2);
}

TEST_CASE("anonymize: singleton reduces to quantize; reruns identical; granularities differ") {
  auto dir = oracle::ScratchDir("cli_anon");
  auto manifest = MakeCorpus(dir / "c");
  REQUIRE(Cli({"train-pool", "--manifest", S(manifest), "--strategy", "all", "--clusters", "4",
               "--seed", "1", "--out", S(dir / "one")}).code == 0);
  REQUIRE(Cli({"anonymize", "--manifest", S(manifest), "--pool", S(dir / "one"), "--seed", "2",
               "--out", S(dir / "q")}).code == 0);
  Corpus c = LoadCorpus(manifest);
  Corpus q = LoadCorpus(dir / "q" / "manifest.json");
  KMeansPool one = LoadPool(dir / "one");
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    CHECK((q.utterances[i].features.array() ==
           Quantize(one.models[0], c.utterances[i].features).array()).all());
  }

  REQUIRE(Cli({"train-pool", "--manifest", S(manifest), "--strategy", "group:1", "--clusters",
               "4", "--seed", "1", "--out", S(dir / "multi")}).code == 0);
  for (auto [g, out] : {std::pair{"frame", "f1"}, std::pair{"frame", "f2"},
                        std::pair{"utterance", "u1"}}) {
    REQUIRE(Cli({"anonymize", "--manifest", S(manifest), "--pool", S(dir / "multi"),
                 "--granularity", g, "--seed", "5", "--out", S(dir / out)}).code == 0);
  }
  CHECK(oracle::Snapshot(dir / "f1") == oracle::Snapshot(dir / "f2"));
  CHECK(oracle::Snapshot(dir / "f1") != oracle::Snapshot(dir / "u1"));

  CHECK(Cli({"anonymize", "--manifest", S(manifest), "--pool", S(dir / "none"), "--seed", "5",
             "--out", S(dir / "z")}).code == 3);
  CHECK(Cli({"anonymize", "--manifest", S(manifest), "--pool", S(dir / "multi"), "--out",
             S(dir / "z")}).code == 2);
  CHECK(Cli({"anonymize", "--manifest", S(manifest), "--pool", S(dir / "multi"), "--seed", "1",
             "--granularity", "word", "--out", S(dir / "z")}).code == 2);
}

TEST_CASE("knn-anonymize: self identity, full-bank mean, brute-force rows") {
  auto dir = oracle::ScratchDir("cli_knn");
  auto manifest = MakeCorpus(dir / "c", 3, 2);
  Corpus c = LoadCorpus(manifest);
  // A corpus holding only the target speaker: k = 1 must return it unchanged.
  Corpus target;
  target.dim = c.dim;
  for (const auto& u : c.utterances) {
    if (u.speaker_id == "spk0001") target.utterances.push_back(u);
  }
  target.speakers = {"spk0001"};
  SaveCorpus(target, dir / "t");
  REQUIRE(Cli({"knn-anonymize", "--manifest", S(dir / "t" / "manifest.json"), "--target-speaker",
               "spk0001", "--k", "1", "--out", S(dir / "id")}).code == 0);
  Corpus id = LoadCorpus(dir / "id" / "manifest.json");
  for (std::size_t i = 0; i < target.utterances.size(); ++i) {
    CHECK((id.utterances[i].features.array() == target.utterances[i].features.array()).all());
  }

  TargetBank bank = BuildBank(c, "spk0002");
  REQUIRE(Cli({"knn-anonymize", "--manifest", S(manifest), "--target-speaker", "spk0002", "--k",
               std::to_string(bank.size()), "--out", S(dir / "mean")}).code == 0);
  Corpus mean = LoadCorpus(dir / "mean" / "manifest.json");
  Eigen::RowVectorXd m = bank.frames.cast<double>().colwise().mean();
  for (const auto& u : mean.utterances) {
    for (Index t = 0; t < u.num_frames(); ++t) {
      CHECK((u.features.row(t).cast<double>() - m).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }

  REQUIRE(Cli({"knn-anonymize", "--manifest", S(manifest), "--bank-manifest", S(manifest),
               "--target-speaker", "spk0002", "--k", "3", "--out", S(dir / "k3")}).code == 0);
  Corpus k3 = LoadCorpus(dir / "k3" / "manifest.json");
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    oracle::Mat expect = oracle::KnnReplace(c.utterances[i].features.cast<double>(),
                                            bank.frames.cast<double>(), 3);
    CHECK((k3.utterances[i].features.cast<double>() - expect).cwiseAbs().maxCoeff() <= 1e-6);
  }

  CHECK(Cli({"knn-anonymize", "--manifest", S(manifest), "--target-speaker", "nobody", "--k",
             "1", "--out", S(dir / "z")}).code == 2);
  CHECK(Cli({"knn-anonymize", "--manifest", S(manifest), "--target-speaker", "spk0002", "--k",
             "100000", "--out", S(dir / "z")}).code == 2);
}

TEST_CASE("evaluate and attack-sim: hashes, provenance, reruns, thread counts") {
  auto dir = oracle::ScratchDir("cli_eval");
  auto manifest = MakeCorpus(dir / "c", 8, 6);
  REQUIRE(Cli({"train-pool", "--manifest", S(manifest), "--strategy", "group:2", "--clusters",
               "4", "--seed", "1", "--out", S(dir / "user")}).code == 0);
  REQUIRE(Cli({"train-pool", "--manifest", S(manifest), "--strategy", "all", "--clusters", "4",
               "--seed", "2", "--out", S(dir / "att")}).code == 0);

  std::vector<std::string> full = {"evaluate", "--manifest", S(manifest), "--user-pool",
                                   S(dir / "user"), "--mode", "full", "--seed", "3",
                                   "--attacker-seed", "4", "--split-seed", "5"};
  auto with = [](std::vector<std::string> v, std::initializer_list<std::string> more) {
    v.insert(v.end(), more);
    return v;
  };
  REQUIRE(Cli(with(full, {"--out", S(dir / "e1"), "--threads", "1"})).code == 0);
  std::string first = oracle::ReadBytes(dir / "e1" / "report.json");
  fs::remove_all(dir / "e1");
  REQUIRE(Cli(with(full, {"--out", S(dir / "e1"), "--threads", "4"})).code == 0);
  CHECK(oracle::ReadBytes(dir / "e1" / "report.json") == first);
  json rep = ReadJson(dir / "e1" / "report.json");
  CHECK(rep["config"]["user"]["pool_fingerprint"] == rep["config"]["attacker"]["pool_fingerprint"]);
  CHECK(rep["resolved_config"]["split"]["seed"] == 5);
  CHECK(rep["resolved_config"]["user"]["pool"] == S(dir / "user"));

  std::vector<std::string> semi = {"evaluate", "--manifest", S(manifest), "--user-pool",
                                   S(dir / "user"), "--attacker-pool", S(dir / "att"), "--mode",
                                   "semi", "--seed", "3", "--attacker-seed", "4", "--split-seed",
                                   "5", "--out", S(dir / "e3"), "--dump-embeddings"};
  REQUIRE(Cli(semi).code == 0);
  json s = ReadJson(dir / "e3" / "report.json");
  CHECK(s["config"]["user"]["pool_fingerprint"] != s["config"]["attacker"]["pool_fingerprint"]);
  for (const char* f : {"trial_raw", "trial_user", "enroll_attacker", "train_attacker"}) {
    CHECK(fs::exists(dir / "e3" / "embeddings" / (std::string(f) + ".sefm")));
    CHECK(fs::exists(dir / "e3" / "embeddings" / (std::string(f) + ".json")));
  }

  CHECK(Cli(with(full, {"--out", S(dir / "e4"), "--mode", "half"})).code == 2);
  CHECK(Cli({"evaluate", "--manifest", S(manifest), "--user-pool", S(dir / "user"), "--mode",
             "full", "--seed", "3", "--attacker-seed", "4", "--out", S(dir / "e5")}).code == 2);

  std::vector<std::string> sim = {"attack-sim", "--manifest", S(manifest), "--strategy",
                                  "group:2", "--attacker-strategy", "group:1", "--clusters", "4",
                                  "--attacker-clusters", "4", "--kmeans-seed", "1",
                                  "--attacker-kmeans-seed", "2", "--mode", "semi", "--seed", "3",
                                  "--attacker-seed", "4", "--split-seed", "5"};
  REQUIRE(Cli(with(sim, {"--out", S(dir / "s1"), "--threads", "1"})).code == 0);
  auto sim_first = oracle::Snapshot(dir / "s1");
  fs::remove_all(dir / "s1");
  REQUIRE(Cli(with(sim, {"--out", S(dir / "s1"), "--threads", "3"})).code == 0);
  CHECK(oracle::Snapshot(dir / "s1") == sim_first);
  json sj = ReadJson(dir / "s1" / "report.json");
  CHECK(sj["config"]["attacker"]["strategy"] == "group:1");
  CHECK(sj["config"]["provenance"]["split_seed"] == 5);

  // Full mode rejects an attacker spec that differs from the user's.
  CHECK(Cli(with(sim, {"--out", S(dir / "s3"), "--mode", "full"})).code == 2);
  REQUIRE(Cli({"attack-sim", "--manifest", S(manifest), "--strategy", "none", "--mode", "full",
               "--split-seed", "5", "--out", S(dir / "raw")}).code == 0);
  CHECK(ReadJson(dir / "raw" / "report.json")["config"]["user"]["pool"].is_null());
}

TEST_CASE("attack-sim can generate its corpus from the config") {
  auto dir = oracle::ScratchDir("cli_sim_spec");
  json cfg = {
      {"corpus", {{"spec", {{"seed", 1}, {"dim", 8}, {"num_speakers", 8}, {"num_phones", 5},
                            {"utts_per_speaker", 4}, {"min_frames", 6}, {"max_frames", 9}}}}},
      {"user", {{"strategy", "all"}, {"kmeans", {{"num_clusters", 4}, {"seed", 2}}}}},
      {"selection", {{"seed", 3}}},
      {"attacker_selection", {{"seed", 5}}},
      {"split", {{"seed", 4}}},
      {"mode", "full"},
      {"output_dir", S(dir / "out")}};
  WriteJson(dir / "cfg.json", cfg);
  Run r = Cli({"attack-sim", "--config", S(dir / "cfg.json")});
  REQUIRE(r.code == 0);
  json rep = ReadJson(dir / "out" / "report.json");
  CHECK(rep["resolved_config"] == cfg);
  CHECK(rep["counts"]["genuine"].get<int>() > 0);
}

}  // TEST_SUITE
