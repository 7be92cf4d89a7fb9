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


#include "vqanon/cli.hpp"

#include <algorithm>
#include <optional>

#include "CLI11.hpp"
#include "vqanon/binary_io.hpp"
#include "vqanon/knn.hpp"
#include "vqanon/parallel.hpp"

namespace vqanon {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> SplitPath(std::string_view dotted) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = dotted.find('.', start);
    parts.emplace_back(dotted.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

const json* Lookup(const json& doc, std::string_view dotted) {
  const json* node = &doc;
  for (const auto& part : SplitPath(dotted)) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end() || it->is_null()) return nullptr;
    node = &*it;
  }
  return node;
}

template <typename T>
T Get(const ExperimentConfig& c, std::string_view path) {
  try {
    return c.Require(path).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config field '" + std::string(path) + "' has the wrong type");
  }
}

template <typename T>
T GetOr(const ExperimentConfig& c, std::string_view path, T fallback) {
  return c.Has(path) ? Get<T>(c, path) : fallback;
}

}  // namespace

ExperimentConfig ExperimentConfig::FromFile(const fs::path& path) {
  json doc = ReadJson(path);
  if (!doc.is_object()) throw ValidationError("config must be a JSON object: " + path.string());
  return ExperimentConfig(std::move(doc));
}

void ExperimentConfig::Set(std::string_view dotted_path, json value) {
  json* node = &doc_;
  auto parts = SplitPath(dotted_path);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (!next.is_object()) next = json::object();
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

bool ExperimentConfig::Has(std::string_view dotted_path) const {
  return Lookup(doc_, dotted_path) != nullptr;
}

const json& ExperimentConfig::Require(std::string_view dotted_path) const {
  const json* node = Lookup(doc_, dotted_path);
  if (!node) throw ValidationError("missing required config field '" + std::string(dotted_path) + "'");
  return *node;
}

SyntheticSpec ExperimentConfig::CorpusSpec() const {
  SyntheticSpec s;
  s.dim = GetOr<Index>(*this, "corpus.spec.dim", s.dim);
  s.num_phones = GetOr<int>(*this, "corpus.spec.num_phones", s.num_phones);
  s.num_speakers = GetOr<int>(*this, "corpus.spec.num_speakers", s.num_speakers);
  s.num_emotions = GetOr<int>(*this, "corpus.spec.num_emotions", s.num_emotions);
  s.utts_per_speaker = GetOr<int>(*this, "corpus.spec.utts_per_speaker", s.utts_per_speaker);
  s.min_frames = GetOr<int>(*this, "corpus.spec.min_frames", s.min_frames);
  s.max_frames = GetOr<int>(*this, "corpus.spec.max_frames", s.max_frames);
  s.phone_scale = GetOr<double>(*this, "corpus.spec.phone_scale", s.phone_scale);
  s.speaker_scale = GetOr<double>(*this, "corpus.spec.speaker_scale", s.speaker_scale);
  s.emotion_scale = GetOr<double>(*this, "corpus.spec.emotion_scale", s.emotion_scale);
  s.noise_scale = GetOr<double>(*this, "corpus.spec.noise_scale", s.noise_scale);
  s.seed = Get<std::uint64_t>(*this, "corpus.spec.seed");
  s.Validate();
  return s;
}

KMeansParams ExperimentConfig::KMeans(std::string_view party) const {
  const std::string base = std::string(party) + ".kmeans.";
  KMeansParams p;
  p.num_clusters = GetOr<Index>(*this, base + "num_clusters", p.num_clusters);
  p.max_iters = GetOr<int>(*this, base + "max_iters", p.max_iters);
  p.rel_tol = GetOr<double>(*this, base + "rel_tol", p.rel_tol);
  p.num_init = GetOr<int>(*this, base + "num_init", p.num_init);
  if (Has(base + "batch_size")) p.batch_size = Get<Index>(*this, base + "batch_size");
  p.seed = Get<std::uint64_t>(*this, base + "seed");
  p.Validate();
  return p;
}

PartitionStrategy ExperimentConfig::Strategy(std::string_view party) const {
  return PartitionStrategy::Parse(
      GetOr<std::string>(*this, std::string(party) + ".strategy", "all"));
}

SelectionPolicy ExperimentConfig::Selection(std::string_view key) const {
  SelectionPolicy p;
  p.granularity =
      ParseGranularity(GetOr<std::string>(*this, std::string(key) + ".granularity", "utterance"));
  p.seed = Get<std::uint64_t>(*this, std::string(key) + ".seed");
  return p;
}

SplitRatios ExperimentConfig::Ratios() const {
  SplitRatios r;
  r.train = GetOr<double>(*this, "split.train", r.train);
  r.enroll = GetOr<double>(*this, "split.enroll", r.enroll);
  r.trial = GetOr<double>(*this, "split.trial", r.trial);
  r.Validate();
  return r;
}

fs::path ExperimentConfig::OutputDir() const { return Get<std::string>(*this, "output_dir"); }

namespace {

fs::path ManifestPath(const ExperimentConfig& c) { return Get<std::string>(c, "corpus.manifest"); }

fs::path AnchorsPath(const ExperimentConfig& c) {
  if (c.Has("corpus.anchors")) return Get<std::string>(c, "corpus.anchors");
  return ManifestPath(c).parent_path() / "anchors.json";
}

void WriteReport(const EvalReport& report, const ExperimentConfig& config, const fs::path& path) {
  json doc = report.ToJson();
  doc["resolved_config"] = config.doc();
  WriteJson(path, doc);
}

void MaybeDump(const ExperimentConfig& config, const fs::path& out, const Corpus& raw_trials,
               const AttackArtifacts& artifacts) {
  if (!GetOr<bool>(config, "dump_embeddings", false)) return;
  fs::path dir = out / "embeddings";
  EnsureDirectory(dir);
  DumpEmbeddings(raw_trials, dir / "trial_raw.sefm");
  DumpEmbeddings(artifacts.user_trials, dir / "trial_user.sefm");
  DumpEmbeddings(artifacts.attacker_enroll, dir / "enroll_attacker.sefm");
  DumpEmbeddings(artifacts.attacker_train, dir / "train_attacker.sefm");
}

bool NoAnonymization(const ExperimentConfig& c, std::string_view party) {
  return GetOr<std::string>(c, std::string(party) + ".strategy", "all") == "none";
}

}  // namespace

fs::path CmdGenCorpus(const ExperimentConfig& config) {
  SyntheticSpec spec = config.CorpusSpec();
  fs::path out = config.OutputDir();
  auto [corpus, anchors] = GenerateCorpus(spec);
  fs::path manifest = SaveCorpus(corpus, out);
  SaveAnchors(anchors, out);
  return manifest;
}

fs::path CmdTrainPool(const ExperimentConfig& config) {
  Corpus corpus = LoadCorpus(ManifestPath(config));
  KMeansPool pool = TrainPool(corpus, config.Strategy("user"), config.KMeans("user"));
  fs::path out = config.OutputDir();
  SavePool(pool, out);
  return out / "pool.json";
}

fs::path CmdAnonymize(const ExperimentConfig& config) {
  Corpus corpus = LoadCorpus(ManifestPath(config));
  KMeansPool pool = LoadPool(Get<std::string>(config, "user.pool"));
  Corpus anon = AnonymizeCorpus(pool, config.Selection("selection"), corpus);
  return SaveCorpus(anon, config.OutputDir());
}

fs::path CmdKnnAnonymize(const ExperimentConfig& config) {
  Corpus corpus = LoadCorpus(ManifestPath(config));
  std::optional<Corpus> bank_corpus;
  if (config.Has("knn.bank_manifest")) {
    bank_corpus = LoadCorpus(Get<std::string>(config, "knn.bank_manifest"));
  }
  TargetBank bank = BuildBank(bank_corpus ? *bank_corpus : corpus,
                              Get<std::string>(config, "knn.target_speaker"));
  Corpus anon = KnnAnonymizeCorpus(corpus, bank, Get<Index>(config, "knn.k"));
  return SaveCorpus(anon, config.OutputDir());
}

fs::path CmdEvaluate(const ExperimentConfig& config) {
  Corpus corpus = LoadCorpus(ManifestPath(config));
  AnchorSet anchors = LoadAnchors(AnchorsPath(config));
  AttackMode mode = ParseAttackMode(GetOr<std::string>(config, "mode", "semi"));
  CorpusSplits splits = SplitCorpus(corpus, Get<std::uint64_t>(config, "split.seed"),
                                    config.Ratios());

  std::optional<KMeansPool> user_pool;
  std::optional<KMeansPool> attacker_pool;
  if (config.Has("user.pool")) user_pool = LoadPool(Get<std::string>(config, "user.pool"));
  if (config.Has("attacker.pool")) {
    attacker_pool = LoadPool(Get<std::string>(config, "attacker.pool"));
  }
  AttackConfig attack;
  attack.mode = mode;
  attack.backend = ParseBackend(GetOr<std::string>(config, "backend", "wccn"));
  attack.user = {user_pool ? &*user_pool : nullptr,
                 user_pool ? config.Selection("selection") : SelectionPolicy{}};
  const KMeansPool* att = attacker_pool ? &*attacker_pool : nullptr;
  if (mode == AttackMode::kFull && !att) att = attack.user.pool;
  attack.attacker = {att, att ? config.Selection("attacker_selection") : SelectionPolicy{}};
  attack.provenance = {{"split_seed", Get<std::uint64_t>(config, "split.seed")}};

  AttackArtifacts artifacts;
  EvalReport report = RunAttack(splits, anchors, attack, &artifacts);
  fs::path out = config.OutputDir();
  EnsureDirectory(out);
  MaybeDump(config, out, splits.trial, artifacts);
  WriteReport(report, config, out / "report.json");
  return out / "report.json";
}

fs::path CmdAttackSim(const ExperimentConfig& config) {
  Corpus corpus;
  AnchorSet anchors;
  if (config.Has("corpus.manifest")) {
    corpus = LoadCorpus(ManifestPath(config));
    anchors = LoadAnchors(AnchorsPath(config));
  } else {
    std::tie(corpus, anchors) = GenerateCorpus(config.CorpusSpec());
  }
  AttackMode mode = ParseAttackMode(GetOr<std::string>(config, "mode", "semi"));
  const auto split_seed = Get<std::uint64_t>(config, "split.seed");
  CorpusSplits splits = SplitCorpus(corpus, split_seed, config.Ratios());

  // Per-utterance codebooks must cover the utterances they are applied to.
  auto train = [&](std::string_view party) -> std::optional<KMeansPool> {
    if (NoAnonymization(config, party)) return std::nullopt;
    PartitionStrategy strategy = config.Strategy(party);
    const Corpus& source =
        strategy.kind == PartitionKind::kPerUtterance ? corpus : splits.attacker_train;
    return TrainPool(source, strategy, config.KMeans(party));
  };

  std::optional<KMeansPool> user_pool = train("user");
  std::optional<KMeansPool> attacker_pool;
  if (mode == AttackMode::kFull) {
    if (config.Has("attacker") && config.Require("attacker") != config.Require("user")) {
      throw ValidationError("full attack requires the attacker pool spec to equal the user's");
    }
  } else {
    attacker_pool = train("attacker");
  }

  AttackConfig attack;
  attack.mode = mode;
  attack.backend = ParseBackend(GetOr<std::string>(config, "backend", "wccn"));
  attack.user = {user_pool ? &*user_pool : nullptr,
                 user_pool ? config.Selection("selection") : SelectionPolicy{}};
  const KMeansPool* att = mode == AttackMode::kFull ? attack.user.pool
                                                     : (attacker_pool ? &*attacker_pool : nullptr);
  attack.attacker = {att, att ? config.Selection("attacker_selection") : SelectionPolicy{}};
  attack.provenance = {{"split_seed", split_seed}, {"corpus_id", corpus.Fingerprint()}};

  AttackArtifacts artifacts;
  EvalReport report = RunAttack(splits, anchors, attack, &artifacts);
  fs::path out = config.OutputDir();
  EnsureDirectory(out);
  MaybeDump(config, out, splits.trial, artifacts);
  WriteReport(report, config, out / "report.json");
  return out / "report.json";
}

void DumpEmbeddings(const Corpus& corpus, const fs::path& sefm_path) {
  FeatureMatrix emb(static_cast<Index>(corpus.utterances.size()), corpus.dim);
  json rows = json::array();
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    emb.row(static_cast<Index>(i)) = UtteranceEmbedding(u.features).cast<float>().transpose();
    rows.push_back({{"utt_id", u.utt_id}, {"speaker_id", u.speaker_id}, {"emotion", u.emotion}});
  }
  WriteFeatureFile(sefm_path, emb);
  fs::path index = sefm_path;
  index.replace_extension(".json");
  WriteJson(index, rows);
}

namespace {

// Flag values are taken as JSON when they parse as a JSON scalar, else as strings.
json FlagValue(const std::string& text) {
  json v = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded() || v.is_object() || v.is_array()) return text;
  return v;
}

struct Override {
  std::string flag;
  std::string path;
  std::string help;
  bool as_string = false;
};

const std::vector<Override>& OverridesFor(const std::string& command) {
  static const std::vector<Override> gen = {
      {"--seed", "corpus.spec.seed", "corpus RNG seed"},
      {"--dim", "corpus.spec.dim", "feature dimension"},
      {"--speakers", "corpus.spec.num_speakers", "number of speakers"},
      {"--phones", "corpus.spec.num_phones", "number of content classes"},
      {"--emotions", "corpus.spec.num_emotions", "number of emotion classes"},
      {"--utts", "corpus.spec.utts_per_speaker", "utterances per speaker"},
      {"--min-frames", "corpus.spec.min_frames", "shortest utterance"},
      {"--max-frames", "corpus.spec.max_frames", "longest utterance"},
      {"--phone-scale", "corpus.spec.phone_scale", "content anchor scale"},
      {"--speaker-scale", "corpus.spec.speaker_scale", "speaker offset scale"},
      {"--emotion-scale", "corpus.spec.emotion_scale", "emotion offset scale"},
      {"--noise-scale", "corpus.spec.noise_scale", "frame noise std"},
  };
  static const std::vector<Override> train = {
      {"--manifest", "corpus.manifest", "corpus manifest.json", true},
      {"--strategy", "user.strategy", "all | group:<L> | utterance", true},
      {"--clusters", "user.kmeans.num_clusters", "codebook size K"},
      {"--max-iters", "user.kmeans.max_iters", "Lloyd iteration cap"},
      {"--num-init", "user.kmeans.num_init", "k-means++ restarts"},
      {"--batch-size", "user.kmeans.batch_size", "mini-batch size"},
      {"--seed", "user.kmeans.seed", "k-means seed"},
  };
  static const std::vector<Override> anonymize = {
      {"--manifest", "corpus.manifest", "corpus manifest.json", true},
      {"--pool", "user.pool", "pool directory", true},
      {"--granularity", "selection.granularity", "utterance | frame", true},
      {"--seed", "selection.seed", "model-selection seed"},
  };
  static const std::vector<Override> knn = {
      {"--manifest", "corpus.manifest", "source corpus manifest.json", true},
      {"--bank-manifest", "knn.bank_manifest", "corpus holding the target speaker", true},
      {"--target-speaker", "knn.target_speaker", "target speaker id", true},
      {"--k", "knn.k", "neighbours averaged per frame"},
  };
  static const std::vector<Override> evaluate = {
      {"--manifest", "corpus.manifest", "corpus manifest.json", true},
      {"--anchors", "corpus.anchors", "anchors.json (default: beside the manifest)", true},
      {"--user-pool", "user.pool", "user pool directory", true},
      {"--attacker-pool", "attacker.pool", "attacker pool directory", true},
      {"--mode", "mode", "full | semi", true},
      {"--granularity", "selection.granularity", "user selection granularity", true},
      {"--seed", "selection.seed", "user selection seed"},
      {"--attacker-seed", "attacker_selection.seed", "attacker selection seed"},
      {"--split-seed", "split.seed", "split seed"},
      {"--backend", "backend", "center | wccn", true},
  };
  static const std::vector<Override> attack = {
      {"--manifest", "corpus.manifest", "corpus manifest.json (else corpus.spec)", true},
      {"--anchors", "corpus.anchors", "anchors.json (default: beside the manifest)", true},
      {"--strategy", "user.strategy", "user: none | all | group:<L> | utterance", true},
      {"--attacker-strategy", "attacker.strategy", "attacker strategy (semi mode)", true},
      {"--clusters", "user.kmeans.num_clusters", "user codebook size K"},
      {"--attacker-clusters", "attacker.kmeans.num_clusters", "attacker codebook size K"},
      {"--kmeans-seed", "user.kmeans.seed", "user k-means seed"},
      {"--attacker-kmeans-seed", "attacker.kmeans.seed", "attacker k-means seed"},
      {"--mode", "mode", "full | semi", true},
      {"--granularity", "selection.granularity", "user selection granularity", true},
      {"--seed", "selection.seed", "user selection seed"},
      {"--attacker-seed", "attacker_selection.seed", "attacker selection seed"},
      {"--split-seed", "split.seed", "split seed"},
      {"--backend", "backend", "center | wccn", true},
  };
  static const std::vector<Override> none;
  if (command == "gen-corpus") return gen;
  if (command == "train-pool") return train;
  if (command == "anonymize") return anonymize;
  if (command == "knn-anonymize") return knn;
  if (command == "evaluate") return evaluate;
  if (command == "attack-sim") return attack;
  return none;
}

struct Subcommand {
  std::string name;
  std::string help;
  fs::path (*run)(const ExperimentConfig&);
};

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::vector<Subcommand> commands = {
      {"gen-corpus", "generate a synthetic labelled corpus", CmdGenCorpus},
      {"train-pool", "train a pool of k-means codebooks", CmdTrainPool},
      {"anonymize", "quantize a corpus with a pool", CmdAnonymize},
      {"knn-anonymize", "kNN frame replacement from a target speaker", CmdKnnAnonymize},
      {"evaluate", "play the user/attacker game with pools on disk", CmdEvaluate},
      {"attack-sim", "train pools and play the user/attacker game", CmdAttackSim},
  };

  CLI::App app{"Feature-level voice anonymization by k-means codebook pools"};
  app.require_subcommand(1);
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> sets;
  int threads = 0;
  bool dump = false;
  std::map<std::string, std::map<std::string, std::string>> flag_values;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "experiment config JSON");
    sub->add_option("--out", output_dir, "output directory");
    sub->add_option("--set", sets, "override a config field: dotted.path=value");
    sub->add_option("--threads", threads, "worker thread cap (0 = all cores)");
    if (cmd.name == "evaluate" || cmd.name == "attack-sim") {
      sub->add_flag("--dump-embeddings", dump, "write per-stage utterance embeddings");
    }
    for (const auto& o : OverridesFor(cmd.name)) {
      sub->add_option(o.flag, flag_values[cmd.name][o.flag], o.help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    ExperimentConfig config;
    if (!config_path.empty()) config = ExperimentConfig::FromFile(config_path);
    for (const auto& o : OverridesFor(name)) {
      if (chosen->count(o.flag) == 0) continue;
      const std::string& text = flag_values[name][o.flag];
      config.Set(o.path, o.as_string ? json(text) : FlagValue(text));
    }
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--set expects dotted.path=value, got '" + s + "'");
      }
      config.Set(s.substr(0, eq), FlagValue(s.substr(eq + 1)));
    }
    if (!output_dir.empty()) config.Set("output_dir", output_dir);
    if (dump) config.Set("dump_embeddings", true);
    SetNumThreads(threads);
    auto it = std::find_if(commands.begin(), commands.end(),
                           [&](const Subcommand& c) { return c.name == name; });
    fs::path result = it->run(config);
    out << result.string() << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace vqanon
