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


#ifndef VQANON_CLI_HPP_
#define VQANON_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "vqanon/corpus.hpp"
#include "vqanon/eval.hpp"
#include "vqanon/json_io.hpp"
#include "vqanon/kmeans.hpp"
#include "vqanon/pool.hpp"

namespace vqanon {

// Resolved experiment configuration: one JSON document (usually from
// --config) with command-line overrides applied. Seeds are never defaulted.
class ExperimentConfig {
 public:
  ExperimentConfig() = default;
  explicit ExperimentConfig(json doc) : doc_(std::move(doc)) {}

  static ExperimentConfig FromFile(const std::filesystem::path& path);

  // Sets a dotted path ("user.kmeans.seed"), creating objects as needed.
  void Set(std::string_view dotted_path, json value);
  bool Has(std::string_view dotted_path) const;
  // Throws ValidationError naming the missing field.
  const json& Require(std::string_view dotted_path) const;

  SyntheticSpec CorpusSpec() const;
  KMeansParams KMeans(std::string_view party) const;
  PartitionStrategy Strategy(std::string_view party) const;
  SelectionPolicy Selection(std::string_view key) const;
  SplitRatios Ratios() const;
  std::filesystem::path OutputDir() const;

  const json& doc() const { return doc_; }

 private:
  json doc_ = json::object();
};

// Each command writes under config "output_dir" and returns the main
// artifact's path.
std::filesystem::path CmdGenCorpus(const ExperimentConfig& config);
std::filesystem::path CmdTrainPool(const ExperimentConfig& config);
std::filesystem::path CmdAnonymize(const ExperimentConfig& config);
std::filesystem::path CmdKnnAnonymize(const ExperimentConfig& config);
// Game with pools loaded from "user.pool" / "attacker.pool".
std::filesystem::path CmdEvaluate(const ExperimentConfig& config);
// End to end: split, train both pools on the attacker-training split, play.
std::filesystem::path CmdAttackSim(const ExperimentConfig& config);

// Writes one SEFM file of utterance embeddings (one row per utterance) plus a
// JSON list of (utt_id, speaker_id, emotion) rows.
void DumpEmbeddings(const Corpus& corpus, const std::filesystem::path& sefm_path);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitInternal = 4;

// Full command-line entry point; args excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vqanon

#endif  // VQANON_CLI_HPP_
