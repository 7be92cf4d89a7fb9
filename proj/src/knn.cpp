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


#include "vqanon/knn.hpp"

namespace vqanon {

TargetBank BuildBank(const Corpus& corpus, const std::string& speaker_id) {
  auto utts = corpus.UtterancesOf(speaker_id);
  if (utts.empty()) throw ValidationError("unknown target speaker: " + speaker_id);
  Index rows = 0;
  for (const auto* u : utts) rows += u->num_frames();
  TargetBank bank;
  bank.speaker_id = speaker_id;
  bank.frames.resize(rows, corpus.dim);
  Index at = 0;
  for (const auto* u : utts) {
    bank.frames.middleRows(at, u->num_frames()) = u->features;
    at += u->num_frames();
  }
  return bank;
}

Corpus KnnAnonymizeCorpus(const Corpus& corpus, const TargetBank& bank, Index k) {
  Corpus out = corpus;
  for (auto& u : out.utterances) u.features = KnnAnonymize(u.features, bank, k);
  return out;
}

}  // namespace vqanon
