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


#include "vqanon/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "vqanon/binary_io.hpp"
#include "vqanon/hash.hpp"
#include "vqanon/json_io.hpp"

namespace vqanon {

namespace fs = std::filesystem;

std::string SpeakerName(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%04d", index);
  return buf;
}

std::vector<std::string> RosterOf(const std::vector<Utterance>& utterances) {
  std::set<std::string> ids;
  for (const auto& u : utterances) ids.insert(u.speaker_id);
  return {ids.begin(), ids.end()};
}

void Corpus::Validate() const {
  if (dim < 1) throw ValidationError("corpus dim must be >= 1");
  if (RosterOf(utterances) != speakers) {
    throw ValidationError("speaker roster does not match the utterances' speaker ids");
  }
  std::set<std::string> seen;
  for (const auto& u : utterances) {
    if (!seen.insert(u.utt_id).second) {
      throw ValidationError("duplicate utt_id: " + u.utt_id);
    }
    if (u.features.rows() < 1) throw ValidationError("utterance has no frames: " + u.utt_id);
    if (u.features.cols() != dim) {
      throw ValidationError("dimension mismatch in utterance " + u.utt_id + ": " +
                            std::to_string(u.features.cols()) + " vs corpus " +
                            std::to_string(dim));
    }
    if (static_cast<Index>(u.content_labels.size()) != u.features.rows()) {
      throw ValidationError("content_labels length differs from frame count in " + u.utt_id);
    }
    if (!u.features.allFinite()) {
      throw ValidationError("non-finite feature value in " + u.utt_id);
    }
  }
}

const Utterance* Corpus::Find(const std::string& utt_id) const {
  for (const auto& u : utterances) {
    if (u.utt_id == utt_id) return &u;
  }
  return nullptr;
}

std::vector<const Utterance*> Corpus::UtterancesOf(const std::string& speaker_id) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.speaker_id == speaker_id) out.push_back(&u);
  }
  return out;
}

Index Corpus::TotalFrames() const {
  Index n = 0;
  for (const auto& u : utterances) n += u.num_frames();
  return n;
}

std::string Corpus::Fingerprint() const {
  std::uint64_t h = Fnv1a64(std::to_string(dim));
  for (const auto& u : utterances) {
    h = Fnv1a64(u.utt_id, h);
    h = Fnv1a64(u.speaker_id, h);
    h = HashCombine(h, static_cast<std::uint64_t>(u.emotion));
    for (int c : u.content_labels) h = HashCombine(h, static_cast<std::uint64_t>(c));
    h = Fnv1a64(std::as_bytes(std::span(u.features.data(), u.features.size())), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void SyntheticSpec::Validate() const {
  auto require = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ValidationError(std::string("invalid synthetic spec field '") + field +
                                   "': " + what);
  };
  require(dim >= 1, "dim", "must be >= 1");
  require(num_phones >= 2, "num_phones", "must be >= 2");
  require(num_speakers >= 2, "num_speakers", "must be >= 2");
  require(num_emotions >= 2, "num_emotions", "must be >= 2");
  require(utts_per_speaker >= 1, "utts_per_speaker", "must be >= 1");
  require(min_frames >= 1, "min_frames", "must be >= 1");
  require(max_frames >= min_frames, "max_frames", "range is empty");
  require(phone_scale >= 0, "phone_scale", "must be non-negative");
  require(speaker_scale >= 0, "speaker_scale", "must be non-negative");
  require(emotion_scale >= 0, "emotion_scale", "must be non-negative");
  require(noise_scale >= 0, "noise_scale", "must be non-negative");
}

namespace {

FeatureMatrix GaussianMatrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(normal(rng));
  return m;
}

}  // namespace

std::pair<Corpus, AnchorSet> GenerateCorpus(const SyntheticSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(spec.seed);

  AnchorSet anchors;
  anchors.phone_anchors = GaussianMatrix(spec.num_phones, spec.dim, rng);
  anchors.speaker_offsets = GaussianMatrix(spec.num_speakers, spec.dim, rng);
  anchors.emotion_offsets = GaussianMatrix(spec.num_emotions, spec.dim, rng);
  anchors.phone_scale = spec.phone_scale;
  anchors.speaker_scale = spec.speaker_scale;
  anchors.emotion_scale = spec.emotion_scale;
  for (int s = 0; s < spec.num_speakers; ++s) anchors.speakers.push_back(SpeakerName(s));

  std::uniform_int_distribution<int> phone_dist(0, spec.num_phones - 1);
  std::uniform_int_distribution<int> emotion_dist(0, spec.num_emotions - 1);
  std::uniform_int_distribution<int> length_dist(spec.min_frames, spec.max_frames);
  std::normal_distribution<double> noise(0.0, 1.0);

  Corpus corpus;
  corpus.dim = spec.dim;
  corpus.speakers = anchors.speakers;
  for (int s = 0; s < spec.num_speakers; ++s) {
    for (int k = 0; k < spec.utts_per_speaker; ++k) {
      Utterance u;
      char id[48];
      std::snprintf(id, sizeof(id), "%s_u%03d", SpeakerName(s).c_str(), k);
      u.utt_id = id;
      u.speaker_id = anchors.speakers[s];
      u.emotion = emotion_dist(rng);
      int frames = length_dist(rng);
      u.content_labels.resize(frames);
      u.features.resize(frames, spec.dim);
      for (int t = 0; t < frames; ++t) {
        int phone = phone_dist(rng);
        u.content_labels[t] = phone;
        for (Index j = 0; j < spec.dim; ++j) {
          double v = spec.phone_scale * anchors.phone_anchors(phone, j) +
                     spec.speaker_scale * anchors.speaker_offsets(s, j) +
                     spec.emotion_scale * anchors.emotion_offsets(u.emotion, j);
          if (spec.noise_scale > 0) v += spec.noise_scale * noise(rng);
          u.features(t, j) = static_cast<float>(v);
        }
      }
      corpus.utterances.push_back(std::move(u));
    }
  }
  return {std::move(corpus), std::move(anchors)};
}

fs::path SaveCorpus(const Corpus& corpus, const fs::path& directory) {
  corpus.Validate();
  EnsureDirectory(directory / "feats");
  json manifest;
  manifest["dim"] = corpus.dim;
  manifest["speakers"] = corpus.speakers;
  json utts = json::array();
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    char name[32];
    std::snprintf(name, sizeof(name), "feats/%06zu.sefm", i);
    WriteFeatureFile(directory / name, u.features);
    json entry;
    entry["utt_id"] = u.utt_id;
    entry["speaker_id"] = u.speaker_id;
    entry["emotion"] = u.emotion;
    entry["content_labels"] = u.content_labels;
    entry["feature_file"] = name;
    utts.push_back(std::move(entry));
  }
  manifest["utterances"] = std::move(utts);
  fs::path path = directory / "manifest.json";
  WriteJson(path, manifest);
  return path;
}

Corpus LoadCorpus(const fs::path& manifest_path) {
  json manifest = ReadJson(manifest_path);
  fs::path base = manifest_path.parent_path();
  Corpus corpus;
  try {
    corpus.dim = manifest.at("dim").get<Index>();
    corpus.speakers = manifest.at("speakers").get<std::vector<std::string>>();
    for (const auto& entry : manifest.at("utterances")) {
      Utterance u;
      u.utt_id = entry.at("utt_id").get<std::string>();
      u.speaker_id = entry.at("speaker_id").get<std::string>();
      u.emotion = entry.at("emotion").get<int>();
      u.content_labels = entry.at("content_labels").get<std::vector<int>>();
      fs::path file = base / entry.at("feature_file").get<std::string>();
      if (!fs::exists(file)) {
        throw IoError("missing feature file for utterance " + u.utt_id + ": " + file.string());
      }
      u.features = ReadFeatureFile(file);
      if (u.features.cols() != corpus.dim) {
        throw IoError("dimension mismatch for utterance " + u.utt_id + ": feature file has d=" +
                      std::to_string(u.features.cols()) + ", manifest has dim=" +
                      std::to_string(corpus.dim));
      }
      corpus.utterances.push_back(std::move(u));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  corpus.Validate();
  return corpus;
}

fs::path SaveAnchors(const AnchorSet& anchors, const fs::path& directory) {
  EnsureDirectory(directory);
  WriteFeatureFile(directory / "anchors_phone.sefm", anchors.phone_anchors);
  WriteFeatureFile(directory / "anchors_speaker.sefm", anchors.speaker_offsets);
  WriteFeatureFile(directory / "anchors_emotion.sefm", anchors.emotion_offsets);
  json index;
  index["dim"] = anchors.dim();
  index["phone_file"] = "anchors_phone.sefm";
  index["speaker_file"] = "anchors_speaker.sefm";
  index["emotion_file"] = "anchors_emotion.sefm";
  index["speakers"] = anchors.speakers;
  index["phone_scale"] = anchors.phone_scale;
  index["speaker_scale"] = anchors.speaker_scale;
  index["emotion_scale"] = anchors.emotion_scale;
  fs::path path = directory / "anchors.json";
  WriteJson(path, index);
  return path;
}

AnchorSet LoadAnchors(const fs::path& index_path) {
  json index = ReadJson(index_path);
  fs::path base = index_path.parent_path();
  AnchorSet a;
  try {
    a.phone_anchors = ReadFeatureFile(base / index.at("phone_file").get<std::string>());
    a.speaker_offsets = ReadFeatureFile(base / index.at("speaker_file").get<std::string>());
    a.emotion_offsets = ReadFeatureFile(base / index.at("emotion_file").get<std::string>());
    a.speakers = index.at("speakers").get<std::vector<std::string>>();
    a.phone_scale = index.at("phone_scale").get<double>();
    a.speaker_scale = index.at("speaker_scale").get<double>();
    a.emotion_scale = index.at("emotion_scale").get<double>();
    Index dim = index.at("dim").get<Index>();
    if (a.phone_anchors.cols() != dim || a.speaker_offsets.cols() != dim ||
        a.emotion_offsets.cols() != dim) {
      throw IoError("dimension mismatch between anchors.json and anchor files");
    }
  } catch (const json::exception& e) {
    throw IoError("malformed anchor index " + index_path.string() + ": " + e.what());
  }
  return a;
}

}  // namespace vqanon
