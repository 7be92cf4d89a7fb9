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


#include "vqanon/binary_io.hpp"
#include "vqanon/json_io.hpp"
#include "vqanon/kmeans.hpp"

namespace vqanon {

namespace {

constexpr std::string_view kModelMagic = "SEFK";
constexpr std::uint32_t kModelFormatVersion = 1;

}  // namespace

void SaveModel(const KMeansModel<float>& model, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.WriteMagic(kModelMagic);
  w.WriteU32(kModelFormatVersion);
  w.WriteU32(static_cast<std::uint32_t>(model.num_clusters()));
  w.WriteU32(static_cast<std::uint32_t>(model.dim()));
  w.WriteU64(model.seed);
  w.WriteF64(model.inertia);
  const float* data = model.centroids.data();
  for (Index i = 0; i < model.centroids.size(); ++i) w.WriteF32(data[i]);
  json trailer;
  trailer["trained_on"] = model.trained_on;
  std::string text = trailer.dump();
  w.WriteU64(text.size());
  w.WriteBytes(text);
  w.Close();
}

KMeansModel<float> LoadModel(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.ExpectMagic(kModelMagic);
  std::uint32_t version = r.ReadU32();
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model file version " + std::to_string(version) + ": " +
                  path.string());
  }
  std::uint32_t k = r.ReadU32();
  std::uint32_t d = r.ReadU32();
  auto bytes = std::filesystem::file_size(path);
  if (k == 0 || d == 0 || static_cast<std::uintmax_t>(k) * d * 4 > bytes) {
    throw IoError("implausible model header (K=" + std::to_string(k) +
                  ", d=" + std::to_string(d) + "): " + path.string());
  }
  KMeansModel<float> model;
  model.seed = r.ReadU64();
  model.inertia = r.ReadF64();
  model.centroids.resize(k, d);
  float* data = model.centroids.data();
  for (Index i = 0; i < model.centroids.size(); ++i) data[i] = r.ReadF32();
  std::uint64_t len = r.ReadU64();
  if (len > bytes) throw IoError("truncated file: " + path.string());
  std::string text = r.ReadBytes(len);
  try {
    model.trained_on = json::parse(text).at("trained_on").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IoError("malformed model trailer in " + path.string() + ": " + e.what());
  }
  if (!r.AtEnd()) throw IoError("trailing bytes after model trailer: " + path.string());
  if (!model.centroids.allFinite()) {
    throw IoError("model file holds non-finite centroids: " + path.string());
  }
  return model;
}

}  // namespace vqanon
