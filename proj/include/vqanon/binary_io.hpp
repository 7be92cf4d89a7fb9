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


#ifndef VQANON_BINARY_IO_HPP_
#define VQANON_BINARY_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "vqanon/common.hpp"

namespace vqanon {

// Little-endian primitive writer over a file. Every failure raises IoError.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void WriteMagic(std::string_view magic);
  void WriteU32(std::uint32_t v);
  void WriteU64(std::uint64_t v);
  void WriteF32(float v);
  void WriteF64(double v);
  void WriteBytes(std::string_view bytes);
  void Close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Little-endian primitive reader. Short reads raise IoError("truncated").
class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  // Throws IoError unless the next bytes equal `magic`.
  void ExpectMagic(std::string_view magic);
  std::uint32_t ReadU32();
  std::uint64_t ReadU64();
  float ReadF32();
  double ReadF64();
  std::string ReadBytes(std::size_t n);
  bool AtEnd();

 private:
  void ReadRaw(char* dst, std::size_t n);

  std::filesystem::path path_;
  std::ifstream in_;
};

inline constexpr std::string_view kFeatureMagic = "SEFM";
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

// Feature file: magic, version u32, T u64, d u32, then T*d float32 row-major.
void WriteFeatureFile(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix ReadFeatureFile(const std::filesystem::path& path);

}  // namespace vqanon

#endif  // VQANON_BINARY_IO_HPP_
