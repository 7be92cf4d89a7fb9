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

#include <array>
#include <bit>

namespace vqanon {

namespace {

template <typename UInt>
std::array<char, sizeof(UInt)> ToLittleEndian(UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  return bytes;
}

template <typename UInt>
UInt FromLittleEndian(const char* bytes) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    v |= static_cast<UInt>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open for writing: " + path.string());
}

void BinaryWriter::WriteMagic(std::string_view magic) { WriteBytes(magic); }

void BinaryWriter::WriteU32(std::uint32_t v) {
  auto b = ToLittleEndian(v);
  out_.write(b.data(), b.size());
}

void BinaryWriter::WriteU64(std::uint64_t v) {
  auto b = ToLittleEndian(v);
  out_.write(b.data(), b.size());
}

void BinaryWriter::WriteF32(float v) { WriteU32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::WriteF64(double v) { WriteU64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::WriteBytes(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void BinaryWriter::Close() {
  out_.close();
  if (!out_) throw IoError("write failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open for reading: " + path.string());
}

void BinaryReader::ReadRaw(char* dst, std::size_t n) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw IoError("truncated file: " + path_.string());
  }
}

void BinaryReader::ExpectMagic(std::string_view magic) {
  std::string got(magic.size(), '\0');
  ReadRaw(got.data(), got.size());
  if (got != magic) {
    throw IoError("bad magic in " + path_.string() + ": expected " + std::string(magic));
  }
}

std::uint32_t BinaryReader::ReadU32() {
  char b[4];
  ReadRaw(b, 4);
  return FromLittleEndian<std::uint32_t>(b);
}

std::uint64_t BinaryReader::ReadU64() {
  char b[8];
  ReadRaw(b, 8);
  return FromLittleEndian<std::uint64_t>(b);
}

float BinaryReader::ReadF32() { return std::bit_cast<float>(ReadU32()); }

double BinaryReader::ReadF64() { return std::bit_cast<double>(ReadU64()); }

std::string BinaryReader::ReadBytes(std::size_t n) {
  std::string s(n, '\0');
  ReadRaw(s.data(), n);
  return s;
}

bool BinaryReader::AtEnd() { return in_.peek() == std::ifstream::traits_type::eof(); }

void WriteFeatureFile(const std::filesystem::path& path, const FeatureMatrix& features) {
  BinaryWriter w(path);
  w.WriteMagic(kFeatureMagic);
  w.WriteU32(kFeatureFormatVersion);
  w.WriteU64(static_cast<std::uint64_t>(features.rows()));
  w.WriteU32(static_cast<std::uint32_t>(features.cols()));
  const float* data = features.data();
  for (Index i = 0; i < features.size(); ++i) w.WriteF32(data[i]);
  w.Close();
}

FeatureMatrix ReadFeatureFile(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.ExpectMagic(kFeatureMagic);
  std::uint32_t version = r.ReadU32();
  if (version != kFeatureFormatVersion) {
    throw IoError("unsupported feature file version " + std::to_string(version) + ": " +
                  path.string());
  }
  std::uint64_t frames = r.ReadU64();
  std::uint32_t dim = r.ReadU32();
  constexpr std::uintmax_t kHeaderBytes = 20;
  std::uintmax_t payload = std::filesystem::file_size(path) - kHeaderBytes;
  if (dim == 0 || payload / 4 / dim != frames || payload % (4ull * dim) != 0) {
    throw IoError("feature payload size does not match header (T=" + std::to_string(frames) +
                  ", d=" + std::to_string(dim) + "): " + path.string());
  }
  FeatureMatrix m(static_cast<Index>(frames), static_cast<Index>(dim));
  float* data = m.data();
  for (Index i = 0; i < m.size(); ++i) data[i] = r.ReadF32();
  return m;
}

}  // namespace vqanon
