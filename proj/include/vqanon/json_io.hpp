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


#ifndef VQANON_JSON_IO_HPP_
#define VQANON_JSON_IO_HPP_

#include <filesystem>

#include "json.hpp"

namespace vqanon {

// Insertion-ordered so every emitted document has a stable key order.
using json = nlohmann::ordered_json;

// Pretty-prints with two-space indent and a trailing newline.
void WriteJson(const std::filesystem::path& path, const json& doc);
json ReadJson(const std::filesystem::path& path);
void EnsureDirectory(const std::filesystem::path& dir);

}  // namespace vqanon

#endif  // VQANON_JSON_IO_HPP_
