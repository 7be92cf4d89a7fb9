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


#ifndef VQANON_PARALLEL_HPP_
#define VQANON_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace vqanon {

// Caps the number of worker threads used by ParallelFor. 0 restores the
// default (hardware concurrency).
void SetNumThreads(int n);
int NumThreads();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; each
// index is visited exactly once, so callers that write only to slot i get
// results independent of the thread count. Nested calls run inline.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace vqanon

#endif  // VQANON_PARALLEL_HPP_
