// Copyright 2026 The doadp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Keyed random streams. Every random draw in a simulation comes from a stream
// identified by (seed, agent, iteration, purpose), so results never depend on
// the order in which agents or runs are executed.

#ifndef DOADP_RNG_H_
#define DOADP_RNG_H_

#include <cstdint>
#include <random>

namespace doadp {

enum class StreamPurpose : std::uint64_t {
  kActivation = 1,
  kSample = 2,
  kNoise = 3,
  kDataset = 4,
  kPartition = 5,
  kProblem = 6,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t agent = 0;
  std::uint64_t iteration = 0;
  StreamPurpose purpose = StreamPurpose::kNoise;
};

using Stream = std::mt19937_64;

// Mixes the key through splitmix64 finalizers to seed an independent engine.
Stream make_stream(const StreamKey& key);

}  // namespace doadp

#endif  // DOADP_RNG_H_
