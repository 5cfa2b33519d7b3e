/* Copyright 2026 The PreGIP Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef PREGIP_RNG_HPP_
#define PREGIP_RNG_HPP_

#include <cstdint>
#include <random>

namespace pregip {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed splitting rule used everywhere a child stream is needed:
// child = mix64(mix64(parent) ^ (stream + 1) * golden).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return mix64(mix64(parent) ^ ((stream + 1) * 0x9e3779b97f4a7c15ULL));
}

// Named streams so that independent consumers never share a generator.
enum class Stream : std::uint64_t {
  kInit = 1,
  kBatches = 2,
  kKey = 3,
  kRealSamples = 4,
  kSplit = 5,
  kHead = 6,
  kBenchmark = 7,
  kZooPiracy = 8,
  kZooIndependent = 9,
  kAdversary = 10,
  kProbe = 11,
};

inline std::uint64_t derive_seed(std::uint64_t parent, Stream stream) {
  return derive_seed(parent, static_cast<std::uint64_t>(stream));
}

inline Rng make_rng(std::uint64_t parent, Stream stream) {
  return Rng(derive_seed(parent, stream));
}

}  // namespace pregip

#endif  // PREGIP_RNG_HPP_
