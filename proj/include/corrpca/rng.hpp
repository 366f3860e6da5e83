// Copyright 2026 The corrpca Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reproducible random streams. One 64-bit master seed is mixed with a stream
// label and integer coordinates (trial index, grid coordinate, ...) to seed an
// independent engine per purpose.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace corrpca {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t mix_seed(std::uint64_t master, std::string_view label,
                                        std::initializer_list<std::uint64_t> coords = {}) {
  std::uint64_t h = splitmix64(master ^ splitmix64(fnv1a(label)));
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine make_stream(std::uint64_t master, std::string_view label,
                          std::initializer_list<std::uint64_t> coords = {}) {
  return Engine(mix_seed(master, label, coords));
}

// Boost's ziggurat normal is several times faster than std::normal_distribution
// and has a fixed algorithm across platforms.
using NormalDist = boost::random::normal_distribution<double>;
using UniformDist = boost::random::uniform_real_distribution<double>;

}  // namespace corrpca
