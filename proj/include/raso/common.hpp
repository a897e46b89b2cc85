// raso/common.hpp

// Copyright 2026  RASO Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef RASO_COMMON_HPP_
#define RASO_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace raso {

using real = double;

// All audio in this project is mono PCM at a fixed rate.
constexpr int kSampleRateHz = 16000;
constexpr int kNumMelBands = 80;
constexpr real kFrameHopSeconds = 0.010;
constexpr real kFrameWindowSeconds = 0.025;
constexpr int kHopSamples = 160;
constexpr int kWindowSamples = 400;
constexpr int kFftSize = 512;
constexpr real kMelFloor = 1e-5;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

#define RASO_CHECK(cond, msg)                       \
  do {                                              \
    if (!(cond)) throw ::raso::Error(msg);          \
  } while (0)

inline void LogInfo(const std::string &msg) {
  std::fprintf(stderr, "[raso] %s\n", msg.c_str());
}

// Deterministic RNG used everywhere; never seed from time.
using Rng = std::mt19937_64;

inline real UniformReal(Rng &rng, real lo, real hi) {
  // 53-bit mantissa fill; bit-stable across platforms, unlike
  // std::uniform_real_distribution.
  const uint64_t r = rng() >> 11;
  return lo + (hi - lo) * (static_cast<real>(r) * 0x1.0p-53);
}

inline real GaussianReal(Rng &rng, real mean, real stddev) {
  // Box-Muller on our own uniforms, same rationale as UniformReal.
  real u1 = UniformReal(rng, 0.0, 1.0);
  if (u1 < 1e-300) u1 = 1e-300;
  const real u2 = UniformReal(rng, 0.0, 1.0);
  const real z = std::sqrt(-2.0 * std::log(u1)) *
                 std::cos(2.0 * 3.14159265358979323846 * u2);
  return mean + stddev * z;
}

// Fisher-Yates with our own index draws; std::shuffle's draw sequence is
// implementation-defined, which would break cross-platform reproducibility.
template <class T>
void Shuffle(std::vector<T> &v, Rng &rng) {
  for (size_t i = v.size(); i > 1; i--)
    std::swap(v[i - 1], v[static_cast<size_t>(rng() % i)]);
}

// FNV-1a over raw bytes; used for parameter-isolation checks and config hashes.
inline uint64_t Fnv1a(const void *data, size_t n_bytes, uint64_t h = 1469598103934665603ull) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (size_t i = 0; i < n_bytes; i++) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t HashDoubles(const std::vector<real> &v, uint64_t h = 1469598103934665603ull) {
  return v.empty() ? h : Fnv1a(v.data(), v.size() * sizeof(real), h);
}

}  // namespace raso

#endif  // RASO_COMMON_HPP_
