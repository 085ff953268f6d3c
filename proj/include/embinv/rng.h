// Copyright 2026 The embinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMBINV_RNG_H_
#define EMBINV_RNG_H_

#include <cstdint>
#include <string_view>

namespace embinv {

// Counter-based 64-bit stream. Output i (0-based) of a stream keyed by `key`
// is SplitMix64's finalizer applied to key + (i + 1) * 0x9E3779B97F4A7C15.
// This is exactly the sequence produced by the reference SplitMix64
// generator seeded with `key`, so any implementation of SplitMix64
// reproduces every sample bit-for-bit. The algorithm is fixed: changing it
// changes every seeded artifact the toolkit has ever produced.
class CounterRng {
 public:
  explicit CounterRng(uint64_t key) : key_(key) {}

  static uint64_t Mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t At(uint64_t index) const {
    return Mix(key_ + (index + 1) * 0x9E3779B97F4A7C15ULL);
  }

  uint64_t Next() { return At(counter_++); }

  // Uniform on the open interval (0, 1): 53 high bits, offset by half an ulp.
  double NextOpenUnit() {
    return (static_cast<double>(Next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by the Box-Muller transform. Each call consumes two
  // uniforms and yields two normals; the second is buffered.
  double NextStandardNormal();

  // Zero-centered Laplace with unit scale by inverse CDF of one uniform.
  double NextStandardLaplace();

  uint64_t counter() const { return counter_; }
  uint64_t key() const { return key_; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a. Used to derive per-sequence sub-seeds from string ids.
uint64_t Fnv1a64(std::string_view bytes);

// Combines a seed with further integer salts into a well-mixed child seed.
uint64_t DeriveSeed(uint64_t seed, uint64_t salt);

}  // namespace embinv

#endif  // EMBINV_RNG_H_
