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

#include "embinv/rng.h"

#include <cmath>
#include <numbers>

namespace embinv {

double CounterRng::NextStandardNormal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = NextOpenUnit();
  const double u2 = NextOpenUnit();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double CounterRng::NextStandardLaplace() {
  const double centered = NextOpenUnit() - 0.5;
  // F^{-1}(u) = -sgn(u - 1/2) ln(1 - 2|u - 1/2|).
  const double magnitude = -std::log1p(-2.0 * std::abs(centered));
  return centered < 0 ? -magnitude : magnitude;
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t hash = 0xCBF29CE484222325ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

uint64_t DeriveSeed(uint64_t seed, uint64_t salt) {
  return CounterRng::Mix(seed ^ CounterRng::Mix(salt + 0x9E3779B97F4A7C15ULL));
}

}  // namespace embinv
