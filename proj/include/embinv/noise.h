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

#ifndef EMBINV_NOISE_H_
#define EMBINV_NOISE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embinv/embedding_table.h"
#include "embinv/matrix.h"

namespace embinv {

enum class NoiseFamily : uint8_t { kGaussian = 0, kLaplace = 1 };

std::string_view NoiseFamilyName(NoiseFamily family);
NoiseFamily ParseNoiseFamily(std::string_view name);

// Default delta used when a Gaussian epsilon is reported without one.
inline constexpr double kDefaultDelta = 1e-5;

// Defender-side additive mechanism. `scale` is the per-coordinate standard
// deviation for Gaussian noise and the per-coordinate Laplace scale b.
struct NoiseMechanismSpec {
  NoiseFamily family = NoiseFamily::kGaussian;
  double scale = 1.0;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> sensitivity;

  void Validate() const;
};

struct Provenance {
  NoiseMechanismSpec mechanism;
  uint64_t seed = 0;
};

// The leaked T x d matrix. Provenance is defender-side metadata; attack code
// never reads it.
struct ObfuscatedSequence {
  std::string seq_id;
  Matrix values;
  std::optional<Provenance> provenance;

  std::size_t length() const { return values.rows(); }
};

// Laplace: b = sensitivity / epsilon.
// Gaussian: sigma = sqrt(2 ln(1.25 / delta)) * sensitivity / epsilon, valid
// only for 0 < epsilon < 1 and 0 < delta < 1.
double CalibrateScale(NoiseFamily family, double sensitivity, double epsilon,
                      std::optional<double> delta = std::nullopt);

// Inverse of CalibrateScale, report-only: Gaussian epsilon outside (0, 1) is
// returned as-is. Missing delta falls back to kDefaultDelta.
double EpsilonFromScale(NoiseFamily family, double sensitivity, double scale,
                        std::optional<double> delta = std::nullopt);

// T x d i.i.d. zero-centered noise, coordinates drawn row-major from the
// counter stream keyed by `seed`. Independent of any token sequence.
std::vector<double> SampleNoise(const NoiseMechanismSpec& spec, std::size_t rows,
                                std::size_t cols, uint64_t seed);

// y_t = x(w_t) + n_t, rounded to binary32.
ObfuscatedSequence ObfuscateSequence(const EmbeddingTable& table,
                                     std::span<const TokenId> w,
                                     const NoiseMechanismSpec& spec, uint64_t seed,
                                     std::string seq_id = "");

// Sub-seed for a sequence: seed XOR FNV-1a(seq_id).
uint64_t SequenceSeed(uint64_t seed, std::string_view seq_id);

// OBF1 binary container, see README for the layout.
void SaveObfuscated(const std::vector<ObfuscatedSequence>& records,
                    const std::filesystem::path& path);
std::vector<ObfuscatedSequence> LoadObfuscated(const std::filesystem::path& path);

}  // namespace embinv

#endif  // EMBINV_NOISE_H_
