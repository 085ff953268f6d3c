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

#include "embinv/noise.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <utility>

#include "binary_io.h"
#include "embinv/error.h"
#include "embinv/rng.h"

namespace embinv {
namespace {

constexpr char kObfMagic[5] = "OBF1";
constexpr uint32_t kObfVersion = 1;
constexpr uint8_t kUnknownFamily = 0xFF;

double GaussianFactor(double delta) { return std::sqrt(2.0 * std::log(1.25 / delta)); }

void CheckDelta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgumentError("delta must lie in (0, 1)");
  }
}

}  // namespace

std::string_view NoiseFamilyName(NoiseFamily family) {
  return family == NoiseFamily::kGaussian ? "gaussian" : "laplace";
}

NoiseFamily ParseNoiseFamily(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::kGaussian;
  if (name == "laplace") return NoiseFamily::kLaplace;
  throw InvalidArgumentError("unknown noise family: " + std::string(name));
}

void NoiseMechanismSpec::Validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgumentError("noise scale must be positive and finite");
  }
  if (epsilon && !(*epsilon > 0.0)) {
    throw InvalidArgumentError("epsilon must be positive");
  }
  if (family == NoiseFamily::kLaplace && delta) {
    throw InvalidArgumentError("laplace mechanism does not carry delta");
  }
  if (delta) CheckDelta(*delta);
  if (sensitivity && !(*sensitivity >= 0.0)) {
    throw InvalidArgumentError("sensitivity must be nonnegative");
  }
}

double CalibrateScale(NoiseFamily family, double sensitivity, double epsilon,
                      std::optional<double> delta) {
  if (!(sensitivity >= 0.0) || !std::isfinite(sensitivity)) {
    throw InvalidArgumentError("sensitivity must be nonnegative and finite");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgumentError("epsilon must be positive and finite");
  }
  if (family == NoiseFamily::kLaplace) return sensitivity / epsilon;
  if (!delta) {
    throw InvalidArgumentError("gaussian calibration requires delta");
  }
  CheckDelta(*delta);
  if (epsilon >= 1.0) {
    throw InvalidArgumentError(
        "gaussian calibration holds only for 0 < epsilon < 1");
  }
  return GaussianFactor(*delta) * sensitivity / epsilon;
}

double EpsilonFromScale(NoiseFamily family, double sensitivity, double scale,
                        std::optional<double> delta) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgumentError("scale must be positive and finite");
  }
  if (!(sensitivity >= 0.0)) {
    throw InvalidArgumentError("sensitivity must be nonnegative");
  }
  if (family == NoiseFamily::kLaplace) return sensitivity / scale;
  const double d = delta.value_or(kDefaultDelta);
  CheckDelta(d);
  return GaussianFactor(d) * sensitivity / scale;
}

std::vector<double> SampleNoise(const NoiseMechanismSpec& spec, std::size_t rows,
                                std::size_t cols, uint64_t seed) {
  spec.Validate();
  CounterRng rng(seed);
  std::vector<double> noise(rows * cols);
  if (spec.family == NoiseFamily::kGaussian) {
    for (auto& n : noise) n = spec.scale * rng.NextStandardNormal();
  } else {
    for (auto& n : noise) n = spec.scale * rng.NextStandardLaplace();
  }
  return noise;
}

ObfuscatedSequence ObfuscateSequence(const EmbeddingTable& table,
                                     std::span<const TokenId> w,
                                     const NoiseMechanismSpec& spec, uint64_t seed,
                                     std::string seq_id) {
  CheckTokenIds(table, w);
  const std::size_t dim = table.dim();
  const auto noise = SampleNoise(spec, w.size(), dim, seed);
  Matrix values(w.size(), dim);
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto x = table.row(w[t]);
    auto y = values.row(t);
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] = static_cast<float>(static_cast<double>(x[i]) + noise[t * dim + i]);
      if (!std::isfinite(y[i])) {
        throw NumericalError("obfuscated value overflowed binary32");
      }
    }
  }
  return ObfuscatedSequence{std::move(seq_id), std::move(values),
                            Provenance{spec, seed}};
}

uint64_t SequenceSeed(uint64_t seed, std::string_view seq_id) {
  return seed ^ Fnv1a64(seq_id);
}

void SaveObfuscated(const std::vector<ObfuscatedSequence>& records,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  out.write(kObfMagic, 4);
  internal::WriteLe(out, kObfVersion);
  internal::WriteLe(out, static_cast<uint64_t>(records.size()));
  for (const auto& record : records) {
    internal::WriteString(out, record.seq_id);
    internal::WriteLe(out, static_cast<uint32_t>(record.values.rows()));
    internal::WriteLe(out, static_cast<uint32_t>(record.values.cols()));
    for (const float v : record.values.data()) internal::WriteF32(out, v);
    if (record.provenance) {
      const auto& mech = record.provenance->mechanism;
      internal::WriteLe(out, static_cast<uint8_t>(mech.family));
      internal::WriteF64(out, mech.scale);
      internal::WriteF64(out, mech.epsilon.value_or(kNaN));
      internal::WriteF64(out, mech.delta.value_or(kNaN));
      internal::WriteLe(out, record.provenance->seed);
    } else {
      internal::WriteLe(out, kUnknownFamily);
      internal::WriteF64(out, kNaN);
      internal::WriteF64(out, kNaN);
      internal::WriteF64(out, kNaN);
      internal::WriteLe(out, uint64_t{0});
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ObfuscatedSequence> LoadObfuscated(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  internal::ExpectMagic(in, kObfMagic);
  const uint32_t version = internal::ReadLe<uint32_t>(in, "version");
  if (version != kObfVersion) {
    throw FormatError("unsupported OBF1 version " + std::to_string(version));
  }
  const uint64_t count = internal::ReadLe<uint64_t>(in, "record count");
  std::vector<ObfuscatedSequence> records;
  for (uint64_t r = 0; r < count; ++r) {
    ObfuscatedSequence record;
    record.seq_id = internal::ReadString(in, "record id");
    const uint32_t rows = internal::ReadLe<uint32_t>(in, "T");
    const uint32_t cols = internal::ReadLe<uint32_t>(in, "d");
    const uint64_t cells = static_cast<uint64_t>(rows) * cols;
    if (cells > internal::RemainingBytes(in) / 4) {
      throw FormatError("truncated payload: record declares more values than present");
    }
    std::vector<float> data(cells);
    for (auto& v : data) {
      v = internal::ReadF32(in, "values");
      if (!std::isfinite(v)) throw DataError("obfuscated values must be finite");
    }
    record.values = Matrix(rows, cols, std::move(data));
    const uint8_t family = internal::ReadLe<uint8_t>(in, "family");
    const double scale = internal::ReadF64(in, "scale");
    const double epsilon = internal::ReadF64(in, "epsilon");
    const double delta = internal::ReadF64(in, "delta");
    const uint64_t seed = internal::ReadLe<uint64_t>(in, "seed");
    if (family != kUnknownFamily) {
      if (family > 1) throw FormatError("unknown family tag in provenance");
      NoiseMechanismSpec mech;
      mech.family = static_cast<NoiseFamily>(family);
      mech.scale = scale;
      if (!std::isnan(epsilon)) mech.epsilon = epsilon;
      if (!std::isnan(delta)) mech.delta = delta;
      record.provenance = Provenance{mech, seed};
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace embinv
