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

#include "embinv/embedding_table.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>

#include "binary_io.h"
#include "embinv/error.h"
#include "embinv/rng.h"

namespace embinv {
namespace {

constexpr char kTableMagic[5] = "EMBT";
constexpr uint32_t kTableVersion = 1;
constexpr int kResampleBudget = 10000;

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgumentError("matrix data size does not match shape");
  }
}

EmbeddingTable EmbeddingTable::Create(Matrix vectors,
                                      std::vector<std::string> tokens,
                                      std::string table_id) {
  if (vectors.rows() < 2) {
    throw InvalidArgumentError("embedding table needs at least 2 rows");
  }
  if (vectors.cols() < 1) {
    throw InvalidArgumentError("embedding table needs dimension >= 1");
  }
  if (tokens.size() != vectors.rows()) {
    throw InvalidArgumentError("token count does not match row count");
  }
  for (const float v : vectors.data()) {
    if (!std::isfinite(v)) {
      throw DataError("embedding table contains a non-finite entry");
    }
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& token : tokens) {
    if (!seen.insert(token).second) {
      throw DataError("duplicate token string: " + token);
    }
  }
  EmbeddingTable table;
  table.vectors_ = std::move(vectors);
  table.tokens_ = std::move(tokens);
  table.table_id_ = std::move(table_id);
  return table;
}

double Distance(std::span<const float> a, std::span<const float> b, Norm norm) {
  double acc = 0.0;
  if (norm == Norm::kL1) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      acc += std::abs(static_cast<double>(a[i]) - b[i]);
    }
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

EmbeddingTable GenerateSyntheticTable(std::size_t vocab_size, std::size_t dim,
                                      uint64_t seed, double min_pairwise_gap) {
  if (vocab_size < 2 || dim < 1) {
    throw InvalidArgumentError("synthetic table needs V >= 2 and d >= 1");
  }
  if (!(min_pairwise_gap >= 0.0)) {
    throw InvalidArgumentError("min_pairwise_gap must be nonnegative");
  }
  CounterRng rng(seed);
  Matrix vectors(vocab_size, dim);
  int resamples = 0;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    while (true) {
      auto row = vectors.row(i);
      for (auto& v : row) v = static_cast<float>(rng.NextStandardNormal());
      bool separated = true;
      for (std::size_t j = 0; j < i && separated; ++j) {
        const double dist = Distance(row, vectors.row(j), Norm::kL2);
        // Continuous sampling makes exact duplicates a measure-zero event,
        // but binary32 rounding can still collide; gap 0 rejects those.
        separated = min_pairwise_gap > 0.0 ? dist >= min_pairwise_gap : dist > 0.0;
      }
      if (separated) break;
      if (++resamples > kResampleBudget) {
        throw InvalidArgumentError(
            "could not satisfy min_pairwise_gap within the resample budget");
      }
    }
  }
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) tokens.push_back("t" + std::to_string(i));
  return EmbeddingTable::Create(std::move(vectors), std::move(tokens),
                                "synthetic-" + std::to_string(seed));
}

void SaveTable(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kTableMagic, 4);
  internal::WriteLe(out, kTableVersion);
  internal::WriteLe(out, static_cast<uint64_t>(table.vocab_size()));
  internal::WriteLe(out, static_cast<uint64_t>(table.dim()));
  for (const float v : table.vectors().data()) internal::WriteF32(out, v);
  for (const auto& token : table.tokens()) internal::WriteString(out, token);
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingTable LoadTable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  internal::ExpectMagic(in, kTableMagic);
  const uint32_t version = internal::ReadLe<uint32_t>(in, "version");
  if (version != kTableVersion) {
    throw FormatError("unsupported EMBT version " + std::to_string(version));
  }
  const uint64_t vocab = internal::ReadLe<uint64_t>(in, "V");
  const uint64_t dim = internal::ReadLe<uint64_t>(in, "d");
  // Reject headers whose payload cannot fit in the remaining bytes before
  // allocating for them.
  const uint64_t remaining = internal::RemainingBytes(in);
  if (dim != 0 && vocab > remaining / 4 / dim) {
    throw FormatError("truncated payload: header declares more rows than present");
  }
  std::vector<float> data(vocab * dim);
  for (auto& v : data) v = internal::ReadF32(in, "vectors");
  std::vector<std::string> tokens;
  tokens.reserve(vocab);
  for (uint64_t i = 0; i < vocab; ++i) tokens.push_back(internal::ReadString(in, "tokens"));
  return EmbeddingTable::Create(Matrix(vocab, dim, std::move(data)), std::move(tokens),
                                path.stem().string());
}

void CheckTokenIds(const EmbeddingTable& table, std::span<const TokenId> w) {
  for (const TokenId id : w) {
    if (id >= table.vocab_size()) {
      throw DataError("token id " + std::to_string(id) + " out of range for V=" +
                      std::to_string(table.vocab_size()));
    }
  }
}

Matrix EmbedSequence(const EmbeddingTable& table, std::span<const TokenId> w) {
  CheckTokenIds(table, w);
  Matrix out(w.size(), table.dim());
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto src = table.row(w[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

TokenSequence NearestNeighborDecode(const EmbeddingTable& table, const Matrix& y,
                                    Norm norm) {
  if (!y.empty() && y.cols() != table.dim()) {
    throw InvalidArgumentError("observation dimension does not match table");
  }
  TokenSequence decoded(y.rows());
  for (std::size_t t = 0; t < y.rows(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    TokenId best_id = 0;
    for (TokenId id = 0; id < table.vocab_size(); ++id) {
      const double dist = Distance(y.row(t), table.row(id), norm);
      if (dist < best) {
        best = dist;
        best_id = id;
      }
    }
    decoded[t] = best_id;
  }
  return decoded;
}

double TableSensitivity(const EmbeddingTable& table, Norm norm) {
  if (table.vocab_size() < 2) {
    throw InvalidArgumentError("sensitivity needs at least 2 rows");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    for (std::size_t j = i + 1; j < table.vocab_size(); ++j) {
      best = std::max(best, Distance(table.vectors().row(i), table.vectors().row(j), norm));
    }
  }
  return best;
}

}  // namespace embinv
