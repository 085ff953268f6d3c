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

#ifndef EMBINV_EMBEDDING_TABLE_H_
#define EMBINV_EMBEDDING_TABLE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "embinv/matrix.h"

namespace embinv {

using TokenId = uint32_t;
using TokenSequence = std::vector<TokenId>;

enum class Norm { kL1, kL2 };

// A model's vocabulary-to-vector map: V rows of dimension d, one display
// string per row. Immutable after construction; Create() validates that
// every entry is finite, token strings are distinct and V >= 2.
class EmbeddingTable {
 public:
  static EmbeddingTable Create(Matrix vectors, std::vector<std::string> tokens,
                               std::string table_id = "");

  std::size_t vocab_size() const { return vectors_.rows(); }
  std::size_t dim() const { return vectors_.cols(); }
  const Matrix& vectors() const { return vectors_; }
  std::span<const float> row(TokenId id) const { return vectors_.row(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_[id]; }
  const std::string& table_id() const { return table_id_; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  EmbeddingTable() = default;

  Matrix vectors_;
  std::vector<std::string> tokens_;
  std::string table_id_;
};

// Rows drawn i.i.d. from N(0, I_d), rounded to binary32 and resampled until
// every pairwise l2 distance is at least min_pairwise_gap. Tokens are
// "t0".."t{V-1}". Throws InvalidArgumentError after 10,000 resamples.
EmbeddingTable GenerateSyntheticTable(std::size_t vocab_size, std::size_t dim,
                                      uint64_t seed, double min_pairwise_gap);

// EMBT binary format, see README for the layout.
void SaveTable(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable LoadTable(const std::filesystem::path& path);

// Row t of the result is the table row of w[t].
Matrix EmbedSequence(const EmbeddingTable& table, std::span<const TokenId> w);

double Distance(std::span<const float> a, std::span<const float> b, Norm norm);

// Per-position argmin of the chosen distance over all rows; ties go to the
// smaller id.
TokenSequence NearestNeighborDecode(const EmbeddingTable& table, const Matrix& y,
                                    Norm norm);

// Max over vocabulary pairs of ||x_i - x_j||_p for p in {1, 2}.
double TableSensitivity(const EmbeddingTable& table, Norm norm);

void CheckTokenIds(const EmbeddingTable& table, std::span<const TokenId> w);

}  // namespace embinv

#endif  // EMBINV_EMBEDDING_TABLE_H_
