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

#ifndef EMBINV_TESTS_TEST_UTIL_H_
#define EMBINV_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "embinv/embedding_table.h"
#include "embinv/matrix.h"
#include "embinv/rng.h"

namespace embinv::testing {

inline EmbeddingTable TableFromRows(const std::vector<std::vector<float>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    tokens.push_back("t" + std::to_string(i));
  }
  return EmbeddingTable::Create(std::move(m), std::move(tokens), "rows");
}

inline EmbeddingTable TableWithTokens(const std::vector<std::string>& tokens,
                                      std::size_t dim, uint64_t seed) {
  auto base = GenerateSyntheticTable(tokens.size(), dim, seed, 0.0);
  return EmbeddingTable::Create(base.vectors(), tokens, "named");
}

inline TokenSequence RandomSequence(std::size_t length, std::size_t vocab, uint64_t seed) {
  CounterRng rng(seed);
  TokenSequence w(length);
  for (auto& id : w) id = static_cast<TokenId>(rng.Next() % vocab);
  return w;
}

inline std::filesystem::path TempPath(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "embinv_tests";
  std::filesystem::create_directories(dir);
  return dir / (std::to_string(::getpid()) + "_" + name);
}

}  // namespace embinv::testing

#endif  // EMBINV_TESTS_TEST_UTIL_H_
