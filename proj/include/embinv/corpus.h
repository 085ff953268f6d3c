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

#ifndef EMBINV_CORPUS_H_
#define EMBINV_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "embinv/embedding_table.h"

namespace embinv {

// Half-open token-index range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

// One JSON Lines row:
//   {"id": str, "tokens": [int], "pii_spans": [[start, end)], "text": str}
// with pii_spans and text optional.
struct CorpusRecord {
  std::string id;
  TokenSequence tokens;
  std::optional<std::vector<Span>> pii_spans;
  std::optional<std::string> text;
};

std::vector<CorpusRecord> LoadCorpus(const std::filesystem::path& path);
void SaveCorpus(const std::vector<CorpusRecord>& corpus,
                const std::filesystem::path& path);

// Parses a single JSONL row; throws DataError on malformed input.
CorpusRecord ParseCorpusLine(const std::string& line);
std::string FormatCorpusLine(const CorpusRecord& record);

// Truncates every sequence to at most max_len tokens, dropping spans that
// fall outside and clipping spans that straddle the cut.
void TruncateCorpus(std::vector<CorpusRecord>& corpus, std::size_t max_len);

}  // namespace embinv

#endif  // EMBINV_CORPUS_H_
