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

#include "embinv/corpus.h"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "embinv/error.h"

namespace embinv {

using nlohmann::json;

CorpusRecord ParseCorpusLine(const std::string& line) {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed corpus row: ") + e.what());
  }
  if (!row.is_object() || !row.contains("id") || !row.contains("tokens")) {
    throw DataError("corpus row needs \"id\" and \"tokens\"");
  }
  CorpusRecord record;
  try {
    record.id = row.at("id").get<std::string>();
    for (const auto& tok : row.at("tokens")) {
      const auto id = tok.get<int64_t>();
      if (id < 0 || id > static_cast<int64_t>(UINT32_MAX)) {
        throw DataError("token id out of range in corpus row " + record.id);
      }
      record.tokens.push_back(static_cast<TokenId>(id));
    }
    if (row.contains("pii_spans") && !row["pii_spans"].is_null()) {
      std::vector<Span> spans;
      for (const auto& span : row["pii_spans"]) {
        if (!span.is_array() || span.size() != 2) {
          throw DataError("pii span must be a [start, end) pair");
        }
        spans.push_back({span[0].get<std::size_t>(), span[1].get<std::size_t>()});
      }
      record.pii_spans = std::move(spans);
    }
    if (row.contains("text") && !row["text"].is_null()) {
      record.text = row["text"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed corpus row: ") + e.what());
  }
  return record;
}

std::string FormatCorpusLine(const CorpusRecord& record) {
  json row;
  row["id"] = record.id;
  row["tokens"] = record.tokens;
  if (record.pii_spans) {
    json spans = json::array();
    for (const auto& span : *record.pii_spans) spans.push_back({span.start, span.end});
    row["pii_spans"] = std::move(spans);
  }
  if (record.text) row["text"] = *record.text;
  return row.dump();
}

std::vector<CorpusRecord> LoadCorpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path.string());
  std::vector<CorpusRecord> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(ParseCorpusLine(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void SaveCorpus(const std::vector<CorpusRecord>& corpus,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& record : corpus) out << FormatCorpusLine(record) << '\n';
}

void TruncateCorpus(std::vector<CorpusRecord>& corpus, std::size_t max_len) {
  for (auto& record : corpus) {
    if (record.tokens.size() <= max_len) continue;
    record.tokens.resize(max_len);
    if (!record.pii_spans) continue;
    std::vector<Span> kept;
    for (auto span : *record.pii_spans) {
      if (span.start >= max_len) continue;
      span.end = std::min(span.end, max_len);
      kept.push_back(span);
    }
    record.pii_spans = std::move(kept);
  }
}

}  // namespace embinv
