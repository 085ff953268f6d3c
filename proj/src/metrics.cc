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

#include "embinv/metrics.h"

#include <algorithm>

#include "embinv/error.h"

namespace embinv {

void ValidateSpans(std::vector<Span>& spans, std::size_t length) {
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start >= spans[i].end || spans[i].end > length) {
      throw InvalidArgumentError("pii span [" + std::to_string(spans[i].start) + ", " +
                                 std::to_string(spans[i].end) + ") is invalid for length " +
                                 std::to_string(length));
    }
    if (i > 0 && spans[i].start < spans[i - 1].end) {
      throw InvalidArgumentError("pii spans overlap");
    }
  }
}

double AttackSuccessRate(std::span<const TokenId> decoded, std::span<const TokenId> truth) {
  if (decoded.size() != truth.size()) {
    throw InvalidArgumentError("decoded and reference lengths differ");
  }
  if (truth.empty()) throw InvalidArgumentError("attack success rate needs T >= 1");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) hits += decoded[t] == truth[t];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::optional<double> PiiRecovery(std::span<const TokenId> decoded,
                                  std::span<const TokenId> truth,
                                  const PiiAnnotation& annotation) {
  if (decoded.size() != truth.size()) {
    throw InvalidArgumentError("decoded and reference lengths differ");
  }
  auto spans = annotation.spans;
  ValidateSpans(spans, truth.size());
  if (spans.empty()) return std::nullopt;
  std::size_t recovered = 0;
  for (const auto& span : spans) {
    recovered += std::equal(decoded.begin() + span.start, decoded.begin() + span.end,
                            truth.begin() + span.start);
  }
  return 100.0 * static_cast<double>(recovered) / static_cast<double>(spans.size());
}

std::optional<double> MeanPresent(std::span<const std::optional<double>> values) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

}  // namespace embinv
