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

#ifndef EMBINV_METRICS_H_
#define EMBINV_METRICS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embinv/corpus.h"
#include "embinv/embedding_table.h"

namespace embinv {

struct PiiAnnotation {
  std::string seq_id;
  std::vector<Span> spans;
};

// Sorts spans and checks 0 <= start < end <= length with no overlap.
void ValidateSpans(std::vector<Span>& spans, std::size_t length);

// 100 * matching positions / T.
double AttackSuccessRate(std::span<const TokenId> decoded, std::span<const TokenId> truth);

// 100 * spans whose every token is decoded correctly / total spans.
// std::nullopt when the annotation has no spans.
std::optional<double> PiiRecovery(std::span<const TokenId> decoded,
                                  std::span<const TokenId> truth,
                                  const PiiAnnotation& annotation);

// Unweighted mean over the values that are present; std::nullopt if none are.
std::optional<double> MeanPresent(std::span<const std::optional<double>> values);

}  // namespace embinv

#endif  // EMBINV_METRICS_H_
