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

#ifndef EMBINV_BEAM_DECODER_H_
#define EMBINV_BEAM_DECODER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "embinv/embedding_table.h"
#include "embinv/error.h"
#include "embinv/matrix.h"
#include "embinv/prior.h"
#include "embinv/surrogate.h"

namespace embinv {

struct DecodeConfig {
  // Hypotheses kept after each step.
  std::size_t beam_width = 8;
  // Candidate extensions per step, pre-selected by surrogate likelihood.
  // 0 means the whole vocabulary.
  std::size_t candidate_pool = 0;
  // Multiplies the prior log-probability; 1 gives the plain product.
  double prior_weight = 1.0;
  EstimatorOptions estimator;
  NoiseFamily family = NoiseFamily::kGaussian;
  ScaleMode mode = ScaleMode::kIsotropic;
  // Overrides the residual-based initialization when set.
  std::optional<SurrogateParams> initial_params;
  uint64_t seed = 0;

  void Validate(std::size_t vocab_size) const;
};

struct TokenMapStats {
  std::size_t mapped = 0;
  std::size_t unmapped = 0;
  // Positions of the decoded sequence the prior never saw.
  std::size_t decoded_dropped = 0;
};

struct AttackResult {
  TokenSequence decoded;
  // Final beam, best first.
  std::vector<BeamHypothesis> final_beam;
  // theta_0 followed by the estimate used at each step.
  std::vector<SurrogateParams> theta_trajectory;
  std::vector<double> step_ms;
  bool scale_clamped = false;
  std::optional<TokenMapStats> token_map;
};

// Thrown when decoding aborts mid-sequence; carries the trajectory so far.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, AttackResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const AttackResult& partial() const { return partial_; }

 private:
  AttackResult partial_;
};

// Total order used for ranking: higher score first, then lexicographically
// smaller id sequence.
bool RanksBefore(const BeamHypothesis& a, const BeamHypothesis& b);

// The `pool_size` ids with the highest surrogate log-likelihood for y_t,
// best first, ties to the smaller id.
std::vector<TokenId> CandidatePool(const SurrogateParams& params, std::span<const float> y,
                                   const EmbeddingTable& table, std::size_t pool_size);

// Extends every hypothesis by every candidate with
//   log s' = log s + log pi_theta(y_t | x(c)) + prior_weight * log p(c | ctx)
// and keeps the best `beam_width`, sorted by RanksBefore.
std::vector<BeamHypothesis> ExpandBeam(std::span<const BeamHypothesis> beam,
                                       std::span<const float> y,
                                       const SurrogateParams& params,
                                       std::span<const std::vector<double>> prior_logprobs,
                                       const EmbeddingTable& table,
                                       std::span<const TokenId> candidates,
                                       std::size_t beam_width, double prior_weight);

// Convenience form querying `prior` once per hypothesis.
std::vector<BeamHypothesis> ExpandBeam(std::span<const BeamHypothesis> beam,
                                       std::span<const float> y,
                                       const SurrogateParams& params,
                                       const PriorModel& prior, const EmbeddingTable& table,
                                       std::span<const TokenId> candidates,
                                       const DecodeConfig& config);

// Causal beam search with per-step noise re-estimation. At each step t the
// candidate pool is chosen with theta_{t-1}, theta_t is estimated on that
// pool, and the beam is expanded with theta_t. When `token_map` is given,
// `prior` is over the map's destination vocabulary and contexts are
// translated before every query.
AttackResult Decode(const Matrix& y, const EmbeddingTable& table, const PriorModel& prior,
                    const DecodeConfig& config, const TokenMap* token_map = nullptr);

// {"decoded": [int], "decoded_tokens": [str], "final_beam": [{"ids", "log_score"}],
//  "theta_trajectory": [...], "step_ms": [...], "scale_clamped": bool,
//  "token_map": {...}}
nlohmann::json AttackResultToJson(const AttackResult& result, const EmbeddingTable& table);

}  // namespace embinv

#endif  // EMBINV_BEAM_DECODER_H_
