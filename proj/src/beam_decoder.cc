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

#include "embinv/beam_decoder.h"

#include <algorithm>
#include <chrono>
#include <memory>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace embinv {
namespace {

struct Extension {
  std::size_t parent;
  TokenId token;
  double score;
};

}  // namespace

void DecodeConfig::Validate(std::size_t vocab_size) const {
  if (beam_width < 1) throw InvalidArgumentError("beam width must be >= 1");
  if (candidate_pool > vocab_size) {
    throw InvalidArgumentError("candidate pool larger than the vocabulary");
  }
  if (!(prior_weight >= 0.0) || !std::isfinite(prior_weight)) {
    throw InvalidArgumentError("prior weight must be nonnegative and finite");
  }
}

bool RanksBefore(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.log_score != b.log_score) return a.log_score > b.log_score;
  return std::lexicographical_compare(a.ids.begin(), a.ids.end(), b.ids.begin(),
                                      b.ids.end());
}

std::vector<TokenId> CandidatePool(const SurrogateParams& params, std::span<const float> y,
                                   const EmbeddingTable& table, std::size_t pool_size) {
  const std::size_t vocab = table.vocab_size();
  if (pool_size < 1 || pool_size > vocab) {
    throw InvalidArgumentError("candidate pool size must lie in [1, V]");
  }
  std::vector<double> loglik(vocab);
  for (TokenId id = 0; id < vocab; ++id) loglik[id] = SurrogateLogLik(params, y, table.row(id));
  std::vector<TokenId> ids(vocab);
  for (TokenId id = 0; id < vocab; ++id) ids[id] = id;
  auto better = [&](TokenId a, TokenId b) {
    if (loglik[a] != loglik[b]) return loglik[a] > loglik[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(pool_size),
                    ids.end(), better);
  ids.resize(pool_size);
  return ids;
}

std::vector<BeamHypothesis> ExpandBeam(std::span<const BeamHypothesis> beam,
                                       std::span<const float> y,
                                       const SurrogateParams& params,
                                       std::span<const std::vector<double>> prior_logprobs,
                                       const EmbeddingTable& table,
                                       std::span<const TokenId> candidates,
                                       std::size_t beam_width, double prior_weight) {
  if (beam.empty()) throw InvalidArgumentError("cannot expand an empty beam");
  if (prior_logprobs.size() != beam.size()) {
    throw InvalidArgumentError("one prior vector is needed per hypothesis");
  }
  if (beam_width < 1) throw InvalidArgumentError("beam width must be >= 1");
  std::vector<double> loglik;
  loglik.reserve(candidates.size());
  for (const TokenId c : candidates) loglik.push_back(SurrogateLogLik(params, y, table.row(c)));

  std::vector<Extension> extensions;
  extensions.reserve(beam.size() * candidates.size());
  for (std::size_t h = 0; h < beam.size(); ++h) {
    const auto& prior = prior_logprobs[h];
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      extensions.push_back({h, candidates[j],
                            beam[h].log_score + loglik[j] + prior_weight * prior[candidates[j]]});
    }
  }
  auto better = [&](const Extension& a, const Extension& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.parent != b.parent) {
      const auto& pa = beam[a.parent].ids;
      const auto& pb = beam[b.parent].ids;
      if (pa != pb) {
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
      }
    }
    return a.token < b.token;
  };
  const std::size_t keep = std::min(beam_width, extensions.size());
  std::partial_sort(extensions.begin(), extensions.begin() + static_cast<std::ptrdiff_t>(keep),
                    extensions.end(), better);

  std::vector<BeamHypothesis> next;
  next.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& ext = extensions[i];
    BeamHypothesis hyp;
    hyp.ids.reserve(beam[ext.parent].ids.size() + 1);
    hyp.ids = beam[ext.parent].ids;
    hyp.ids.push_back(ext.token);
    hyp.log_score = ext.score;
    next.push_back(std::move(hyp));
  }
  return next;
}

std::vector<BeamHypothesis> ExpandBeam(std::span<const BeamHypothesis> beam,
                                       std::span<const float> y,
                                       const SurrogateParams& params,
                                       const PriorModel& prior, const EmbeddingTable& table,
                                       std::span<const TokenId> candidates,
                                       const DecodeConfig& config) {
  const auto prior_logprobs = QueryPrior(prior, beam);
  return ExpandBeam(beam, y, params, prior_logprobs, table, candidates, config.beam_width,
                    config.prior_weight);
}

AttackResult Decode(const Matrix& y, const EmbeddingTable& table, const PriorModel& prior,
                    const DecodeConfig& config, const TokenMap* token_map) {
  config.Validate(table.vocab_size());
  if (!y.empty() && y.cols() != table.dim()) {
    throw InvalidArgumentError("observation dimension does not match table");
  }

  // Non-owning view of the caller's prior, optionally behind the token map.
  std::shared_ptr<const PriorModel> effective(&prior, [](const PriorModel*) {});
  if (token_map != nullptr) {
    effective = std::make_shared<MappedPrior>(effective, *token_map);
  }
  if (effective->vocab_size() != table.vocab_size()) {
    throw InvalidArgumentError("prior vocabulary does not match the attacked table");
  }

  AttackResult result;
  if (token_map != nullptr) {
    result.token_map = TokenMapStats{token_map->mapped_count(),
                                     token_map->unmapped_src.size(), 0};
  }
  if (y.rows() == 0) {
    result.final_beam.push_back(BeamHypothesis{});
    return result;
  }

  SurrogateParams theta = config.initial_params
                              ? *config.initial_params
                              : InitParams(config.family, y, table, config.mode);
  theta.Validate(table.dim());
  result.theta_trajectory.push_back(theta);

  const std::size_t pool_size =
      config.candidate_pool == 0 ? table.vocab_size() : config.candidate_pool;
  SurrogateEstimator estimator(config.estimator);
  std::vector<BeamHypothesis> beam{BeamHypothesis{}};

  for (std::size_t t = 0; t < y.rows(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto y_t = y.row(t);
      const auto prior_logprobs = QueryPrior(*effective, beam);
      const auto candidates = CandidatePool(theta, y_t, table, pool_size);
      StepEvidence evidence{beam, prior_logprobs, y_t, candidates, &table,
                            config.prior_weight};
      theta = estimator.Step(theta, evidence);
      beam = ExpandBeam(beam, y_t, theta, prior_logprobs, table, candidates,
                        config.beam_width, config.prior_weight);
    } catch (const Error& e) {
      result.final_beam = beam;
      result.scale_clamped = estimator.scale_clamped();
      throw DecodeError("decoding aborted at step " + std::to_string(t + 1) + ": " +
                            e.what(),
                        std::move(result));
    }
    result.theta_trajectory.push_back(theta);
    result.step_ms.push_back(std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - start)
                                 .count());
  }

  result.final_beam = std::move(beam);
  result.decoded = result.final_beam.front().ids;
  result.scale_clamped = estimator.scale_clamped();
  if (token_map != nullptr) {
    result.token_map->decoded_dropped = TranslateContext(*token_map, result.decoded).dropped;
  }
  return result;
}

nlohmann::json AttackResultToJson(const AttackResult& result, const EmbeddingTable& table) {
  nlohmann::json j;
  j["decoded"] = result.decoded;
  auto& tokens = j["decoded_tokens"] = nlohmann::json::array();
  for (const TokenId id : result.decoded) tokens.push_back(table.token(id));
  auto& beam = j["final_beam"] = nlohmann::json::array();
  for (const auto& hyp : result.final_beam) {
    beam.push_back({{"ids", hyp.ids}, {"log_score", hyp.log_score}});
  }
  auto& trajectory = j["theta_trajectory"] = nlohmann::json::array();
  for (const auto& theta : result.theta_trajectory) trajectory.push_back(ParamsToJson(theta));
  j["step_ms"] = result.step_ms;
  j["scale_clamped"] = result.scale_clamped;
  if (result.token_map) {
    j["token_map"] = {{"mapped", result.token_map->mapped},
                      {"unmapped", result.token_map->unmapped},
                      {"decoded_dropped", result.token_map->decoded_dropped}};
  }
  return j;
}

}  // namespace embinv
