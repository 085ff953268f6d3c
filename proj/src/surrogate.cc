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

#include "embinv/surrogate.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "embinv/error.h"

namespace embinv {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Per-pair joint scores laid out hypothesis-major, plus each candidate's
// surrogate log-likelihood.
struct PairScores {
  std::vector<double> candidate_loglik;
  std::vector<double> joint;
  double log_normalizer = 0.0;
};

void CheckEvidence(const SurrogateParams& params, const StepEvidence& evidence) {
  if (evidence.table == nullptr) throw InvalidArgumentError("step evidence needs a table");
  if (evidence.beam.empty() || evidence.candidates.empty()) {
    throw InvalidArgumentError("step evidence needs a nonempty beam and candidate set");
  }
  if (evidence.prior_logprobs.size() != evidence.beam.size()) {
    throw InvalidArgumentError("one prior vector is needed per hypothesis");
  }
  if (evidence.y.size() != evidence.table->dim()) {
    throw InvalidArgumentError("observation dimension does not match table");
  }
  params.Validate(evidence.table->dim());
}

PairScores ScorePairs(const SurrogateParams& params, const StepEvidence& evidence) {
  CheckEvidence(params, evidence);
  PairScores scores;
  scores.candidate_loglik.reserve(evidence.candidates.size());
  for (const TokenId c : evidence.candidates) {
    scores.candidate_loglik.push_back(
        SurrogateLogLik(params, evidence.y, evidence.table->row(c)));
  }
  scores.joint.reserve(evidence.beam.size() * evidence.candidates.size());
  for (std::size_t h = 0; h < evidence.beam.size(); ++h) {
    const auto& prior = evidence.prior_logprobs[h];
    for (std::size_t j = 0; j < evidence.candidates.size(); ++j) {
      scores.joint.push_back(evidence.beam[h].log_score + scores.candidate_loglik[j] +
                             evidence.prior_weight * prior[evidence.candidates[j]]);
    }
  }
  scores.log_normalizer = LogSumExp(scores.joint);
  if (!std::isfinite(scores.log_normalizer)) {
    throw NumericalError("step marginal log-likelihood is not finite");
  }
  return scores;
}

// Responsibility of each candidate, summed over hypotheses.
std::vector<double> CandidateResponsibilities(const PairScores& scores,
                                              std::size_t num_candidates) {
  std::vector<double> gamma(num_candidates, 0.0);
  for (std::size_t p = 0; p < scores.joint.size(); ++p) {
    gamma[p % num_candidates] += std::exp(scores.joint[p] - scores.log_normalizer);
  }
  return gamma;
}

}  // namespace

std::string_view ScaleModeName(ScaleMode mode) {
  return mode == ScaleMode::kIsotropic ? "isotropic" : "diagonal";
}

ScaleMode ParseScaleMode(std::string_view name) {
  if (name == "isotropic") return ScaleMode::kIsotropic;
  if (name == "diagonal") return ScaleMode::kDiagonal;
  throw InvalidArgumentError("unknown scale mode: " + std::string(name));
}

std::string_view EstimationMethodName(EstimationMethod method) {
  switch (method) {
    case EstimationMethod::kClosedForm:
      return "closed_form";
    case EstimationMethod::kGradient:
      return "gradient";
    case EstimationMethod::kFixed:
      return "fixed";
  }
  return "unknown";
}

EstimationMethod ParseEstimationMethod(std::string_view name) {
  if (name == "closed_form") return EstimationMethod::kClosedForm;
  if (name == "gradient") return EstimationMethod::kGradient;
  if (name == "fixed") return EstimationMethod::kFixed;
  throw InvalidArgumentError("unknown estimation method: " + std::string(name));
}

SurrogateParams SurrogateParams::Isotropic(NoiseFamily family, std::size_t dim,
                                           double scale) {
  return SurrogateParams{family, ScaleMode::kIsotropic, std::vector<double>(dim, 0.0),
                         {scale}};
}

void SurrogateParams::Validate(std::size_t expected_dim) const {
  if (mu.size() != expected_dim) {
    throw InvalidArgumentError("surrogate mean has wrong dimension");
  }
  const std::size_t want = mode == ScaleMode::kIsotropic ? 1 : expected_dim;
  if (scale.size() != want) {
    throw InvalidArgumentError("surrogate scale has wrong length for its mode");
  }
  for (const double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgumentError("surrogate scales must be positive and finite");
    }
  }
  for (const double m : mu) {
    if (!std::isfinite(m)) throw InvalidArgumentError("surrogate mean must be finite");
  }
}

nlohmann::json ParamsToJson(const SurrogateParams& params) {
  return {{"family", NoiseFamilyName(params.family)},
          {"mode", ScaleModeName(params.mode)},
          {"mu", params.mu},
          {"scale", params.scale}};
}

SurrogateParams ParamsFromJson(const nlohmann::json& j) {
  SurrogateParams params;
  try {
    params.family = ParseNoiseFamily(j.at("family").get<std::string>());
    params.mode = ParseScaleMode(j.at("mode").get<std::string>());
    params.mu = j.at("mu").get<std::vector<double>>();
    params.scale = j.at("scale").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed surrogate snapshot: ") + e.what());
  }
  params.Validate(params.mu.size());
  return params;
}

double SurrogateLogLik(const SurrogateParams& params, std::span<const float> y,
                       std::span<const float> x) {
  if (y.size() != x.size() || params.mu.size() != y.size()) {
    throw InvalidArgumentError("surrogate log-likelihood dimension mismatch");
  }
  double acc = 0.0;
  if (params.family == NoiseFamily::kGaussian) {
    if (params.mode == ScaleMode::kIsotropic) {
      const double sigma = params.scale[0];
      double sq = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = static_cast<double>(y[i]) - x[i] - params.mu[i];
        sq += r * r;
      }
      const double n = static_cast<double>(y.size());
      acc = -n * (kHalfLog2Pi + std::log(sigma)) - sq / (2.0 * sigma * sigma);
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double sigma = params.scale[i];
        const double r = (static_cast<double>(y[i]) - x[i] - params.mu[i]) / sigma;
        acc += -kHalfLog2Pi - std::log(sigma) - 0.5 * r * r;
      }
    }
  } else {
    if (params.mode == ScaleMode::kIsotropic) {
      const double b = params.scale[0];
      double abs_sum = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        abs_sum += std::abs(static_cast<double>(y[i]) - x[i] - params.mu[i]);
      }
      acc = -static_cast<double>(y.size()) * std::log(2.0 * b) - abs_sum / b;
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double b = params.scale[i];
        acc += -std::log(2.0 * b) -
               std::abs(static_cast<double>(y[i]) - x[i] - params.mu[i]) / b;
      }
    }
  }
  if (!std::isfinite(acc)) throw NumericalError("surrogate log-likelihood is not finite");
  return acc;
}

SurrogateParams InitParams(NoiseFamily family, const Matrix& y,
                           const EmbeddingTable& table, ScaleMode mode) {
  if (y.rows() == 0) throw InvalidArgumentError("cannot initialize from an empty sequence");
  if (y.cols() != table.dim()) {
    throw InvalidArgumentError("observation dimension does not match table");
  }
  const std::size_t dim = table.dim();
  const Norm norm = family == NoiseFamily::kGaussian ? Norm::kL2 : Norm::kL1;
  const TokenSequence nearest = NearestNeighborDecode(table, y, norm);
  std::vector<double> per_coord(dim, 0.0);
  for (std::size_t t = 0; t < y.rows(); ++t) {
    const auto x = table.row(nearest[t]);
    for (std::size_t i = 0; i < dim; ++i) {
      const double r = static_cast<double>(y(t, i)) - x[i];
      per_coord[i] += family == NoiseFamily::kGaussian ? r * r : std::abs(r);
    }
  }
  const double rows = static_cast<double>(y.rows());
  auto to_scale = [&](double mean) {
    const double s = family == NoiseFamily::kGaussian ? std::sqrt(mean) : mean;
    return std::max(s, kScaleFloor);
  };
  SurrogateParams params;
  params.family = family;
  params.mode = mode;
  params.mu.assign(dim, 0.0);
  if (mode == ScaleMode::kIsotropic) {
    double total = 0.0;
    for (const double v : per_coord) total += v;
    params.scale = {to_scale(total / (rows * static_cast<double>(dim)))};
  } else {
    for (const double v : per_coord) params.scale.push_back(to_scale(v / rows));
  }
  return params;
}

std::vector<std::vector<double>> QueryPrior(const PriorModel& prior,
                                            std::span<const BeamHypothesis> beam) {
  std::vector<std::vector<double>> out;
  out.reserve(beam.size());
  for (const auto& hyp : beam) out.push_back(prior.NextTokenLogProbs(hyp.ids));
  return out;
}

double StepMarginalLogLik(const SurrogateParams& params, const StepEvidence& evidence) {
  return ScorePairs(params, evidence).log_normalizer;
}

double StepMarginalLogLik(const SurrogateParams& params,
                          std::span<const BeamHypothesis> beam, std::span<const float> y,
                          const PriorModel& prior, const EmbeddingTable& table,
                          std::span<const TokenId> candidates) {
  const auto prior_logprobs = QueryPrior(prior, beam);
  StepEvidence evidence{beam, prior_logprobs, y, candidates, &table, 1.0};
  return StepMarginalLogLik(params, evidence);
}

MarginalGradient StepMarginalGradient(const SurrogateParams& params,
                                      const StepEvidence& evidence) {
  const PairScores scores = ScorePairs(params, evidence);
  const auto gamma = CandidateResponsibilities(scores, evidence.candidates.size());
  const std::size_t dim = params.dim();
  MarginalGradient grad;
  grad.value = scores.log_normalizer;
  grad.d_mu.assign(dim, 0.0);
  grad.d_log_scale.assign(params.scale.size(), 0.0);
  const bool isotropic = params.mode == ScaleMode::kIsotropic;
  for (std::size_t j = 0; j < evidence.candidates.size(); ++j) {
    const double g = gamma[j];
    if (g == 0.0) continue;
    const auto x = evidence.table->row(evidence.candidates[j]);
    for (std::size_t i = 0; i < dim; ++i) {
      const double s = params.ScaleAt(i);
      const double r = static_cast<double>(evidence.y[i]) - x[i] - params.mu[i];
      double d_mu = 0.0;
      double d_log_s = 0.0;
      if (params.family == NoiseFamily::kGaussian) {
        d_mu = r / (s * s);
        d_log_s = -1.0 + r * r / (s * s);
      } else {
        d_mu = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / s;
        d_log_s = -1.0 + std::abs(r) / s;
      }
      grad.d_mu[i] += g * d_mu;
      grad.d_log_scale[isotropic ? 0 : i] += g * d_log_s;
    }
  }
  return grad;
}

void SufficientStats::Sum::Add(double v) {
  const double t = sum + v;
  if (std::abs(sum) >= std::abs(v)) {
    carry += (sum - t) + v;
  } else {
    carry += (v - t) + sum;
  }
  sum = t;
}

SufficientStats::SufficientStats(std::size_t dim) : linear_(dim), second_(dim) {}

void SufficientStats::Add(double gamma, std::span<const float> y,
                          std::span<const float> x, NoiseFamily family) {
  weight_.Add(gamma);
  for (std::size_t i = 0; i < linear_.size(); ++i) {
    const double r = static_cast<double>(y[i]) - x[i];
    linear_[i].Add(gamma * r);
    second_[i].Add(gamma * (family == NoiseFamily::kGaussian ? r * r : std::abs(r)));
  }
}

SurrogateEstimator::SurrogateEstimator(EstimatorOptions options)
    : options_(std::move(options)) {}

double SurrogateEstimator::ClampScale(double scale) {
  if (!(scale >= kScaleFloor) || !std::isfinite(scale)) {
    if (std::isnan(scale)) throw NumericalError("scale estimate is NaN");
    if (!std::isfinite(scale)) throw NumericalError("scale estimate diverged");
    scale_clamped_ = true;
    return kScaleFloor;
  }
  return scale;
}

SurrogateParams SurrogateEstimator::Step(const SurrogateParams& previous,
                                         const StepEvidence& evidence) {
  switch (options_.method) {
    case EstimationMethod::kFixed:
      return previous;
    case EstimationMethod::kClosedForm:
      return ClosedFormStep(previous, evidence);
    case EstimationMethod::kGradient:
      return GradientStep(previous, evidence);
  }
  return previous;
}

SurrogateParams SurrogateEstimator::ClosedFormStep(const SurrogateParams& previous,
                                                   const StepEvidence& evidence) {
  const PairScores scores = ScorePairs(previous, evidence);
  const auto gamma = CandidateResponsibilities(scores, evidence.candidates.size());
  const std::size_t dim = previous.dim();
  if (stats_.dim() != dim) stats_ = SufficientStats(dim);
  for (std::size_t j = 0; j < evidence.candidates.size(); ++j) {
    stats_.Add(gamma[j], evidence.y, evidence.table->row(evidence.candidates[j]),
               previous.family);
  }

  const double weight = stats_.weight();
  const bool gaussian = previous.family == NoiseFamily::kGaussian;
  // Laplace keeps mu pinned at zero in closed form.
  const bool fit_mu = options_.estimate_mu && gaussian;
  SurrogateParams next = previous;
  std::vector<double> per_coord(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double mean = stats_.linear(i) / weight;
    next.mu[i] = fit_mu ? mean : 0.0;
    double moment = stats_.second(i) / weight;
    if (fit_mu) moment = std::max(moment - mean * mean, 0.0);
    per_coord[i] = moment;
  }
  auto to_scale = [gaussian](double moment) {
    return gaussian ? std::sqrt(moment) : moment;
  };
  if (previous.mode == ScaleMode::kIsotropic) {
    double total = 0.0;
    for (const double v : per_coord) total += v;
    next.scale = {ClampScale(to_scale(total / static_cast<double>(dim)))};
  } else {
    for (std::size_t i = 0; i < dim; ++i) next.scale[i] = ClampScale(to_scale(per_coord[i]));
  }
  return next;
}

SurrogateParams SurrogateEstimator::GradientStep(const SurrogateParams& previous,
                                                 const StepEvidence& evidence) {
  const double log_floor = std::log(kScaleFloor);
  SurrogateParams current = previous;
  MarginalGradient grad = StepMarginalGradient(current, evidence);
  double objective = grad.value;
  for (int iter = 0; iter < options_.max_iterations; ++iter) {
    double step = options_.step_size;
    bool accepted = false;
    SurrogateParams candidate;
    double candidate_objective = 0.0;
    for (int halving = 0; halving <= options_.max_halvings; ++halving, step *= 0.5) {
      candidate = current;
      if (options_.estimate_mu) {
        for (std::size_t i = 0; i < candidate.mu.size(); ++i) {
          candidate.mu[i] += step * grad.d_mu[i];
        }
      }
      bool clamped = false;
      bool overflow = false;
      for (std::size_t i = 0; i < candidate.scale.size(); ++i) {
        double log_s = std::log(current.scale[i]) + step * grad.d_log_scale[i];
        if (log_s < log_floor) {
          log_s = log_floor;
          clamped = true;
        }
        candidate.scale[i] = std::max(std::exp(log_s), kScaleFloor);
        overflow = overflow || !std::isfinite(candidate.scale[i]);
      }
      for (const double m : candidate.mu) overflow = overflow || !std::isfinite(m);
      // An overflowing step is treated like a decrease and halved.
      if (overflow) continue;
      candidate_objective = StepMarginalLogLik(candidate, evidence);
      if (!std::isfinite(candidate_objective)) {
        throw NumericalError("gradient step produced a non-finite objective");
      }
      if (candidate_objective >= objective) {
        accepted = true;
        if (clamped) scale_clamped_ = true;
        break;
      }
    }
    if (!accepted) break;
    const double change = std::abs(candidate_objective - objective) /
                          std::max(std::abs(objective), std::numeric_limits<double>::min());
    current = std::move(candidate);
    objective = candidate_objective;
    if (change < options_.relative_tolerance) break;
    grad = StepMarginalGradient(current, evidence);
  }
  return current;
}

}  // namespace embinv
