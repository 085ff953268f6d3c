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

#ifndef EMBINV_SURROGATE_H_
#define EMBINV_SURROGATE_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "embinv/embedding_table.h"
#include "embinv/matrix.h"
#include "embinv/noise.h"
#include "embinv/prior.h"

namespace embinv {

enum class ScaleMode { kIsotropic, kDiagonal };

std::string_view ScaleModeName(ScaleMode mode);
ScaleMode ParseScaleMode(std::string_view name);

// Scales below this are clamped by every update path.
inline constexpr double kScaleFloor = 1e-6;

// The attacker's parametric noise model: y = x + mu + n with n having
// per-coordinate Gaussian std-dev or Laplace scale `scale`. `scale` holds
// one entry in isotropic mode and d entries in diagonal mode.
struct SurrogateParams {
  NoiseFamily family = NoiseFamily::kGaussian;
  ScaleMode mode = ScaleMode::kIsotropic;
  std::vector<double> mu;
  std::vector<double> scale;

  static SurrogateParams Isotropic(NoiseFamily family, std::size_t dim, double scale);

  std::size_t dim() const { return mu.size(); }
  double ScaleAt(std::size_t i) const {
    return mode == ScaleMode::kIsotropic ? scale[0] : scale[i];
  }
  void Validate(std::size_t dim) const;

  friend bool operator==(const SurrogateParams&, const SurrogateParams&) = default;
};

// {"family", "mode", "mu": [d], "scale": [1 or d]}
nlohmann::json ParamsToJson(const SurrogateParams& params);
SurrogateParams ParamsFromJson(const nlohmann::json& j);

// log pi_theta(y | x). Gaussian: log N(y | x + mu, diag(scale^2)).
// Laplace: sum_i -ln(2 b_i) - |y_i - x_i - mu_i| / b_i.
double SurrogateLogLik(const SurrogateParams& params, std::span<const float> y,
                       std::span<const float> x);

// mu = 0; scale from residuals to each position's l2-nearest row (mean
// squared residual for Gaussian variance, mean absolute residual for
// Laplace), pooled or per coordinate, floored at kScaleFloor.
SurrogateParams InitParams(NoiseFamily family, const Matrix& y,
                           const EmbeddingTable& table, ScaleMode mode);

struct BeamHypothesis {
  TokenSequence ids;
  double log_score = 0.0;
  friend bool operator==(const BeamHypothesis&, const BeamHypothesis&) = default;
};

// Everything one time-step contributes to the noise-parameter objective:
// the beam B_{t-1}, the prior's next-token log-probabilities for each
// hypothesis (parallel to `beam`), the observation y_t and the candidate
// extensions. Each (hypothesis, candidate) pair contributes
//   log_score + log pi_theta(y_t | x(candidate)) + prior_weight * prior.
struct StepEvidence {
  std::span<const BeamHypothesis> beam;
  std::span<const std::vector<double>> prior_logprobs;
  std::span<const float> y;
  std::span<const TokenId> candidates;
  const EmbeddingTable* table = nullptr;
  double prior_weight = 1.0;
};

// Prior vectors for each hypothesis, one query per hypothesis.
std::vector<std::vector<double>> QueryPrior(const PriorModel& prior,
                                            std::span<const BeamHypothesis> beam);

// log sum over (hypothesis, candidate) pairs of the pair's joint score.
double StepMarginalLogLik(const SurrogateParams& params, const StepEvidence& evidence);

// Convenience form that queries `prior` for each hypothesis.
double StepMarginalLogLik(const SurrogateParams& params,
                          std::span<const BeamHypothesis> beam, std::span<const float> y,
                          const PriorModel& prior, const EmbeddingTable& table,
                          std::span<const TokenId> candidates);

// Value and gradient of StepMarginalLogLik with respect to mu and to the log
// of each scale entry.
struct MarginalGradient {
  double value = 0.0;
  std::vector<double> d_mu;
  std::vector<double> d_log_scale;
};
MarginalGradient StepMarginalGradient(const SurrogateParams& params,
                                      const StepEvidence& evidence);

enum class EstimationMethod { kClosedForm, kGradient, kFixed };

std::string_view EstimationMethodName(EstimationMethod method);
EstimationMethod ParseEstimationMethod(std::string_view name);

// Responsibility-weighted residual sums accumulated across time-steps.
// `weight` is the total responsibility mass; `linear` holds sum(gamma r)
// and `second` holds sum(gamma r^2) for Gaussian or sum(gamma |r|) for
// Laplace, per coordinate. Summation is compensated.
class SufficientStats {
 public:
  explicit SufficientStats(std::size_t dim = 0);

  void Add(double gamma, std::span<const float> y, std::span<const float> x,
           NoiseFamily family);

  std::size_t dim() const { return linear_.size(); }
  double weight() const { return weight_.value(); }
  double linear(std::size_t i) const { return linear_[i].value(); }
  double second(std::size_t i) const { return second_[i].value(); }

 private:
  // Neumaier compensated accumulator.
  struct Sum {
    double sum = 0.0;
    double carry = 0.0;
    void Add(double v);
    double value() const { return sum + carry; }
  };

  Sum weight_;
  std::vector<Sum> linear_;
  std::vector<Sum> second_;
};

struct EstimatorOptions {
  EstimationMethod method = EstimationMethod::kClosedForm;
  bool estimate_mu = false;
  // Gradient ascent settings.
  double step_size = 0.1;
  int max_iterations = 50;
  double relative_tolerance = 1e-6;
  int max_halvings = 20;
};

// Performs the per-time-step parameter update. Closed form is one EM step:
// responsibilities come from the previous parameters and the M-step uses
// every step seen so far. Gradient runs backtracking ascent on the current
// step's marginal log-likelihood over (mu, log scale), warm-started from the
// previous parameters. Not thread-safe.
class SurrogateEstimator {
 public:
  explicit SurrogateEstimator(EstimatorOptions options = {});

  SurrogateParams Step(const SurrogateParams& previous, const StepEvidence& evidence);

  const SufficientStats& stats() const { return stats_; }
  // True once any update had to clamp a scale at kScaleFloor.
  bool scale_clamped() const { return scale_clamped_; }
  const EstimatorOptions& options() const { return options_; }

 private:
  SurrogateParams ClosedFormStep(const SurrogateParams& previous,
                                 const StepEvidence& evidence);
  SurrogateParams GradientStep(const SurrogateParams& previous,
                               const StepEvidence& evidence);
  double ClampScale(double scale);

  EstimatorOptions options_;
  SufficientStats stats_;
  bool scale_clamped_ = false;
};

}  // namespace embinv

#endif  // EMBINV_SURROGATE_H_
