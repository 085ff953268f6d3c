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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <nlohmann/json.hpp>

#include "embinv/beam_decoder.h"
#include "embinv/embedding_table.h"
#include "embinv/harness.h"
#include "embinv/metrics.h"
#include "embinv/noise.h"
#include "embinv/prior.h"
#include "embinv/rng.h"
#include "embinv/surrogate.h"
#include "test_util.h"

namespace embinv {
namespace {

using BigFloat = boost::multiprecision::cpp_bin_float_50;
using Clock = std::chrono::steady_clock;
using ::embinv::testing::RandomSequence;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void Report(const std::string& name, const std::function<Outcome()>& check) {
  const auto start = Clock::now();
  Outcome outcome;
  try {
    outcome = check();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!outcome.pass) ++failures;
  std::printf("%s %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
              outcome.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

DecodeConfig FixedGreedyish(NoiseFamily family, std::size_t dim, double scale,
                            std::size_t beam_width) {
  DecodeConfig config;
  config.beam_width = beam_width;
  config.family = family;
  config.estimator.method = EstimationMethod::kFixed;
  config.initial_params = SurrogateParams::Isotropic(family, dim, scale);
  return config;
}

Outcome BruteForceMap() {
  constexpr std::size_t kVocab = 20;
  constexpr std::size_t kDim = 8;
  constexpr int kTrials = 50;
  int matches = 0;
  const auto start = Clock::now();
  for (int trial = 0; trial < kTrials; ++trial) {
    const uint64_t seed = 1000 + static_cast<uint64_t>(trial);
    const auto table = GenerateSyntheticTable(kVocab, kDim, seed, 0.0);
    std::vector<TokenSequence> corpus;
    for (uint64_t s = 0; s < 10; ++s) corpus.push_back(RandomSequence(12, kVocab, seed * 31 + s));
    const auto prior = NgramPrior::Train(corpus, kVocab, 3, 0.2);
    const auto truth = RandomSequence(3, kVocab, seed + 7);
    const auto y = ObfuscateSequence(table, truth,
                                     NoiseMechanismSpec{NoiseFamily::kGaussian, 1.2}, seed)
                       .values;
    const auto config = FixedGreedyish(NoiseFamily::kGaussian, kDim, 1.0, 8000);
    const auto& theta = *config.initial_params;

    // Exhaustive argmax of sum_t [log pi(y_t | x_t) + log p(w_t | w_<t)].
    std::vector<std::vector<double>> ll(3, std::vector<double>(kVocab));
    for (std::size_t t = 0; t < 3; ++t) {
      for (TokenId v = 0; v < kVocab; ++v) ll[t][v] = SurrogateLogLik(theta, y.row(t), table.row(v));
    }
    const auto p0 = prior.NextTokenLogProbs(TokenSequence{});
    TokenSequence best;
    double best_score = -INFINITY;
    for (TokenId a = 0; a < kVocab; ++a) {
      const auto p1 = prior.NextTokenLogProbs(TokenSequence{a});
      for (TokenId b = 0; b < kVocab; ++b) {
        const auto p2 = prior.NextTokenLogProbs(TokenSequence{a, b});
        for (TokenId c = 0; c < kVocab; ++c) {
          const double s = ll[0][a] + p0[a] + ll[1][b] + p1[b] + ll[2][c] + p2[c];
          if (s > best_score) {
            best_score = s;
            best = {a, b, c};
          }
        }
      }
    }
    const auto result = Decode(y, table, prior, config);
    matches += result.decoded == best;
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {matches == kTrials && secs < 60.0,
          Fmt("%.0f/%.0f trials equal brute-force argmax, %.2fs (limit 60s)", matches, kTrials,
              secs)};
}

Outcome NearestNeighborReduction() {
  constexpr std::size_t kVocab = 1000;
  constexpr std::size_t kDim = 64;
  constexpr int kInstances = 100;
  std::map<NoiseFamily, int> matches;
  for (int i = 0; i < kInstances; ++i) {
    const uint64_t seed = 5000 + static_cast<uint64_t>(i);
    const auto table = GenerateSyntheticTable(kVocab, kDim, seed, 0.0);
    const UniformPrior prior(kVocab);
    const auto truth = RandomSequence(16, kVocab, seed + 1);
    for (const auto [family, norm] : {std::pair{NoiseFamily::kGaussian, Norm::kL2},
                                      std::pair{NoiseFamily::kLaplace, Norm::kL1}}) {
      // Heavy noise so nearest-neighbor decoding makes many mistakes.
      const auto y =
          ObfuscateSequence(table, truth, NoiseMechanismSpec{family, 2.0}, seed + 2).values;
      const auto result = Decode(y, table, prior, FixedGreedyish(family, kDim, 1.0, 1));
      matches[family] += result.decoded == NearestNeighborDecode(table, y, norm);
    }
  }
  const int g = matches[NoiseFamily::kGaussian];
  const int l = matches[NoiseFamily::kLaplace];
  return {g == kInstances && l == kInstances,
          Fmt("gaussian/l2 %.0f/100, laplace/l1 %.0f/100 instances token-identical", g, l)};
}

Outcome ParameterRecovery() {
  constexpr std::size_t kVocab = 100;
  constexpr std::size_t kDim = 64;
  constexpr std::size_t kLength = 128;
  constexpr int kRuns = 40;
  std::vector<TokenId> all(kVocab);
  std::iota(all.begin(), all.end(), 0);
  const std::vector<std::vector<double>> prior{UniformLogProbs(kVocab)};
  bool pass = true;
  std::string detail;
  for (const auto family : {NoiseFamily::kGaussian, NoiseFamily::kLaplace}) {
    for (const double scale : {0.1, 0.5, 1.0}) {
      int within = 0;
      double worst = 0.0;
      for (int run = 0; run < kRuns; ++run) {
        const uint64_t seed = DeriveSeed(77, static_cast<uint64_t>(run));
        const auto table = GenerateSyntheticTable(kVocab, kDim, seed, 0.0);
        const auto truth = RandomSequence(kLength, kVocab, seed + 1);
        const auto y =
            ObfuscateSequence(table, truth, NoiseMechanismSpec{family, scale}, seed + 2).values;
        SurrogateEstimator estimator;
        auto theta = InitParams(family, y, table, ScaleMode::kIsotropic);
        // Beam holds the true prefix; candidates span the vocabulary.
        std::vector<BeamHypothesis> beam{{{}, 0.0}};
        for (std::size_t t = 0; t < kLength; ++t) {
          theta = estimator.Step(theta, {beam, prior, y.row(t), all, &table, 1.0});
          beam[0].ids.push_back(truth[t]);
        }
        const double rel = std::abs(theta.scale[0] - scale) / scale;
        worst = std::max(worst, rel);
        within += rel <= 0.10;
      }
      const bool ok = within >= 38;  // 95% of 40
      pass = pass && ok;
      detail += std::string(NoiseFamilyName(family)) +
                Fmt(" %.1f: %.0f/40 within 10%% (worst %.3f); ", scale, within, worst);
    }
  }
  return {pass, detail};
}

Outcome DpCalibration() {
  double worst_gauss = 0.0;
  double worst_inverse = 0.0;
  double worst_laplace = 0.0;
  int points = 0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double eps = 0.01 + 0.098 * i;         // (0, 1)
      const double delta = std::pow(10.0, -2.0 - 0.8 * j);  // 1e-2 .. ~1e-9
      const double sens = 0.1 + 3.7 * j + 0.3 * i;
      ++points;
      const BigFloat sigma_hp = boost::multiprecision::sqrt(
                                    2 * boost::multiprecision::log(BigFloat("1.25") / BigFloat(delta))) *
                                BigFloat(sens) / BigFloat(eps);
      const double sigma = CalibrateScale(NoiseFamily::kGaussian, sens, eps, delta);
      worst_gauss = std::max(worst_gauss, std::abs(sigma / sigma_hp.convert_to<double>() - 1.0));
      const BigFloat eps_hp =
          boost::multiprecision::sqrt(2 * boost::multiprecision::log(BigFloat("1.25") / BigFloat(delta))) *
          BigFloat(sens) / BigFloat(sigma);
      const double back = EpsilonFromScale(NoiseFamily::kGaussian, sens, sigma, delta);
      worst_inverse = std::max(worst_inverse, std::abs(back / eps_hp.convert_to<double>() - 1.0));

      const double leps = 0.05 + 1.5 * i + 0.7 * j;
      const BigFloat b_hp = BigFloat(sens) / BigFloat(leps);
      const double b = CalibrateScale(NoiseFamily::kLaplace, sens, leps);
      worst_laplace = std::max(worst_laplace, std::abs(b / b_hp.convert_to<double>() - 1.0));
      const double leps_back = EpsilonFromScale(NoiseFamily::kLaplace, sens, b);
      worst_laplace = std::max(worst_laplace, std::abs(leps_back / leps - 1.0));
    }
  }
  return {worst_gauss <= 1e-9 && worst_inverse <= 1e-9 && worst_laplace <= 1e-12,
          Fmt("%.0f points; gaussian max rel err %.2e, inverse %.2e, laplace %.2e",
              points, worst_gauss, worst_inverse, worst_laplace)};
}

struct PairedAsr {
  double nn;
  double beam;
};

PairedAsr MeanAsr(const SweepResult& result, double scale) {
  PairedAsr out{NAN, NAN};
  for (const auto& agg : result.aggregates) {
    if (agg.scale != scale) continue;
    const double v = agg.asr_percent.value_or(NAN);
    (agg.method == AttackMethod::kNearestNeighbor ? out.nn : out.beam) = v;
  }
  return out;
}

Outcome DirectionalTrend() {
  constexpr std::size_t kVocab = 500;
  const auto table = GenerateSyntheticTable(kVocab, 64, 2024, 0.0);
  const BigramSource source(kVocab, 5, 2025);
  std::vector<TokenSequence> training;
  for (const auto& r : source.SampleCorpus(2000, 32, 2026, "train")) training.push_back(r.tokens);
  auto prior = std::make_shared<NgramPrior>(NgramPrior::Train(training, kVocab, 2, 0.01));
  const auto corpus = source.SampleCorpus(20, 32, 2027, "s", 4);

  SweepConfig config;
  config.scales = {1.0, 2.0, 3.0};
  config.master_seed = 2028;
  config.decode.beam_width = 8;
  config.decode.candidate_pool = 50;
  config.workers = 4;
  const auto result = RunSweep(SweepInputs{&table, &corpus, prior, std::nullopt}, config);
  if (result.failed_cells > 0) return {false, "sweep had failed cells"};

  bool pass = true;
  std::string detail;
  for (const double scale : config.scales) {
    const auto asr = MeanAsr(result, scale);
    pass = pass && asr.beam >= asr.nn;
    detail += Fmt("sigma %.1f (eps %.3g): beam %.1f%% vs nn %.1f%%; ", scale,
                  EpsilonFromScale(NoiseFamily::kGaussian, result.sensitivity, scale), asr.beam,
                  asr.nn);
  }
  const auto high = MeanAsr(result, config.scales.back());
  pass = pass && high.beam - high.nn >= 10.0;
  detail += Fmt("gap at highest noise %.1f points (need >= 10)", high.beam - high.nn);
  return {pass, detail};
}

Outcome CrossVocabulary() {
  constexpr std::size_t kVocab = 500;
  constexpr std::size_t kShared = 400;
  const auto target = GenerateSyntheticTable(kVocab, 64, 3030, 0.0);
  // The prior's vocabulary keeps 80% of the strings, reordered, plus its own.
  std::vector<std::string> prior_tokens;
  for (std::size_t i = 0; i < kShared; ++i) prior_tokens.push_back(target.token((i * 7) % kShared));
  for (std::size_t i = 0; i < kVocab - kShared; ++i) prior_tokens.push_back("u" + std::to_string(i));
  const auto prior_base = GenerateSyntheticTable(kVocab, 64, 3031, 0.0);
  const auto prior_table = EmbeddingTable::Create(prior_base.vectors(), prior_tokens, "prior");
  const auto map = BuildTokenMap(target, prior_table);
  if (map.mapped_count() != kShared) return {false, "token map did not cover the shared set"};

  // Corpus generator over the shared subset (target ids < 400).
  const BigramSource source(kShared, 5, 3032);
  std::vector<TokenSequence> training;
  for (const auto& r : source.SampleCorpus(2000, 32, 3033, "train")) {
    const auto translated = TranslateContext(map, r.tokens);
    if (translated.dropped != 0) return {false, "shared-subset corpus lost tokens"};
    training.push_back(translated.ids);
  }
  auto prior = std::make_shared<NgramPrior>(NgramPrior::Train(training, kVocab, 2, 0.01));
  const auto corpus = source.SampleCorpus(20, 32, 3034, "s");

  SweepConfig config;
  config.scales = {2.0};
  config.master_seed = 3035;
  config.decode.beam_width = 8;
  config.decode.candidate_pool = 50;
  config.workers = 4;
  const auto result = RunSweep(SweepInputs{&target, &corpus, prior, map}, config);
  if (result.failed_cells > 0) return {false, "sweep had failed cells"};
  const auto asr = MeanAsr(result, 2.0);
  return {asr.beam >= asr.nn,
          Fmt("mapped %.0f/%.0f tokens; beam %.1f%% vs nn %.1f%%", map.mapped_count(), kVocab,
              asr.beam, asr.nn)};
}

Outcome NumericalSuites() {
  std::string detail;
  // Gradient against central differences.
  double worst_grad = 0.0;
  for (const auto family : {NoiseFamily::kGaussian, NoiseFamily::kLaplace}) {
    for (const auto mode : {ScaleMode::kIsotropic, ScaleMode::kDiagonal}) {
      for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto table = GenerateSyntheticTable(15, 4, seed, 0.0);
        std::vector<TokenSequence> corpus{RandomSequence(50, 15, seed)};
        const auto prior = NgramPrior::Train(corpus, 15, 2, 0.5);
        const std::vector<BeamHypothesis> beam{{{1}, -0.5}, {{4}, -1.5}};
        const auto prior_lp = QueryPrior(prior, beam);
        const auto y = ObfuscateSequence(table, TokenSequence{3},
                                         NoiseMechanismSpec{family, 0.7}, seed)
                           .values;
        std::vector<TokenId> candidates(15);
        std::iota(candidates.begin(), candidates.end(), 0);
        const StepEvidence ev{beam, prior_lp, y.row(0), candidates, &table, 1.0};
        CounterRng rng(seed);
        SurrogateParams p;
        p.family = family;
        p.mode = mode;
        for (int i = 0; i < 4; ++i) p.mu.push_back(0.1 * rng.NextStandardNormal());
        for (std::size_t i = 0; i < (mode == ScaleMode::kIsotropic ? 1u : 4u); ++i) {
          p.scale.push_back(0.5 + rng.NextOpenUnit());
        }
        const auto grad = StepMarginalGradient(p, ev);
        constexpr double kH = 1e-5;
        auto fd = [&](auto perturb) {
          auto plus = p;
          auto minus = p;
          perturb(plus, kH);
          perturb(minus, -kH);
          return (StepMarginalLogLik(plus, ev) - StepMarginalLogLik(minus, ev)) / (2 * kH);
        };
        auto record = [&](double analytic, double numeric) {
          worst_grad = std::max(worst_grad,
                                std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
        };
        for (std::size_t i = 0; i < 4; ++i) {
          record(grad.d_mu[i], fd([i](SurrogateParams& q, double h) { q.mu[i] += h; }));
        }
        for (std::size_t i = 0; i < p.scale.size(); ++i) {
          record(grad.d_log_scale[i],
                 fd([i](SurrogateParams& q, double h) { q.scale[i] *= std::exp(h); }));
        }
      }
    }
  }
  detail += Fmt("gradient max rel err %.2e; ", worst_grad);

  // Prior normalization.
  double worst_norm = 0.0;
  for (std::size_t order = 1; order <= 4; ++order) {
    std::vector<TokenSequence> corpus;
    for (uint64_t s = 0; s < 40; ++s) corpus.push_back(RandomSequence(30, 50, order * 100 + s));
    const auto prior = NgramPrior::Train(corpus, 50, order, 0.01);
    for (uint64_t s = 0; s < 100; ++s) {
      const auto lp = prior.NextTokenLogProbs(RandomSequence(s % 7, 50, s + 9));
      double total = 0.0;
      for (const double v : lp) total += std::exp(v);
      worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    }
  }
  detail += Fmt("normalization max err %.2e; ", worst_norm);

  // EM monotonicity.
  double worst_em = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const auto family = seed % 2 ? NoiseFamily::kLaplace : NoiseFamily::kGaussian;
    const auto table = GenerateSyntheticTable(20, 6, seed, 0.0);
    const UniformPrior prior(20);
    const std::vector<BeamHypothesis> beam{{{0}, -0.2}, {{5}, -1.0}, {{9}, -3.0}};
    const auto prior_lp = QueryPrior(prior, beam);
    const auto y = ObfuscateSequence(table, TokenSequence{static_cast<TokenId>(seed % 20)},
                                     NoiseMechanismSpec{family, 0.9}, seed)
                       .values;
    const auto candidates = CandidatePool(
        SurrogateParams::Isotropic(family, 6, 1.0), y.row(0), table, 10);
    const StepEvidence ev{beam, prior_lp, y.row(0), candidates, &table, 1.0};
    const auto start = SurrogateParams::Isotropic(family, 6, 0.2 + 0.05 * (seed % 30));
    SurrogateEstimator estimator({.method = EstimationMethod::kClosedForm,
                                  .estimate_mu = seed % 3 == 0});
    const auto next = estimator.Step(start, ev);
    worst_em = std::max(worst_em, StepMarginalLogLik(start, ev) - StepMarginalLogLik(next, ev));
  }
  detail += Fmt("EM max decrease %.2e; ", std::max(worst_em, 0.0));

  // Byte-identical sweep reruns through files.
  const auto dir = testing::TempPath("acceptance_sweep");
  std::filesystem::create_directories(dir);
  const auto table = GenerateSyntheticTable(80, 16, 4040, 0.0);
  const BigramSource source(80, 4, 4041);
  SaveTable(table, dir / "table.embt");
  SaveCorpus(source.SampleCorpus(8, 16, 4042, "s", 3), dir / "corpus.jsonl");
  std::vector<TokenSequence> training;
  for (const auto& r : source.SampleCorpus(200, 16, 4043, "t")) training.push_back(r.tokens);
  NgramPrior::Train(training, 80, 2, 0.05).Save(dir / "prior.json");
  std::ofstream(dir / "sweep.json")
      << nlohmann::json{{"table", "table.embt"},      {"corpus", "corpus.jsonl"},
                        {"prior", "ngram:prior.json"}, {"epsilons", {0.9, 0.5}},
                        {"candidate_pool", 20},        {"workers", 3},
                        {"output", "out.csv"}}
             .dump();
  auto slurp = [&] {
    std::ifstream in(dir / "out.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  RunSweep(LoadSweepConfig(dir / "sweep.json"));
  const std::string first = slurp();
  RunSweep(LoadSweepConfig(dir / "sweep.json"));
  const bool identical = !first.empty() && first == slurp();
  detail += identical ? "sweep reruns byte-identical" : "sweep reruns differ";

  return {worst_grad <= 1e-4 && worst_norm <= 1e-6 && worst_em <= 1e-9 && identical, detail};
}

}  // namespace
}  // namespace embinv

int main() {
  using namespace embinv;
  Report("brute-force MAP equivalence", BruteForceMap);
  Report("nearest-neighbor reduction", NearestNeighborReduction);
  Report("parameter recovery", ParameterRecovery);
  Report("DP calibration", DpCalibration);
  Report("directional ASR trend (beam vs nn)", DirectionalTrend);
  Report("cross-vocabulary decoding", CrossVocabulary);
  Report("numerical suites", NumericalSuites);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
