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

// Command-line front end: table/corpus generation, prior training, DP
// calibration, obfuscation, attacks, scoring and sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "embinv/beam_decoder.h"
#include "embinv/corpus.h"
#include "embinv/embedding_table.h"
#include "embinv/error.h"
#include "embinv/external_prior.h"
#include "embinv/harness.h"
#include "embinv/metrics.h"
#include "embinv/noise.h"
#include "embinv/prior.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw embinv::DataError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

embinv::Norm ParseNorm(const std::string& name) {
  if (name == "l1") return embinv::Norm::kL1;
  if (name == "l2") return embinv::Norm::kL2;
  throw embinv::InvalidArgumentError("unknown norm: " + name);
}

std::ostream& OpenOutput(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::trunc);
  if (!file) throw embinv::DataError("cannot open for writing: " + path);
  return file;
}

struct GenTableArgs {
  std::size_t vocab = 1000;
  std::size_t dim = 64;
  uint64_t seed = 0;
  double gap = 0.0;
  std::string out;
};

struct GenCorpusArgs {
  std::size_t vocab = 1000;
  std::size_t count = 100;
  std::size_t length = 32;
  std::size_t branching = 5;
  uint64_t chain_seed = 0;
  uint64_t seed = 1;
  std::size_t pii_span = 0;
  std::string prefix = "s";
  std::string out;
};

struct TrainPriorArgs {
  std::string corpus;
  std::string table;
  std::size_t vocab = 0;
  std::size_t order = 2;
  double alpha = 0.01;
  std::string out;
};

struct CalibrateArgs {
  std::string family = "gaussian";
  std::optional<double> sensitivity;
  std::string table;
  std::optional<double> epsilon;
  std::optional<double> scale;
  std::optional<double> delta;
};

struct ObfuscateArgs {
  std::string table;
  std::string corpus;
  std::string family = "gaussian";
  std::optional<double> scale;
  std::optional<double> epsilon;
  std::optional<double> delta;
  uint64_t seed = 0;
  std::size_t max_length = 32;
  std::string out;
};

struct AttackArgs {
  std::string table;
  std::string obf;
  std::string method = "beamclean";
  std::string prior = "uniform";
  std::size_t beam = 8;
  std::size_t pool = 0;
  double lambda = 1.0;
  std::string family = "gaussian";
  std::string mode = "isotropic";
  std::string estimation = "closed_form";
  bool estimate_mu = false;
  std::string nn_norm = "l2";
  std::string token_map;
  std::string restrict_to;
  uint64_t seed = 0;
  std::string out;
};

struct EvaluateArgs {
  std::string corpus;
  std::string decoded;
  std::size_t max_length = 32;
  std::string out;
};

int RunGenTable(const GenTableArgs& a) {
  const auto table = embinv::GenerateSyntheticTable(a.vocab, a.dim, a.seed, a.gap);
  embinv::SaveTable(table, a.out);
  return kExitOk;
}

int RunGenCorpus(const GenCorpusArgs& a) {
  const embinv::BigramSource source(a.vocab, a.branching, a.chain_seed);
  const auto corpus = source.SampleCorpus(a.count, a.length, a.seed, a.prefix, a.pii_span);
  embinv::SaveCorpus(corpus, a.out);
  return kExitOk;
}

int RunTrainPrior(const TrainPriorArgs& a) {
  std::size_t vocab = a.vocab;
  if (!a.table.empty()) vocab = embinv::LoadTable(a.table).vocab_size();
  if (vocab == 0) throw embinv::InvalidArgumentError("pass --vocab or --table");
  const auto corpus = embinv::LoadCorpus(a.corpus);
  std::vector<embinv::TokenSequence> sequences;
  sequences.reserve(corpus.size());
  for (const auto& record : corpus) sequences.push_back(record.tokens);
  const auto prior = embinv::NgramPrior::Train(sequences, vocab, a.order, a.alpha);
  prior.Save(a.out);
  return kExitOk;
}

int RunCalibrate(const CalibrateArgs& a) {
  const auto family = embinv::ParseNoiseFamily(a.family);
  double sensitivity = 0.0;
  if (a.sensitivity) {
    sensitivity = *a.sensitivity;
  } else if (!a.table.empty()) {
    sensitivity = embinv::TableSensitivity(
        embinv::LoadTable(a.table),
        family == embinv::NoiseFamily::kLaplace ? embinv::Norm::kL1 : embinv::Norm::kL2);
  } else {
    throw embinv::InvalidArgumentError("pass --sensitivity or --table");
  }
  if (a.epsilon.has_value() == a.scale.has_value()) {
    throw embinv::InvalidArgumentError("pass exactly one of --epsilon or --scale");
  }
  std::optional<double> delta = a.delta;
  if (family == embinv::NoiseFamily::kGaussian && !delta) delta = embinv::kDefaultDelta;
  json out{{"family", a.family}, {"sensitivity", sensitivity}};
  if (a.epsilon) {
    out["epsilon"] = *a.epsilon;
    out["scale"] = embinv::CalibrateScale(family, sensitivity, *a.epsilon, delta);
  } else {
    out["scale"] = *a.scale;
    out["epsilon"] = embinv::EpsilonFromScale(family, sensitivity, *a.scale, delta);
  }
  if (delta) out["delta"] = *delta;
  std::cout << out.dump() << '\n';
  return kExitOk;
}

int RunObfuscate(const ObfuscateArgs& a) {
  const auto table = embinv::LoadTable(a.table);
  auto corpus = embinv::LoadCorpus(a.corpus);
  embinv::TruncateCorpus(corpus, a.max_length);
  embinv::NoiseMechanismSpec spec;
  spec.family = embinv::ParseNoiseFamily(a.family);
  if (spec.family == embinv::NoiseFamily::kGaussian) spec.delta = a.delta;
  const auto norm =
      spec.family == embinv::NoiseFamily::kLaplace ? embinv::Norm::kL1 : embinv::Norm::kL2;
  if (a.epsilon.has_value() == a.scale.has_value()) {
    throw embinv::InvalidArgumentError("pass exactly one of --epsilon or --scale");
  }
  const double sensitivity = embinv::TableSensitivity(table, norm);
  spec.sensitivity = sensitivity;
  if (spec.family == embinv::NoiseFamily::kGaussian && !spec.delta) {
    spec.delta = embinv::kDefaultDelta;
  }
  if (a.epsilon) {
    spec.scale = embinv::CalibrateScale(spec.family, sensitivity, *a.epsilon, spec.delta);
    spec.epsilon = *a.epsilon;
  } else {
    spec.scale = *a.scale;
    spec.epsilon = embinv::EpsilonFromScale(spec.family, sensitivity, *a.scale, spec.delta);
  }
  std::vector<embinv::ObfuscatedSequence> records;
  records.reserve(corpus.size());
  for (const auto& record : corpus) {
    records.push_back(embinv::ObfuscateSequence(
        table, record.tokens, spec, embinv::SequenceSeed(a.seed, record.id), record.id));
  }
  embinv::SaveObfuscated(records, a.out);
  return kExitOk;
}

int RunAttack(const AttackArgs& a) {
  const auto table = embinv::LoadTable(a.table);
  const auto records = embinv::LoadObfuscated(a.obf);
  const auto method = embinv::ParseAttackMethod(a.method);

  embinv::DecodeConfig config;
  config.beam_width = a.beam;
  config.candidate_pool = a.pool;
  config.prior_weight = a.lambda;
  config.family = embinv::ParseNoiseFamily(a.family);
  config.mode = embinv::ParseScaleMode(a.mode);
  config.estimator.method = embinv::ParseEstimationMethod(a.estimation);
  config.estimator.estimate_mu = a.estimate_mu;
  config.seed = a.seed;

  std::optional<embinv::TokenMap> token_map;
  std::shared_ptr<const embinv::PriorModel> prior;
  if (method == embinv::AttackMethod::kBeamClean) {
    std::size_t prior_vocab = table.vocab_size();
    if (!a.token_map.empty()) {
      const auto prior_table = embinv::LoadTable(a.token_map);
      std::optional<std::vector<std::string>> allowed;
      if (!a.restrict_to.empty()) allowed = ReadLines(a.restrict_to);
      token_map = embinv::BuildTokenMap(table, prior_table, allowed ? &*allowed : nullptr);
      if (token_map->mapped_count() == 0) {
        std::cerr << "warning: token map is empty; the prior sees no context\n";
      }
      prior_vocab = prior_table.vocab_size();
    }
    prior = embinv::OpenPrior(a.prior, prior_vocab);
  }

  std::ofstream file;
  std::ostream& out = OpenOutput(a.out, file);
  for (const auto& record : records) {
    json row;
    if (method == embinv::AttackMethod::kNearestNeighbor) {
      const auto decoded =
          embinv::NearestNeighborDecode(table, record.values, ParseNorm(a.nn_norm));
      row["decoded"] = decoded;
      auto& tokens = row["decoded_tokens"] = json::array();
      for (const auto id : decoded) tokens.push_back(table.token(id));
    } else {
      row = embinv::AttackResultToJson(
          embinv::Decode(record.values, table, *prior, config,
                         token_map ? &*token_map : nullptr),
          table);
    }
    row["id"] = record.seq_id;
    row["method"] = a.method;
    out << row.dump() << '\n';
  }
  return kExitOk;
}

int RunEvaluate(const EvaluateArgs& a) {
  auto corpus = embinv::LoadCorpus(a.corpus);
  embinv::TruncateCorpus(corpus, a.max_length);
  std::map<std::string, const embinv::CorpusRecord*> by_id;
  for (const auto& record : corpus) by_id[record.id] = &record;

  std::ifstream in(a.decoded);
  if (!in) throw embinv::DataError("cannot open: " + a.decoded);
  std::ofstream file;
  std::ostream& out = OpenOutput(a.out, file);
  std::vector<std::optional<double>> asr;
  std::vector<std::optional<double>> pii;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw embinv::DataError(std::string("malformed result row: ") + e.what());
    }
    const auto id = row.at("id").get<std::string>();
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw embinv::DataError("no reference sequence for id " + id);
    const auto decoded = row.at("decoded").get<embinv::TokenSequence>();
    const auto& truth = it->second->tokens;
    json scored{{"id", id}};
    const double rate = embinv::AttackSuccessRate(decoded, truth);
    scored["asr_percent"] = rate;
    asr.push_back(rate);
    std::optional<double> recovered;
    if (it->second->pii_spans) {
      recovered = embinv::PiiRecovery(decoded, truth, {id, *it->second->pii_spans});
    }
    scored["pii_recovery_percent"] = recovered ? json(*recovered) : json(nullptr);
    pii.push_back(recovered);
    out << scored.dump() << '\n';
  }
  const auto mean_asr = embinv::MeanPresent(asr);
  const auto mean_pii = embinv::MeanPresent(pii);
  json summary{{"id", "__mean__"},
               {"sequences", asr.size()},
               {"asr_percent", mean_asr ? json(*mean_asr) : json(nullptr)},
               {"pii_recovery_percent", mean_pii ? json(*mean_pii) : json(nullptr)}};
  out << summary.dump() << '\n';
  return kExitOk;
}

int RunSweepCommand(const std::string& config_path) {
  const auto config = embinv::LoadSweepConfig(config_path);
  const auto result = embinv::RunSweep(config);
  if (config.output.empty()) embinv::WriteSweepCsv(result, std::cout);
  for (const auto& row : result.cells) {
    if (row.failed) {
      std::cerr << "cell failed: eps=" << row.epsilon << " method="
                << embinv::AttackMethodName(row.method) << " seq=" << row.seq_id << ": "
                << row.error << '\n';
    }
  }
  return result.failed_cells > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding obfuscation and inversion toolkit"};
  app.require_subcommand(1);

  GenTableArgs gen_table;
  auto* cmd = app.add_subcommand("gen-table", "Generate a synthetic embedding table");
  cmd->add_option("--vocab", gen_table.vocab, "Vocabulary size V");
  cmd->add_option("--dim", gen_table.dim, "Embedding dimension d");
  cmd->add_option("--seed", gen_table.seed);
  cmd->add_option("--gap", gen_table.gap, "Minimum pairwise l2 distance");
  cmd->add_option("--out", gen_table.out)->required();

  GenCorpusArgs gen_corpus;
  cmd = app.add_subcommand("gen-corpus", "Sample a corpus from a random bigram source");
  cmd->add_option("--vocab", gen_corpus.vocab);
  cmd->add_option("--count", gen_corpus.count);
  cmd->add_option("--length", gen_corpus.length);
  cmd->add_option("--branching", gen_corpus.branching, "Successors per token");
  cmd->add_option("--chain-seed", gen_corpus.chain_seed, "Seed of the bigram source");
  cmd->add_option("--seed", gen_corpus.seed, "Seed of the sampled sequences");
  cmd->add_option("--pii-span", gen_corpus.pii_span, "Annotate one span of this length");
  cmd->add_option("--prefix", gen_corpus.prefix, "Sequence id prefix");
  cmd->add_option("--out", gen_corpus.out)->required();

  TrainPriorArgs train;
  auto* train_cmd = app.add_subcommand("train-prior", "Train an add-alpha n-gram prior");
  train_cmd->add_option("--corpus", train.corpus)->required();
  train_cmd->add_option("--table", train.table, "Take V from this table");
  train_cmd->add_option("--vocab", train.vocab);
  train_cmd->add_option("--order", train.order);
  train_cmd->add_option("--alpha", train.alpha);
  train_cmd->add_option("--out", train.out)->required();

  CalibrateArgs calibrate;
  auto* cal_cmd = app.add_subcommand("calibrate", "Convert between epsilon and noise scale");
  cal_cmd->add_option("--family", calibrate.family)->check(CLI::IsMember({"gaussian", "laplace"}));
  cal_cmd->add_option("--sensitivity", calibrate.sensitivity);
  cal_cmd->add_option("--table", calibrate.table, "Use the table's max pairwise distance");
  cal_cmd->add_option("--epsilon", calibrate.epsilon);
  cal_cmd->add_option("--scale", calibrate.scale);
  cal_cmd->add_option("--delta", calibrate.delta);

  ObfuscateArgs obfuscate;
  auto* obf_cmd = app.add_subcommand("obfuscate", "Add mechanism noise to a corpus");
  obf_cmd->add_option("--table", obfuscate.table)->required();
  obf_cmd->add_option("--corpus", obfuscate.corpus)->required();
  obf_cmd->add_option("--family", obfuscate.family)->check(CLI::IsMember({"gaussian", "laplace"}));
  obf_cmd->add_option("--scale", obfuscate.scale);
  obf_cmd->add_option("--epsilon", obfuscate.epsilon);
  obf_cmd->add_option("--delta", obfuscate.delta);
  obf_cmd->add_option("--seed", obfuscate.seed);
  obf_cmd->add_option("--max-length", obfuscate.max_length);
  obf_cmd->add_option("--out", obfuscate.out)->required();

  AttackArgs attack;
  auto* atk_cmd = app.add_subcommand("attack", "Invert obfuscated sequences");
  atk_cmd->add_option("--table", attack.table)->required();
  atk_cmd->add_option("--obf", attack.obf)->required();
  atk_cmd->add_option("--method", attack.method)->check(CLI::IsMember({"nn", "beamclean"}));
  atk_cmd->add_option("--prior", attack.prior,
                      "uniform | ngram:<path> | exec:<command> | tcp:<host>:<port>");
  atk_cmd->add_option("--beam", attack.beam, "Beam width");
  atk_cmd->add_option("--pool", attack.pool, "Candidate pool size (0 = V)");
  atk_cmd->add_option("--lambda", attack.lambda, "Prior weight");
  atk_cmd->add_option("--family", attack.family, "Surrogate family")
      ->check(CLI::IsMember({"gaussian", "laplace"}));
  atk_cmd->add_option("--mode", attack.mode)->check(CLI::IsMember({"isotropic", "diagonal"}));
  atk_cmd->add_option("--estimation", attack.estimation)
      ->check(CLI::IsMember({"closed_form", "gradient", "fixed"}));
  atk_cmd->add_flag("--estimate-mu", attack.estimate_mu);
  atk_cmd->add_option("--nn-norm", attack.nn_norm)->check(CLI::IsMember({"l1", "l2"}));
  atk_cmd->add_option("--token-map", attack.token_map,
                      "EMBT table of the prior's vocabulary");
  atk_cmd->add_option("--restrict", attack.restrict_to, "Allowed token strings, one per line");
  atk_cmd->add_option("--seed", attack.seed);
  atk_cmd->add_option("--out", attack.out);

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score attack output against a corpus");
  eval_cmd->add_option("--corpus", evaluate.corpus)->required();
  eval_cmd->add_option("--decoded", evaluate.decoded)->required();
  eval_cmd->add_option("--max-length", evaluate.max_length);
  eval_cmd->add_option("--out", evaluate.out);

  std::string sweep_config;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an obfuscate/attack/evaluate sweep");
  sweep_cmd->add_option("--config", sweep_config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("gen-table")) return RunGenTable(gen_table);
    if (app.got_subcommand("gen-corpus")) return RunGenCorpus(gen_corpus);
    if (train_cmd->parsed()) return RunTrainPrior(train);
    if (cal_cmd->parsed()) return RunCalibrate(calibrate);
    if (obf_cmd->parsed()) return RunObfuscate(obfuscate);
    if (atk_cmd->parsed()) return RunAttack(attack);
    if (eval_cmd->parsed()) return RunEvaluate(evaluate);
    if (sweep_cmd->parsed()) return RunSweepCommand(sweep_config);
  } catch (const embinv::InvalidArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const embinv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
