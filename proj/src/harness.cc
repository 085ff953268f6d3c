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

#include "embinv/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>
#include <tuple>
#include <utility>

#include <nlohmann/json.hpp>

#include "embinv/error.h"
#include "embinv/external_prior.h"
#include "embinv/metrics.h"
#include "embinv/rng.h"

namespace embinv {
namespace {

using nlohmann::json;

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FormatOptional(const std::optional<double>& v) {
  return v ? FormatNumber(*v) : "nan";
}

// RFC 4180 quoting for free-text fields.
std::string CsvField(const std::string& v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string quoted = "\"";
  for (const char c : v) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string_view NormName(Norm norm) { return norm == Norm::kL1 ? "l1" : "l2"; }

Norm ParseNorm(std::string_view name) {
  if (name == "l1") return Norm::kL1;
  if (name == "l2") return Norm::kL2;
  throw InvalidArgumentError("unknown norm: " + std::string(name));
}

std::vector<std::string> ReadLines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

struct GridPoint {
  double epsilon;
  double scale;
};

struct CellJob {
  std::size_t grid_index;
  std::size_t method_index;
  std::size_t record_index;
};

}  // namespace

std::string_view AttackMethodName(AttackMethod method) {
  return method == AttackMethod::kNearestNeighbor ? "nn" : "beamclean";
}

AttackMethod ParseAttackMethod(std::string_view name) {
  if (name == "nn") return AttackMethod::kNearestNeighbor;
  if (name == "beamclean") return AttackMethod::kBeamClean;
  throw InvalidArgumentError("unknown attack method: " + std::string(name));
}

void SweepConfig::Validate() const {
  if (epsilons.empty() == scales.empty()) {
    throw InvalidArgumentError("sweep needs exactly one of an epsilon grid or a scale grid");
  }
  for (const double v : epsilons) {
    if (!(v > 0.0)) throw InvalidArgumentError("epsilon grid values must be positive");
  }
  for (const double v : scales) {
    if (!(v > 0.0)) throw InvalidArgumentError("scale grid values must be positive");
  }
  if (methods.empty()) throw InvalidArgumentError("sweep needs at least one method");
  if (max_length < 1) throw InvalidArgumentError("max_length must be >= 1");
  if (workers < 1) throw InvalidArgumentError("workers must be >= 1");
  if (mechanism == NoiseFamily::kLaplace && delta) {
    throw InvalidArgumentError("laplace sweeps do not take delta");
  }
}

SweepConfig SweepConfigFromJson(const json& j) {
  SweepConfig c;
  try {
    c.table = j.value("table", std::string());
    c.corpus = j.value("corpus", std::string());
    c.mechanism = ParseNoiseFamily(j.value("mechanism", std::string("gaussian")));
    c.epsilons = j.value("epsilons", std::vector<double>{});
    c.scales = j.value("scales", std::vector<double>{});
    if (j.contains("delta") && !j["delta"].is_null()) c.delta = j["delta"].get<double>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(ParseAttackMethod(m.get<std::string>()));
    }
    c.decode.beam_width = j.value("beam_width", c.decode.beam_width);
    c.decode.candidate_pool = j.value("candidate_pool", c.decode.candidate_pool);
    c.decode.prior_weight = j.value("prior_weight", c.decode.prior_weight);
    c.decode.estimator.method =
        ParseEstimationMethod(j.value("estimation", std::string("closed_form")));
    c.decode.estimator.estimate_mu = j.value("estimate_mu", false);
    c.decode.family = ParseNoiseFamily(j.value("surrogate_family", std::string("gaussian")));
    c.decode.mode = ParseScaleMode(j.value("surrogate_mode", std::string("isotropic")));
    c.nn_norm = ParseNorm(j.value("nn_norm", std::string("l2")));
    c.prior = j.value("prior", c.prior);
    if (j.contains("token_map_table") && !j["token_map_table"].is_null()) {
      c.token_map_table = j["token_map_table"].get<std::string>();
    }
    if (j.contains("token_map_restrict") && !j["token_map_restrict"].is_null()) {
      c.token_map_restrict = j["token_map_restrict"].get<std::string>();
    }
    c.output = j.value("output", std::string());
    c.master_seed = j.value("master_seed", uint64_t{0});
    c.max_length = j.value("max_length", c.max_length);
    c.workers = j.value("workers", c.workers);
    c.record_runtime = j.value("record_runtime", false);
  } catch (const json::exception& e) {
    throw InvalidArgumentError(std::string("malformed sweep config: ") + e.what());
  }
  c.Validate();
  return c;
}

json SweepConfigToJson(const SweepConfig& c) {
  json j;
  j["table"] = c.table;
  j["corpus"] = c.corpus;
  j["mechanism"] = NoiseFamilyName(c.mechanism);
  if (!c.epsilons.empty()) j["epsilons"] = c.epsilons;
  if (!c.scales.empty()) j["scales"] = c.scales;
  if (c.delta) j["delta"] = *c.delta;
  auto& methods = j["methods"] = json::array();
  for (const auto m : c.methods) methods.push_back(AttackMethodName(m));
  j["beam_width"] = c.decode.beam_width;
  j["candidate_pool"] = c.decode.candidate_pool;
  j["prior_weight"] = c.decode.prior_weight;
  j["estimation"] = EstimationMethodName(c.decode.estimator.method);
  j["estimate_mu"] = c.decode.estimator.estimate_mu;
  j["surrogate_family"] = NoiseFamilyName(c.decode.family);
  j["surrogate_mode"] = ScaleModeName(c.decode.mode);
  j["nn_norm"] = NormName(c.nn_norm);
  j["prior"] = c.prior;
  if (c.token_map_table) j["token_map_table"] = *c.token_map_table;
  if (c.token_map_restrict) j["token_map_restrict"] = *c.token_map_restrict;
  j["output"] = c.output;
  j["master_seed"] = c.master_seed;
  j["max_length"] = c.max_length;
  j["workers"] = c.workers;
  j["record_runtime"] = c.record_runtime;
  return j;
}

SweepConfig LoadSweepConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sweep config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgumentError(std::string("malformed sweep config: ") + e.what());
  }
  // Relative paths resolve against the config file's directory.
  auto config = SweepConfigFromJson(j);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(config.table);
  resolve(config.corpus);
  if (!config.output.empty()) resolve(config.output);
  if (config.prior.starts_with("ngram:")) {
    std::string p = config.prior.substr(6);
    resolve(p);
    config.prior = "ngram:" + p;
  }
  if (config.token_map_table) resolve(*config.token_map_table);
  if (config.token_map_restrict) resolve(*config.token_map_restrict);
  return config;
}

uint64_t CellNoiseSeed(uint64_t master_seed, std::size_t grid_index,
                       const std::string& seq_id) {
  return SequenceSeed(DeriveSeed(master_seed, grid_index), seq_id);
}

SweepResult RunSweep(const SweepInputs& inputs, const SweepConfig& config) {
  config.Validate();
  if (inputs.table == nullptr || inputs.corpus == nullptr) {
    throw InvalidArgumentError("sweep inputs need a table and a corpus");
  }
  const auto& table = *inputs.table;
  const bool needs_prior = std::find(config.methods.begin(), config.methods.end(),
                                     AttackMethod::kBeamClean) != config.methods.end();
  if (needs_prior && inputs.prior == nullptr) {
    throw InvalidArgumentError("beamclean sweeps need a prior");
  }

  std::vector<CorpusRecord> corpus = *inputs.corpus;
  TruncateCorpus(corpus, config.max_length);

  SweepResult result;
  const Norm sensitivity_norm =
      config.mechanism == NoiseFamily::kLaplace ? Norm::kL1 : Norm::kL2;
  result.sensitivity = TableSensitivity(table, sensitivity_norm);
  std::optional<double> delta = config.delta;
  if (config.mechanism == NoiseFamily::kGaussian && !delta) delta = kDefaultDelta;

  std::vector<GridPoint> grid;
  if (!config.epsilons.empty()) {
    for (const double eps : config.epsilons) {
      const double scale = CalibrateScale(config.mechanism, result.sensitivity, eps, delta);
      grid.push_back({EpsilonFromScale(config.mechanism, result.sensitivity, scale, delta),
                      scale});
    }
  } else {
    for (const double scale : config.scales) {
      grid.push_back({EpsilonFromScale(config.mechanism, result.sensitivity, scale, delta),
                      scale});
    }
  }

  std::vector<CellJob> jobs;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      for (std::size_t r = 0; r < corpus.size(); ++r) jobs.push_back({g, m, r});
    }
  }
  std::vector<SweepRow> rows(jobs.size());

  auto run_cell = [&](const CellJob& job) {
    const auto& record = corpus[job.record_index];
    const AttackMethod method = config.methods[job.method_index];
    SweepRow& row = rows[&job - jobs.data()];
    row.mechanism = config.mechanism;
    row.epsilon = grid[job.grid_index].epsilon;
    row.scale = grid[job.grid_index].scale;
    row.delta = delta;
    row.method = method;
    row.seq_id = record.id;
    const auto start = std::chrono::steady_clock::now();
    try {
      NoiseMechanismSpec spec;
      spec.family = config.mechanism;
      spec.scale = row.scale;
      spec.epsilon = row.epsilon;
      spec.delta = delta;
      spec.sensitivity = result.sensitivity;
      const uint64_t noise_seed =
          CellNoiseSeed(config.master_seed, job.grid_index, record.id);
      const auto obfuscated =
          ObfuscateSequence(table, record.tokens, spec, noise_seed, record.id);
      TokenSequence decoded;
      if (method == AttackMethod::kNearestNeighbor) {
        decoded = NearestNeighborDecode(table, obfuscated.values, config.nn_norm);
      } else {
        DecodeConfig decode = config.decode;
        decode.seed = DeriveSeed(noise_seed, Fnv1a64(AttackMethodName(method)));
        const auto attack =
            Decode(obfuscated.values, table, *inputs.prior, decode,
                   inputs.token_map ? &*inputs.token_map : nullptr);
        decoded = attack.decoded;
      }
      row.asr_percent = AttackSuccessRate(decoded, record.tokens);
      if (record.pii_spans) {
        row.pii_recovery_percent =
            PiiRecovery(decoded, record.tokens, PiiAnnotation{record.id, *record.pii_spans});
      }
    } catch (const std::exception& e) {
      row.failed = 1;
      row.asr_percent.reset();
      row.pii_recovery_percent.reset();
      row.error = e.what();
    }
    if (config.record_runtime) {
      row.runtime_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) run_cell(jobs[i]);
  };
  const std::size_t thread_count = std::min(config.workers, std::max<std::size_t>(jobs.size(), 1));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
  }

  auto key = [](const SweepRow& r) {
    return std::make_tuple(r.epsilon, AttackMethodName(r.method), r.seq_id);
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const SweepRow& a, const SweepRow& b) { return key(a) < key(b); });

  std::map<std::pair<double, std::string_view>, std::vector<const SweepRow*>> groups;
  for (const auto& row : rows) {
    groups[{row.epsilon, AttackMethodName(row.method)}].push_back(&row);
    result.failed_cells += row.failed;
  }
  for (const auto& [group_key, members] : groups) {
    SweepRow agg = *members.front();
    agg.seq_id = "__mean__";
    agg.failed = 0;
    agg.runtime_ms = 0.0;
    agg.error.clear();
    std::vector<std::optional<double>> asr;
    std::vector<std::optional<double>> pii;
    for (const auto* member : members) {
      asr.push_back(member->asr_percent);
      pii.push_back(member->pii_recovery_percent);
      agg.failed += member->failed;
      agg.runtime_ms += member->runtime_ms;
    }
    agg.asr_percent = MeanPresent(asr);
    agg.pii_recovery_percent = MeanPresent(pii);
    result.aggregates.push_back(std::move(agg));
  }
  result.cells = std::move(rows);
  return result;
}

SweepResult RunSweep(const SweepConfig& config) {
  config.Validate();
  const auto table = LoadTable(config.table);
  const auto corpus = LoadCorpus(config.corpus);
  SweepInputs inputs;
  inputs.table = &table;
  inputs.corpus = &corpus;
  std::optional<EmbeddingTable> prior_table;
  if (config.token_map_table) {
    prior_table = LoadTable(*config.token_map_table);
    std::optional<std::vector<std::string>> allowed;
    if (config.token_map_restrict) allowed = ReadLines(*config.token_map_restrict);
    inputs.token_map = BuildTokenMap(table, *prior_table, allowed ? &*allowed : nullptr);
  }
  const bool needs_prior = std::find(config.methods.begin(), config.methods.end(),
                                     AttackMethod::kBeamClean) != config.methods.end();
  if (needs_prior) {
    const std::size_t prior_vocab =
        prior_table ? prior_table->vocab_size() : table.vocab_size();
    inputs.prior = OpenPrior(config.prior, prior_vocab);
  }
  auto result = RunSweep(inputs, config);
  if (!config.output.empty()) {
    std::ofstream out(config.output, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + config.output);
    WriteSweepCsv(result, out);
  }
  return result;
}

void WriteSweepCsv(const SweepResult& result, std::ostream& out) {
  out << kSweepCsvHeader << '\n';
  auto write = [&](const SweepRow& r) {
    out << NoiseFamilyName(r.mechanism) << ',' << FormatNumber(r.epsilon) << ','
        << FormatNumber(r.scale) << ',' << FormatOptional(r.delta) << ','
        << AttackMethodName(r.method) << ',' << CsvField(r.seq_id) << ','
        << FormatOptional(r.asr_percent) << ',' << FormatOptional(r.pii_recovery_percent)
        << ',' << FormatNumber(r.runtime_ms) << ',' << r.failed << '\n';
  };
  for (const auto& row : result.cells) write(row);
  for (const auto& row : result.aggregates) write(row);
}

BigramSource::BigramSource(std::size_t vocab_size, std::size_t branching, uint64_t seed) {
  if (vocab_size < 2) throw InvalidArgumentError("bigram source needs V >= 2");
  if (branching < 1 || branching > vocab_size) {
    throw InvalidArgumentError("branching must lie in [1, V]");
  }
  CounterRng rng(seed);
  successors_.resize(vocab_size);
  cumulative_.resize(vocab_size);
  for (std::size_t v = 0; v < vocab_size; ++v) {
    // Partial Fisher-Yates draws `branching` distinct successors.
    std::vector<TokenId> pool(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) pool[i] = static_cast<TokenId>(i);
    std::vector<double> weights;
    for (std::size_t k = 0; k < branching; ++k) {
      const std::size_t pick = k + rng.Next() % (vocab_size - k);
      std::swap(pool[k], pool[pick]);
      successors_[v].push_back(pool[k]);
      weights.push_back(-std::log(rng.NextOpenUnit()));
    }
    double total = 0.0;
    for (const double w : weights) total += w;
    double running = 0.0;
    for (const double w : weights) {
      running += w / total;
      cumulative_[v].push_back(running);
    }
    cumulative_[v].back() = 1.0;
  }
}

TokenSequence BigramSource::Sample(std::size_t length, CounterRng& rng) const {
  TokenSequence seq;
  seq.reserve(length);
  if (length == 0) return seq;
  seq.push_back(static_cast<TokenId>(rng.Next() % successors_.size()));
  while (seq.size() < length) {
    const auto& cum = cumulative_[seq.back()];
    const double u = rng.NextOpenUnit();
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    seq.push_back(successors_[seq.back()][static_cast<std::size_t>(it - cum.begin())]);
  }
  return seq;
}

std::vector<CorpusRecord> BigramSource::SampleCorpus(std::size_t count, std::size_t length,
                                                     uint64_t seed,
                                                     const std::string& id_prefix,
                                                     std::size_t pii_span_length) const {
  CounterRng rng(seed);
  std::vector<CorpusRecord> corpus;
  corpus.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CorpusRecord record;
    record.id = id_prefix + std::to_string(i);
    record.tokens = Sample(length, rng);
    if (pii_span_length > 0 && pii_span_length <= length) {
      const std::size_t start = rng.Next() % (length - pii_span_length + 1);
      record.pii_spans = std::vector<Span>{{start, start + pii_span_length}};
    }
    corpus.push_back(std::move(record));
  }
  return corpus;
}

}  // namespace embinv
