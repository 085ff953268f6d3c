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

#ifndef EMBINV_HARNESS_H_
#define EMBINV_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "embinv/beam_decoder.h"
#include "embinv/corpus.h"
#include "embinv/embedding_table.h"
#include "embinv/noise.h"
#include "embinv/prior.h"
#include "embinv/rng.h"

namespace embinv {

enum class AttackMethod { kNearestNeighbor, kBeamClean };

std::string_view AttackMethodName(AttackMethod method);
AttackMethod ParseAttackMethod(std::string_view name);

// Sweep description. Field names match the JSON config keys.
struct SweepConfig {
  std::string table;
  std::string corpus;
  NoiseFamily mechanism = NoiseFamily::kGaussian;
  // Exactly one of the two grids is nonempty.
  std::vector<double> epsilons;
  std::vector<double> scales;
  std::optional<double> delta;
  std::vector<AttackMethod> methods{AttackMethod::kNearestNeighbor,
                                    AttackMethod::kBeamClean};
  DecodeConfig decode;
  Norm nn_norm = Norm::kL2;
  // "uniform" | "ngram:<path>" | "exec:<cmd>" | "tcp:<host>:<port>"
  std::string prior = "uniform";
  // EMBT table of the prior's vocabulary; enables cross-vocabulary decoding.
  std::optional<std::string> token_map_table;
  // File with one allowed token string per line.
  std::optional<std::string> token_map_restrict;
  std::string output;
  uint64_t master_seed = 0;
  std::size_t max_length = 32;
  std::size_t workers = 1;
  // Wall-clock runtimes make reruns differ; off by default so reruns are
  // byte-identical and runtime_ms is written as 0.
  bool record_runtime = false;

  void Validate() const;
};

SweepConfig SweepConfigFromJson(const nlohmann::json& j);
nlohmann::json SweepConfigToJson(const SweepConfig& config);
SweepConfig LoadSweepConfig(const std::filesystem::path& path);

struct SweepRow {
  NoiseFamily mechanism = NoiseFamily::kGaussian;
  double epsilon = 0.0;
  double scale = 0.0;
  std::optional<double> delta;
  AttackMethod method = AttackMethod::kNearestNeighbor;
  std::string seq_id;
  std::optional<double> asr_percent;
  std::optional<double> pii_recovery_percent;
  double runtime_ms = 0.0;
  // 0/1 for a cell; number of failed cells for an aggregate row.
  std::size_t failed = 0;
  std::string error;
};

struct SweepResult {
  // One row per (grid point, method, sequence), sorted by (epsilon, method, seq_id).
  std::vector<SweepRow> cells;
  // One row per (grid point, method) with seq_id "__mean__".
  std::vector<SweepRow> aggregates;
  std::size_t failed_cells = 0;
  double sensitivity = 0.0;
};

// In-memory inputs for a sweep; RunSweep(config) loads these from disk.
struct SweepInputs {
  const EmbeddingTable* table = nullptr;
  const std::vector<CorpusRecord>* corpus = nullptr;
  std::shared_ptr<const PriorModel> prior;
  std::optional<TokenMap> token_map;
};

SweepResult RunSweep(const SweepInputs& inputs, const SweepConfig& config);
SweepResult RunSweep(const SweepConfig& config);

inline constexpr const char* kSweepCsvHeader =
    "mechanism,epsilon,scale,delta,method,seq_id,asr_percent,pii_recovery_percent,"
    "runtime_ms,failed";

void WriteSweepCsv(const SweepResult& result, std::ostream& out);

// Seeds shared by every method facing the same (grid point, sequence), so
// methods see identical noise.
uint64_t CellNoiseSeed(uint64_t master_seed, std::size_t grid_index,
                       const std::string& seq_id);

// A sparse random first-order Markov source over V tokens. Every token has
// `branching` successors with random weights; starts are uniform.
class BigramSource {
 public:
  BigramSource(std::size_t vocab_size, std::size_t branching, uint64_t seed);

  TokenSequence Sample(std::size_t length, CounterRng& rng) const;
  std::vector<CorpusRecord> SampleCorpus(std::size_t count, std::size_t length,
                                         uint64_t seed, const std::string& id_prefix,
                                         std::size_t pii_span_length = 0) const;

  std::size_t vocab_size() const { return successors_.size(); }
  // Successors and cumulative probabilities of `token`.
  const std::vector<TokenId>& successors(TokenId token) const { return successors_[token]; }

 private:
  std::vector<std::vector<TokenId>> successors_;
  std::vector<std::vector<double>> cumulative_;
};

}  // namespace embinv

#endif  // EMBINV_HARNESS_H_
