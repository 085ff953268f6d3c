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

#ifndef EMBINV_PRIOR_H_
#define EMBINV_PRIOR_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "embinv/embedding_table.h"

namespace embinv {

// Autoregressive prior over token sequences. NextTokenLogProbs returns a
// length-V vector of natural-log probabilities for the token following
// `context`; the vector log-sum-exps to 0. An empty context asks for the
// begin-of-sequence distribution.
class PriorModel {
 public:
  virtual ~PriorModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::string kind() const = 0;
  virtual std::vector<double> NextTokenLogProbs(
      std::span<const TokenId> context) const = 0;
};

std::vector<double> UniformLogProbs(std::size_t vocab_size);

class UniformPrior final : public PriorModel {
 public:
  explicit UniformPrior(std::size_t vocab_size);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::string kind() const override { return "uniform"; }
  std::vector<double> NextTokenLogProbs(std::span<const TokenId> context) const override;

 private:
  std::size_t vocab_size_;
};

// Add-alpha n-gram model with backoff: the longest suffix of the context
// (at most order-1 tokens) that was seen as a history is used, and
//   p(w | h) = (count(h, w) + alpha) / (count(h) + alpha V).
// The empty history always exists, so the model is total.
class NgramPrior final : public PriorModel {
 public:
  struct HistoryCounts {
    uint64_t total = 0;
    std::map<TokenId, uint64_t> next;
  };

  static NgramPrior Train(std::span<const TokenSequence> corpus,
                          std::size_t vocab_size, std::size_t order, double alpha);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::string kind() const override { return "ngram"; }
  std::vector<double> NextTokenLogProbs(std::span<const TokenId> context) const override;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  // Raw count of `next` following `history`; 0 when unseen.
  uint64_t Count(std::span<const TokenId> history, TokenId next) const;
  uint64_t HistoryTotal(std::span<const TokenId> history) const;

  void Save(const std::filesystem::path& path) const;
  static NgramPrior Load(const std::filesystem::path& path);

 private:
  NgramPrior(std::size_t vocab_size, std::size_t order, double alpha);

  const HistoryCounts* Find(std::span<const TokenId> history) const;

  std::size_t vocab_size_;
  std::size_t order_;
  double alpha_;
  std::map<TokenSequence, HistoryCounts> histories_;
};

double LogSumExp(std::span<const double> values);

// Injective partial map from a source vocabulary (the attacked table) to a
// destination vocabulary (the prior model's table).
struct TokenMap {
  std::vector<std::optional<TokenId>> src_to_dst;
  std::size_t dst_vocab_size = 0;
  std::vector<TokenId> unmapped_src;
  bool restricted = false;

  std::size_t mapped_count() const { return src_to_dst.size() - unmapped_src.size(); }
};

// Byte-identical token-string matching, optionally limited to strings in
// `restrict_to`.
TokenMap BuildTokenMap(const EmbeddingTable& src, const EmbeddingTable& dst,
                       const std::vector<std::string>* restrict_to = nullptr);

struct TranslatedContext {
  TokenSequence ids;
  std::size_t dropped = 0;
};

// Maps each position; positions with no mapping are dropped and counted.
TranslatedContext TranslateContext(const TokenMap& map, std::span<const TokenId> context);

// Presents a prior over the destination vocabulary as a prior over the
// source vocabulary. Mapped source tokens take their destination
// probability; the mass left over (destination tokens with no source
// preimage) is shared evenly by the unmapped source tokens, and the result
// is renormalized so every source token has positive probability.
class MappedPrior final : public PriorModel {
 public:
  MappedPrior(std::shared_ptr<const PriorModel> inner, TokenMap map);

  std::size_t vocab_size() const override { return map_.src_to_dst.size(); }
  std::string kind() const override { return "mapped:" + inner_->kind(); }
  std::vector<double> NextTokenLogProbs(std::span<const TokenId> context) const override;

  const TokenMap& map() const { return map_; }

 private:
  std::shared_ptr<const PriorModel> inner_;
  TokenMap map_;
};

}  // namespace embinv

#endif  // EMBINV_PRIOR_H_
