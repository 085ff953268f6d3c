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

#include "embinv/prior.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "embinv/error.h"

namespace embinv {

double LogSumExp(std::span<const double> values) {
  double peak = -std::numeric_limits<double>::infinity();
  for (const double v : values) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (const double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

std::vector<double> UniformLogProbs(std::size_t vocab_size) {
  if (vocab_size < 1) throw InvalidArgumentError("vocabulary must be nonempty");
  return std::vector<double>(vocab_size, -std::log(static_cast<double>(vocab_size)));
}

UniformPrior::UniformPrior(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 1) throw InvalidArgumentError("vocabulary must be nonempty");
}

std::vector<double> UniformPrior::NextTokenLogProbs(std::span<const TokenId> context) const {
  for (const TokenId id : context) {
    if (id >= vocab_size_) throw DataError("context id out of range");
  }
  return UniformLogProbs(vocab_size_);
}

NgramPrior::NgramPrior(std::size_t vocab_size, std::size_t order, double alpha)
    : vocab_size_(vocab_size), order_(order), alpha_(alpha) {
  if (vocab_size < 1) throw InvalidArgumentError("vocabulary must be nonempty");
  if (order < 1) throw InvalidArgumentError("n-gram order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgumentError("smoothing constant alpha must be positive");
  }
}

NgramPrior NgramPrior::Train(std::span<const TokenSequence> corpus,
                             std::size_t vocab_size, std::size_t order, double alpha) {
  NgramPrior prior(vocab_size, order, alpha);
  if (corpus.empty()) throw InvalidArgumentError("cannot train on an empty corpus");
  prior.histories_[TokenSequence{}];
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= vocab_size) throw DataError("corpus token id out of range");
      for (std::size_t k = 0; k < order && k <= i; ++k) {
        auto& counts = prior.histories_[TokenSequence(seq.begin() + (i - k), seq.begin() + i)];
        ++counts.total;
        ++counts.next[seq[i]];
      }
    }
  }
  return prior;
}

const NgramPrior::HistoryCounts* NgramPrior::Find(std::span<const TokenId> history) const {
  const auto it = histories_.find(TokenSequence(history.begin(), history.end()));
  return it == histories_.end() ? nullptr : &it->second;
}

uint64_t NgramPrior::Count(std::span<const TokenId> history, TokenId next) const {
  const auto* counts = Find(history);
  if (counts == nullptr) return 0;
  const auto it = counts->next.find(next);
  return it == counts->next.end() ? 0 : it->second;
}

uint64_t NgramPrior::HistoryTotal(std::span<const TokenId> history) const {
  const auto* counts = Find(history);
  return counts == nullptr ? 0 : counts->total;
}

std::vector<double> NgramPrior::NextTokenLogProbs(std::span<const TokenId> context) const {
  for (const TokenId id : context) {
    if (id >= vocab_size_) throw DataError("context id out of range");
  }
  const std::size_t max_history = std::min(order_ - 1, context.size());
  const HistoryCounts* counts = nullptr;
  for (std::size_t len = max_history + 1; len-- > 0;) {
    counts = Find(context.subspan(context.size() - len));
    if (counts != nullptr && counts->total > 0) break;
  }
  const double denom = std::log(static_cast<double>(counts ? counts->total : 0) +
                                alpha_ * static_cast<double>(vocab_size_));
  std::vector<double> logprobs(vocab_size_, std::log(alpha_) - denom);
  if (counts != nullptr) {
    for (const auto& [token, count] : counts->next) {
      logprobs[token] = std::log(static_cast<double>(count) + alpha_) - denom;
    }
  }
  return logprobs;
}

void NgramPrior::Save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["kind"] = "ngram";
  doc["vocab_size"] = vocab_size_;
  doc["order"] = order_;
  doc["alpha"] = alpha_;
  auto& rows = doc["histories"] = nlohmann::json::array();
  for (const auto& [history, counts] : histories_) {
    nlohmann::json next = nlohmann::json::array();
    for (const auto& [token, count] : counts.next) next.push_back({token, count});
    rows.push_back({{"history", history}, {"next", std::move(next)}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << doc.dump() << '\n';
}

NgramPrior NgramPrior::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prior: " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.at("kind") != "ngram") throw FormatError("not an n-gram prior file");
    NgramPrior prior(doc.at("vocab_size").get<std::size_t>(),
                     doc.at("order").get<std::size_t>(), doc.at("alpha").get<double>());
    prior.histories_[TokenSequence{}];
    for (const auto& row : doc.at("histories")) {
      auto& counts = prior.histories_[row.at("history").get<TokenSequence>()];
      for (const auto& pair : row.at("next")) {
        const auto token = pair.at(0).get<TokenId>();
        const auto count = pair.at(1).get<uint64_t>();
        if (token >= prior.vocab_size_) throw DataError("prior token id out of range");
        counts.next[token] = count;
        counts.total += count;
      }
    }
    return prior;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed prior file: ") + e.what());
  }
}

TokenMap BuildTokenMap(const EmbeddingTable& src, const EmbeddingTable& dst,
                       const std::vector<std::string>* restrict_to) {
  std::unordered_map<std::string_view, TokenId> dst_index;
  for (TokenId id = 0; id < dst.vocab_size(); ++id) dst_index.emplace(dst.token(id), id);
  std::unordered_set<std::string_view> allowed;
  if (restrict_to != nullptr) allowed.insert(restrict_to->begin(), restrict_to->end());

  TokenMap map;
  map.dst_vocab_size = dst.vocab_size();
  map.restricted = restrict_to != nullptr;
  map.src_to_dst.resize(src.vocab_size());
  for (TokenId id = 0; id < src.vocab_size(); ++id) {
    const auto& token = src.token(id);
    const auto it = dst_index.find(token);
    if (it != dst_index.end() && (restrict_to == nullptr || allowed.contains(token))) {
      map.src_to_dst[id] = it->second;
    } else {
      map.unmapped_src.push_back(id);
    }
  }
  return map;
}

TranslatedContext TranslateContext(const TokenMap& map, std::span<const TokenId> context) {
  TranslatedContext out;
  for (const TokenId id : context) {
    if (id < map.src_to_dst.size() && map.src_to_dst[id]) {
      out.ids.push_back(*map.src_to_dst[id]);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

MappedPrior::MappedPrior(std::shared_ptr<const PriorModel> inner, TokenMap map)
    : inner_(std::move(inner)), map_(std::move(map)) {
  if (inner_ == nullptr) throw InvalidArgumentError("mapped prior needs an inner prior");
  if (inner_->vocab_size() != map_.dst_vocab_size) {
    throw InvalidArgumentError("token map destination does not match prior vocabulary");
  }
}

std::vector<double> MappedPrior::NextTokenLogProbs(std::span<const TokenId> context) const {
  const auto translated = TranslateContext(map_, context);
  const auto inner = inner_->NextTokenLogProbs(translated.ids);
  std::vector<double> probs(map_.src_to_dst.size(), 0.0);
  double mapped_mass = 0.0;
  for (std::size_t id = 0; id < probs.size(); ++id) {
    if (map_.src_to_dst[id]) {
      probs[id] = std::max(std::exp(inner[*map_.src_to_dst[id]]),
                           std::numeric_limits<double>::min());
      mapped_mass += probs[id];
    }
  }
  if (!map_.unmapped_src.empty()) {
    constexpr double kFloor = 1e-12;
    const double share = std::max((1.0 - mapped_mass) /
                                      static_cast<double>(map_.unmapped_src.size()),
                                  kFloor);
    for (const TokenId id : map_.unmapped_src) probs[id] = share;
  }
  double total = 0.0;
  for (const double p : probs) total += p;
  std::vector<double> logprobs(probs.size());
  for (std::size_t id = 0; id < probs.size(); ++id) {
    logprobs[id] = std::log(probs[id]) - std::log(total);
  }
  return logprobs;
}

}  // namespace embinv
