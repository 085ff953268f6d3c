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

#ifndef EMBINV_EXTERNAL_PRIOR_H_
#define EMBINV_EXTERNAL_PRIOR_H_

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embinv/prior.h"

namespace embinv {

// Bidirectional newline-delimited byte channel.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void WriteLine(const std::string& line) = 0;
  // Returns std::nullopt on timeout; throws ProtocolError on EOF.
  virtual std::optional<std::string> ReadLine(std::chrono::milliseconds timeout) = 0;
};

// Spawns `/bin/sh -c command` and talks to it over its stdin/stdout.
std::unique_ptr<LineTransport> SpawnProcessTransport(const std::string& command);

// Connects to host:port over TCP.
std::unique_ptr<LineTransport> ConnectTcpTransport(const std::string& host, uint16_t port);

// Client side of the line-delimited JSON prior protocol:
//   provider -> {"V": int, "name": str}                      (handshake, once)
//   client   -> {"rid": int, "context": [int]}
//   provider -> {"rid": int, "logprobs": [V floats]} | {"rid": int, "error": str}
// Request ids increase monotonically per connection and every response must
// echo the id of the outstanding request. Responses are renormalized to
// log-sum-exp 0 and cached per context, so repeated contexts cost nothing.
class ExternalPrior final : public PriorModel {
 public:
  static constexpr std::chrono::milliseconds kDefaultTimeout{30000};

  ExternalPrior(std::unique_ptr<LineTransport> transport,
                std::chrono::milliseconds timeout = kDefaultTimeout);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::string kind() const override { return "external:" + name_; }
  std::vector<double> NextTokenLogProbs(std::span<const TokenId> context) const override;

  const std::string& name() const { return name_; }
  uint64_t requests_sent() const;

 private:
  std::unique_ptr<LineTransport> transport_;
  std::chrono::milliseconds timeout_;
  std::size_t vocab_size_ = 0;
  std::string name_;
  mutable std::mutex mu_;
  mutable uint64_t next_rid_ = 1;
  mutable std::map<TokenSequence, std::vector<double>> cache_;
};

// Resolves a prior source string:
//   "uniform" | "ngram:<path>" | "exec:<command>" | "tcp:<host>:<port>".
// `vocab_size` is the attacker vocabulary for "uniform" and is checked
// against the loaded prior otherwise unless `check_vocab` is false.
std::shared_ptr<const PriorModel> OpenPrior(const std::string& source,
                                            std::size_t vocab_size,
                                            bool check_vocab = true);

}  // namespace embinv

#endif  // EMBINV_EXTERNAL_PRIOR_H_
