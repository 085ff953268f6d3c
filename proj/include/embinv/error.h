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

#ifndef EMBINV_ERROR_H_
#define EMBINV_ERROR_H_

#include <stdexcept>
#include <string>

namespace embinv {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller passed arguments outside an operation's domain.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// A file did not match its on-disk format (magic, version, truncation).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input data is well-formed but semantically invalid (bad ids, duplicate
// tokens, malformed corpus rows).
class DataError : public Error {
 public:
  using Error::Error;
};

// The external prior provider misbehaved or timed out.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A numerical routine produced a non-finite value it cannot recover from.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace embinv

#endif  // EMBINV_ERROR_H_
