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

// Little-endian primitives shared by the EMBT and OBF1 readers/writers.

#ifndef EMBINV_SRC_BINARY_IO_H_
#define EMBINV_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "embinv/error.h"

namespace embinv::internal {

template <typename UInt>
void WriteLe(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

inline void WriteF32(std::ostream& out, float v) {
  WriteLe(out, std::bit_cast<uint32_t>(v));
}
inline void WriteF64(std::ostream& out, double v) {
  WriteLe(out, std::bit_cast<uint64_t>(v));
}
inline void WriteString(std::ostream& out, const std::string& s) {
  WriteLe(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename UInt>
UInt ReadLe(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw FormatError(std::string("truncated payload while reading ") + what);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

inline float ReadF32(std::istream& in, const char* what) {
  return std::bit_cast<float>(ReadLe<uint32_t>(in, what));
}
inline double ReadF64(std::istream& in, const char* what) {
  return std::bit_cast<double>(ReadLe<uint64_t>(in, what));
}
inline std::string ReadString(std::istream& in, const char* what) {
  const uint32_t len = ReadLe<uint32_t>(in, what);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    throw FormatError(std::string("truncated payload while reading ") + what);
  }
  return s;
}

inline uint64_t RemainingBytes(std::istream& in) {
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  return static_cast<uint64_t>(end - here);
}

inline void ExpectMagic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::string(got, 4) != std::string(magic, 4)) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace embinv::internal

#endif  // EMBINV_SRC_BINARY_IO_H_
