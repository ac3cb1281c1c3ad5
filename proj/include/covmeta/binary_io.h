// Copyright 2026 The covmeta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitives and the framed container shared by the dataset
// and checkpoint files:
//
//   magic line (ASCII, ends in '\n')
//   u64   header length in bytes
//   header (UTF-8 JSON)
//   payload (format specific)

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace covmeta::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

template <class T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (is.gcount() != static_cast<std::streamsize>(sizeof v)) {
    throw FormatError(std::string("unexpected end of file while reading ") + what);
  }
  return v;
}

inline std::uint32_t read_u32(std::istream& is, const char* what) { return read_pod<std::uint32_t>(is, what); }
inline std::uint64_t read_u64(std::istream& is, const char* what) { return read_pod<std::uint64_t>(is, what); }
inline double read_f64(std::istream& is, const char* what) { return read_pod<double>(is, what); }

inline void write_frame_header(std::ostream& os, const std::string& magic, const std::string& header) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  os.put('\n');
  write_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
}

// Returns the header text after checking the magic line.
inline std::string read_frame_header(std::istream& is, const std::string& magic) {
  std::string line;
  if (!std::getline(is, line) || line != magic) throw FormatError("bad magic: expected '" + magic + "'");
  const std::uint64_t n = read_u64(is, "header length");
  if (n > (1ULL << 30)) throw FormatError("header length " + std::to_string(n) + " is implausible");
  std::string header(n, '\0');
  is.read(header.data(), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) throw FormatError("unexpected end of file in header");
  return header;
}

}  // namespace covmeta::binary
