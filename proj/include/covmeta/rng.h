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

// Counter-based random streams.
//
// The bit generator is Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC'11). A stream is identified by a 64-bit
// seed (the Philox key) and a 64-bit stream id; the n-th 128-bit block of a
// stream is
//
//   philox4x32_10(counter = {n_lo, n_hi, stream_lo, stream_hi},
//                 key     = {seed_lo, seed_hi})
//
// and yields two 64-bit words (word 0 = x1:x0, word 1 = x3:x2). Child
// streams are derived with
//
//   child_stream(stream, id) = mix64(stream ^ mix64(id))
//
// where mix64 is the SplitMix64 output function applied to
// x + 0x9E3779B97F4A7C15. Doubles use the top 53 bits of a word; normals
// use Box-Muller with both outputs consumed in order.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace covmeta {

using Philox4x32Block = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

Philox4x32Block philox4x32_10(Philox4x32Block counter, Philox4x32Key key);

std::uint64_t mix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent child stream; does not advance this one.
  Rng split(std::uint64_t id) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Unit-rate exponential.
  double exponential();
  // Index drawn with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::optional<std::uint64_t> pending_word_;
  std::optional<double> pending_normal_;
};

}  // namespace covmeta
