// Copyright 2026 The dpmob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPMOB_RNG_H_
#define DPMOB_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace dpmob {

// Seedable random stream identified by (seed, stream id), backed by
// std::mt19937_64. The same pair yields the same samples on every platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent stream sharing this stream's seed.
  RngStream Child(std::uint64_t stream_id) const {
    return RngStream(seed_, stream_id);
  }

  std::uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  // Uniform on (0, 1).
  double UniformOpen();
  // Standard normal via Box-Muller; draws come in pairs and the second one is
  // cached.
  double Normal();
  // Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t UniformInt(std::uint64_t bound);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = UniformInt(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace dpmob

#endif  // DPMOB_RNG_H_
