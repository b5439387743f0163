#pragma once

#include <cstdint>
#include <vector>

namespace dimcollapse {

// Counter-based generator: the n-th draw of stream (seed, stream_id) is a pure
// function of (seed, stream_id, n), so results do not depend on the standard
// library's distribution implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in (0, 1); never returns exactly 0 or 1.
  double uniform() noexcept;
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Partial Fisher-Yates: `count` distinct indices from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int count);

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent seed for a sub-task (trajectory, step, layer ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace dimcollapse
