#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace capnet {

/// Seeded source used everywhere randomness is needed. Wraps mt19937_64,
/// whose output sequence is fixed by the standard, and derives reals from raw
/// bits because std distributions differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace capnet
