#pragma once

#include <cstdint>

namespace altsg {

// splitmix64: counter-based, trivially serializable, bit-exact on every
// platform. Deliberately implemented in-repo instead of relying on a
// standard-library engine whose stream is not pinned by the standard.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa; float callers get the
  // same underlying stream so sequences stay aligned across precisions.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (-bound, +bound).
  double next_symmetric(double bound) { return bound * (2.0 * next_double() - 1.0); }

  std::uint64_t raw_state() const { return state_; }
  void set_raw_state(std::uint64_t s) { state_ = s; }

  // Independent child stream (used so e.g. DNI initialization never
  // perturbs the base model's draw sequence).
  RngState fork(std::uint64_t salt) const {
    RngState r(state_ ^ (0xD1B54A32D192ED03ull * (salt + 1)));
    return r;
  }

 private:
  std::uint64_t state_;
};

}  // namespace altsg
