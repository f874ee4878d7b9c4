#pragma once

#include "fitvid/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace fitvid {

/// Deterministic counter-style generator (splitmix64 core). The whole state is
/// one u64, which keeps checkpointing and stream splitting trivial. Normal
/// draws use Box-Muller without the cached second value so a draw sequence is
/// a pure function of the state.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  Scalar normal() {
    // open interval keeps log() finite
    Scalar u1 = (static_cast<Scalar>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Tensor normal_tensor(Shape shape) {
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = normal();
    return t;
  }

  Tensor uniform_tensor(Shape shape, Scalar lo, Scalar hi) {
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
    return t;
  }

  /// Independent child stream; children with distinct keys do not collide
  /// with each other or with the parent's continued draws.
  Rng split(uint64_t key) const {
    uint64_t z = state_ ^ (0x9e3779b97f4a7c15ULL + key * 0xd1342543de82ef95ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace fitvid
