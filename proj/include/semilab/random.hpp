#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace semilab {

/// SplitMix64 finalizer; used to derive independent sub-seeds from a root seed and a tag.
std::uint64_t mix64(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Counter-based Philox4x32-10 generator.
///
/// A (seed, stream) pair selects a disjoint sequence; the position inside it is the block counter.
/// Samples of a Monte Carlo computation are mapped to streams by their index, so results do not
/// depend on how the work is split across threads.
class Philox {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ == 4) refill();
    return buffer_[index_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// The raw bijection; exposed for known-answer tests.
  static Block encrypt(Block counter, Key key);

 private:
  void refill();

  Key key_{};
  Block counter_{};
  Block buffer_{};
  int index_ = 4;
};

/// Standard normal draws from one Philox stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(seed, stream) {}

  double operator()() { return normal_(engine_); }

  template <typename Derived>
  void fill(Eigen::MatrixBase<Derived>& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out.derived().data()[i] = normal_(engine_);
  }

  Philox& engine() { return engine_; }

 private:
  Philox engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace semilab
