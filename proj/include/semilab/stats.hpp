#pragma once

#include <cmath>
#include <cstddef>

namespace semilab {

/// Monte Carlo estimate; stderr is 0 for deterministic evaluations.
struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// Welford accumulator with Chan's pairwise merge. Per-chunk accumulators merged in chunk order
/// give results that do not depend on the thread count.
class Moments {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const Moments& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double total = static_cast<double>(count_ + other.count_);
    const double delta = other.mean_ - mean_;
    mean_ += delta * static_cast<double>(other.count_) / total;
    m2_ += other.m2_ + delta * delta * static_cast<double>(count_) * static_cast<double>(other.count_) / total;
    count_ += other.count_;
  }

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double stderr() const { return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0; }
  Estimate estimate() const { return {mean_, stderr()}; }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace semilab
