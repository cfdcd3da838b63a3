#pragma once

#include <cmath>
#include <span>

namespace flowdepth::detail {

/// Neumaier compensated sum. Reductions add terms in a fixed order, so the
/// result is reproducible; compensation keeps it insensitive to which terms
/// changed, which finite-difference checks rely on.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_mean(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

}  // namespace flowdepth::detail
