#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace pufent::detail {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // n-1 denominator
};

/// Two-pass mean and sample variance in fixed summation order.
inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar r;
  const std::size_t n = xs.size();
  if (n == 0) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / static_cast<double>(n);
  if (n < 2) return r;
  double ss = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double d = x - r.mean;
    ss += d * d;
    comp += d;
  }
  // corrected two-pass: removes the residual of the rounded mean
  r.var = (ss - comp * comp / static_cast<double>(n)) / static_cast<double>(n - 1);
  if (r.var < 0.0) r.var = 0.0;
  return r;
}

inline double mean(std::span<const double> xs) { return mean_var(xs).mean; }

}  // namespace pufent::detail
