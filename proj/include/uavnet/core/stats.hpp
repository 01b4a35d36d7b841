#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace uavnet {

/// Streaming mean/variance (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
    max_ = n_ == 1 ? x : std::max(max_, x);
  }
  std::size_t count() const { return n_; }
  double mean() const { return n_ ? mean_ : 0.0; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double max() const { return max_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double max_ = 0.0;
};

/// Nearest-rank percentile; q in [0, 1]. Sorts a copy.
template <typename T>
double percentile(std::vector<T> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  const std::size_t idx = rank == 0 ? 0 : std::min(rank - 1, values.size() - 1);
  return static_cast<double>(values[idx]);
}

template <typename T>
double mean_of(const std::vector<T>& values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : values) s += static_cast<double>(v);
  return s / static_cast<double>(values.size());
}

}  // namespace uavnet
