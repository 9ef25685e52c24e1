#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gmclab {

/// Mean and variance accumulator (Welford) with pairwise merge.
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) noexcept;
  void merge(const RunningStats& other) noexcept;
  double variance() const noexcept;  // unbiased
  double sd() const noexcept;
  double se() const noexcept;
};

/// Standard error of the mean from contiguous batch means.
double batch_means_se(std::span<const double> values, std::size_t n_batches = 100);

/// Median of the means of `groups` contiguous groups.
double median_of_means(std::span<const double> values, std::size_t groups = 20);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for k successes out of n.
Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
};

/// Least squares y = a + b x. With sigma, weights are 1/sigma^2 and slope_se
/// comes from the known errors; without, from the residuals.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma = {});

/// Worker count used when a caller passes 0.
int default_workers() noexcept;

/// Runs fn(chunk, begin, end) over [0, n) split into chunks of `chunk` items.
/// The chunk layout does not depend on `workers`, so callers that reduce
/// per-chunk results in chunk order get identical output for any worker count.
void parallel_chunks(std::size_t n, std::size_t chunk, int workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace gmclab
