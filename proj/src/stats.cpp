#include "gmclab/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gmclab/error.hpp"

namespace gmclab {

void RunningStats::add(double x) noexcept {
  ++n;
  const double d = x - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (x - mean);
}

void RunningStats::merge(const RunningStats& o) noexcept {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double total = static_cast<double>(n + o.n);
  const double d = o.mean - mean;
  mean += d * static_cast<double>(o.n) / total;
  m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
  n += o.n;
}

double RunningStats::variance() const noexcept { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
double RunningStats::sd() const noexcept { return std::sqrt(variance()); }
double RunningStats::se() const noexcept { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }

double batch_means_se(std::span<const double> values, std::size_t n_batches) {
  const std::size_t n = values.size();
  if (n_batches < 2 || n < 2 * n_batches) {
    RunningStats s;
    for (double v : values) s.add(v);
    return s.se();
  }
  RunningStats batches;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t lo = b * n / n_batches, hi = (b + 1) * n / n_batches;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += values[i];
    batches.add(sum / static_cast<double>(hi - lo));
  }
  return batches.se();
}

double median_of_means(std::span<const double> values, std::size_t groups) {
  const std::size_t n = values.size();
  if (n == 0) return std::nan("");
  groups = std::clamp<std::size_t>(groups, 1, n);
  std::vector<double> means(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * n / groups, hi = (g + 1) * n / groups;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += values[i];
    means[g] = sum / static_cast<double>(hi - lo);
  }
  std::sort(means.begin(), means.end());
  return groups % 2 ? means[groups / 2] : 0.5 * (means[groups / 2 - 1] + means[groups / 2]);
}

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || (!sigma.empty() && sigma.size() != n)) fail(ErrorCode::InvalidArgument, "fit_line size mismatch");
  if (n < 2) fail(ErrorCode::InvalidArgument, "fit_line needs at least two points");
  std::vector<double> w(n, 1.0);
  if (!sigma.empty())
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (sigma[i] * sigma[i]);
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (!sigma.empty()) {
    f.slope_se = std::sqrt(1.0 / sxx);
  } else if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

int default_workers() noexcept {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::size_t n, std::size_t chunk, int workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  if (workers <= 0) workers = default_workers();
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        fn(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(chunks);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gmclab
