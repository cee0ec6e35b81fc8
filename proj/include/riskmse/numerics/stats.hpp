#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <thread>
#include <vector>

#include "riskmse/errors.hpp"

namespace riskmse {

// Pairwise summation, used everywhere sample summands are reduced so that
// results do not depend on accumulation order and roundoff stays bounded.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 32) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
};

inline MeanSe mean_and_se(std::span<const double> v) {
  MeanSe r;
  r.n = static_cast<long>(v.size());
  if (r.n == 0) throw InvalidInput("mean_and_se: empty sample");
  r.mean = pairwise_sum(v) / static_cast<double>(r.n);
  if (r.n == 1) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - r.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(r.n - 1);
  r.std_error = std::sqrt(var / static_cast<double>(r.n));
  return r;
}

// Sample covariance of paired summands divided by n, i.e. the covariance of
// the two sample means. Zero for a single sample.
inline double covariance_of_means(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("covariance_of_means: size mismatch");
  const std::size_t n = a.size();
  if (n == 0) throw InvalidInput("covariance_of_means: empty sample");
  if (n == 1) return 0.0;
  const double ma = pairwise_sum(a) / static_cast<double>(n);
  const double mb = pairwise_sum(b) / static_cast<double>(n);
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = (a[i] - ma) * (b[i] - mb);
  const double cov = pairwise_sum(prod) / static_cast<double>(n - 1);
  return cov / static_cast<double>(n);
}

// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidInput("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile: q outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

// Runs fn(i) for i in [0, n) on `threads` workers over contiguous index
// chunks. fn must only write to per-index slots; results are then identical
// for every thread count. The first exception thrown by any worker is
// rethrown on the calling thread.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads < 1) throw InvalidInput("parallel_for: thread count must be at least 1");
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers, nullptr);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end]() {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace riskmse
