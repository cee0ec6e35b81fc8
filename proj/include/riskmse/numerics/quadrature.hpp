#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "riskmse/errors.hpp"

namespace riskmse {

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
  int intervals = 0;
};

namespace quad_detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (positive half; the rule
// is symmetric). Node 7 is the midpoint.
inline constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct Panel {
  double lo, hi;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <typename F>
Panel evaluate_panel(F&& f, double lo, double hi, int& evals) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(center - half * kXgk[i]);
    fv[14 - i] = f(center + half * kXgk[i]);
  }
  fv[7] = f(center);
  evals += 15;
  for (int i = 0; i < 15; ++i)
    if (!std::isfinite(fv[i])) throw InvalidInput("integrate_1d: integrand returned non-finite value");

  double resk = kWgk[7] * fv[7];
  double resabs = std::abs(resk);
  for (int i = 0; i < 7; ++i) {
    resk += kWgk[i] * (fv[i] + fv[14 - i]);
    resabs += kWgk[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
  }
  double resg = kWg[3] * fv[7];
  for (int i = 0; i < 4; ++i) {
    const int j = 2 * i + 1;
    if (j < 7) resg += kWg[i] * (fv[j] + fv[14 - j]);
  }

  const double reskh = resk * 0.5;
  double resasc = kWgk[7] * std::abs(fv[7] - reskh);
  for (int i = 0; i < 7; ++i)
    resasc += kWgk[i] * (std::abs(fv[i] - reskh) + std::abs(fv[14 - i] - reskh));

  double err = std::abs((resk - resg) * half);
  resasc *= half;
  resabs *= half;
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double round_floor = 50.0 * std::numeric_limits<double>::epsilon() * resabs;
  err = std::max(err, round_floor);

  return Panel{lo, hi, resk * half, err};
}

}  // namespace quad_detail

// Adaptive Gauss-Kronrod integration of f over (lo, hi). Either endpoint may
// be infinite; infinite ranges are mapped to a finite parameter first. Throws
// AccuracyFailure (carrying the best estimate) if the interval budget runs
// out before the requested tolerance is met.
template <typename F>
QuadResult integrate_1d(F&& f, double lo, double hi, double abs_tol = 1e-12,
                        double rel_tol = 1e-9, int max_intervals = 5000) {
  if (std::isnan(lo) || std::isnan(hi)) throw InvalidInput("integrate_1d: NaN endpoint");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw InvalidInput("integrate_1d: tolerances must be positive");
  if (!(lo < hi)) {
    if (lo == hi) return {};
    throw InvalidInput("integrate_1d: lo must be below hi");
  }

  const bool lo_inf = std::isinf(lo);
  const bool hi_inf = std::isinf(hi);

  std::function<double(double)> g;
  double a = lo, b = hi;
  if (lo_inf && hi_inf) {
    // x = t / (1 - t^2) maps (-1, 1) onto the whole line.
    g = [&f](double t) {
      const double den = 1.0 - t * t;
      const double x = t / den;
      return f(x) * (1.0 + t * t) / (den * den);
    };
    a = -1.0;
    b = 1.0;
  } else if (hi_inf) {
    // x = lo + t / (1 - t) maps (0, 1) onto (lo, inf).
    g = [&f, lo](double t) {
      const double den = 1.0 - t;
      return f(lo + t / den) / (den * den);
    };
    a = 0.0;
    b = 1.0;
  } else if (lo_inf) {
    // x = hi - t / (1 - t) maps (0, 1) onto (-inf, hi).
    g = [&f, hi](double t) {
      const double den = 1.0 - t;
      return f(hi - t / den) / (den * den);
    };
    a = 0.0;
    b = 1.0;
  } else {
    g = [&f](double x) { return f(x); };
  }

  QuadResult out;
  std::priority_queue<quad_detail::Panel> heap;
  heap.push(quad_detail::evaluate_panel(g, a, b, out.evaluations));

  double total = heap.top().value;
  double total_err = heap.top().error;

  while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= max_intervals) {
      out.value = total;
      out.error_estimate = total_err;
      out.intervals = static_cast<int>(heap.size());
      throw AccuracyFailure("integrate_1d: interval budget exhausted", total);
    }
    const quad_detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (mid <= worst.lo || mid >= worst.hi) {
      // Interval narrowed to machine width; keep its contribution as-is.
      total_err = std::max(0.0, total_err - worst.error * 0.5);
      quad_detail::Panel pinned = worst;
      pinned.error *= 0.5;
      heap.push(pinned);
      continue;
    }
    const auto left = quad_detail::evaluate_panel(g, worst.lo, mid, out.evaluations);
    const auto right = quad_detail::evaluate_panel(g, mid, worst.hi, out.evaluations);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  out.value = total;
  out.error_estimate = total_err;
  out.intervals = static_cast<int>(heap.size());
  return out;
}

}  // namespace riskmse
