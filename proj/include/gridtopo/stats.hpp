#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gridtopo/common.hpp"

namespace gridtopo::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance (n - 1).
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractViolation("variance needs at least two values");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

// Linear-interpolation quantile (the common "type 7" convention), fixed for
// reproducibility across every report.
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw ContractViolation("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw ContractViolation("quantile p outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double h = p * (static_cast<double>(xs.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

namespace detail {

// Regularized incomplete beta I_x(a, b) via the continued-fraction expansion
// (modified Lentz). Accurate to ~1e-14 for the Student-t use below.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided survival probability of |T| >= |t| for Student's t with dof
// degrees of freedom.
inline double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw ContractViolation("student t: dof must be positive");
  const double x = dof / (dof + t * t);
  return detail::ibeta(dof / 2.0, 0.5, x);
}

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom, two-sided p-value.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ContractViolation("welch_t_test: each sample needs at least two values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a), vb = variance(b);
  if (va <= 0.0 && vb <= 0.0)
    throw ContractViolation("welch_t_test: both samples are degenerate (zero variance)");
  const double ra = va / na, rb = vb / nb;
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(ra + rb);
  r.dof = (ra + rb) * (ra + rb) /
          ((va > 0.0 ? ra * ra / (na - 1.0) : 0.0) + (vb > 0.0 ? rb * rb / (nb - 1.0) : 0.0));
  r.p = r.t == 0.0 ? 1.0 : student_t_two_sided_p(r.t, r.dof);
  return r;
}

}  // namespace gridtopo::stats
