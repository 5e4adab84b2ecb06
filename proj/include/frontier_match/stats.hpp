#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "frontier_match/errors.hpp"

namespace frontier_match::stats {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw validation_error("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance, n-1 denominator. Zero for singleton samples.
inline double variance(std::span<const double> v) {
  if (v.empty()) throw validation_error("variance: empty sample");
  if (v.size() == 1) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standardized mean difference between two samples, pooled-variance
// denominator sqrt((var_a + var_b)/2). Degenerate samples with zero variance
// on both sides give 0 for equal means and signed infinity otherwise.
inline double smd_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw validation_error("smd: empty group");
  const double ma = mean(a), mb = mean(b);
  const double denom = std::sqrt(0.5 * (variance(a) + variance(b)));
  if (denom == 0.0) {
    if (ma == mb) return 0.0;
    return ma > mb ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
  return (ma - mb) / denom;
}

namespace detail {

// Regularized incomplete beta I_x(a,b) by Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = 3e-14;
  constexpr double fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

inline double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lnbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lnbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// CDF of Student's t with (possibly fractional) df degrees of freedom.
inline double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw validation_error("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double p = 0.5 * detail::incbeta(0.5 * df, 0.5, x);
  return t > 0 ? 1.0 - p : p;
}

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Welch two-sample t-test (unequal variances). Degenerate samples with zero
// variance in both groups give t = 0 (equal means) or +-inf (different means).
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw validation_error("welch_t_test: each sample needs at least 2 values");
  const double ma = mean(a), mb = mean(b);
  const double va = variance(a), vb = variance(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  TTestResult r;
  if (se2 == 0.0) {
    if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
    r.t = (ma > mb) ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p_value = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  const double num = se2 * se2;
  const double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
  r.df = (den > 0.0) ? num / den : na + nb - 2.0;
  r.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t), r.df));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

// Two-sample Kolmogorov-Smirnov statistic sup|F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw validation_error("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 101; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Asymptotic p-value for the two-sample KS statistic.
inline double ks_two_sample_pvalue(double d, std::size_t n_a, std::size_t n_b) {
  const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) /
                    static_cast<double>(n_a + n_b);
  return kolmogorov_sf(std::sqrt(ne) * d);
}

// Type-7 (linear interpolation) sample quantile; q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw validation_error("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw validation_error("quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double interquartile_range(const std::vector<double>& v) {
  return quantile(v, 0.75) - quantile(v, 0.25);
}

}  // namespace frontier_match::stats
