#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/dea.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/rng.hpp"
#include "frontier_match/stats.hpp"

namespace frontier_match::ftest {

enum class Verdict { common, separate, underpowered };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::common: return "common";
    case Verdict::separate: return "separate";
    case Verdict::underpowered: return "underpowered";
  }
  return "?";
}

// This is a deliberately reduced form of the Daraio-Simar-Wilson separability
// machinery: a generalized-jackknife bias-corrected difference of group mean
// efficiencies (tau, against the standard normal) plus a two-sample KS
// comparison of the score distributions. It reproduces the roles of the two
// reported scalar statistics at desk scale; it is not the full conditional-
// efficiency test, and the output labels it as an interpretation.
struct FrontierTestResult {
  double tau = 0.0;
  double tau_pvalue = std::numeric_limits<double>::quiet_NaN();
  double ks = 0.0;
  double ks_pvalue = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t split_seed = 0;
  double kappa = 0.0;
  double mean_group1 = 0.0;          // label == 1, bias-corrected
  double mean_group0 = 0.0;          // label == 0, bias-corrected
  Verdict verdict = Verdict::common;
};

namespace detail {

constexpr int k_splits = 11;
constexpr std::size_t k_min_group = 20;
constexpr double k_alpha = 0.05;

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Test whether mean efficiency differs between the two labelled groups under
// a common frontier. kappa = 2/(N+M) is the CRS convergence rate; the
// half-sample bias estimate is 2^kappa (mean_half - mean_full) / (2^kappa - 1),
// medianized over 11 seeded random splits.
inline FrontierTestResult group_mean_test(const dea::FrontierSample& sample,
                                          const std::vector<int>& labels,
                                          std::uint64_t seed) {
  sample.validate();
  if (labels.size() != sample.units.size())
    throw validation_error("group_mean_test: one label per unit required");

  FrontierTestResult res;
  res.split_seed = seed;
  res.kappa = 2.0 / static_cast<double>(sample.n_inputs + sample.n_outputs);

  dea::FrontierSample pooled = sample;
  pooled.scope = dea::Scope::common;
  pooled.groups.clear();
  const auto scores = dea::score_all(pooled);

  std::vector<std::size_t> g0, g1;
  std::vector<double> s0, s1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      g1.push_back(i);
      s1.push_back(scores[i].score);
    } else {
      g0.push_back(i);
      s0.push_back(scores[i].score);
    }
  }
  if (g0.empty() || g1.empty())
    throw validation_error("group_mean_test: both groups must be non-empty");

  res.ks = stats::ks_statistic(s0, s1);
  const double mean1_full = stats::mean(s1);
  const double mean0_full = stats::mean(s0);

  if (g0.size() < detail::k_min_group || g1.size() < detail::k_min_group) {
    res.mean_group1 = mean1_full;
    res.mean_group0 = mean0_full;
    res.tau = std::numeric_limits<double>::quiet_NaN();
    res.verdict = Verdict::underpowered;
    return res;
  }

  const double pow2k = std::pow(2.0, res.kappa);
  std::vector<double> bias0, bias1;
  for (int split = 0; split < detail::k_splits; ++split) {
    // split streams are keyed by group membership (smallest member index),
    // not by the label value, so relabelling the groups negates tau exactly
    auto halves = [&](const std::vector<std::size_t>& g) {
      std::vector<std::size_t> idx = g;
      auto eng = rng::make_engine(seed, {static_cast<std::uint64_t>(split),
                                         static_cast<std::uint64_t>(idx.front())});
      std::shuffle(idx.begin(), idx.end(), eng);
      const std::size_t half = idx.size() / 2;
      return std::pair{std::vector<std::size_t>(idx.begin(), idx.begin() + half),
                       std::vector<std::size_t>(idx.begin() + half, idx.end())};
    };
    const auto [a0, b0] = halves(g0);
    const auto [a1, b1] = halves(g1);

    auto half_means = [&](const std::vector<std::size_t>& h0,
                          const std::vector<std::size_t>& h1) {
      dea::FrontierSample half;
      half.n_inputs = sample.n_inputs;
      half.n_outputs = sample.n_outputs;
      half.scope = dea::Scope::common;
      std::vector<int> is_g1;
      for (std::size_t i : h0) {
        half.units.push_back(sample.units[i]);
        is_g1.push_back(0);
      }
      for (std::size_t i : h1) {
        half.units.push_back(sample.units[i]);
        is_g1.push_back(1);
      }
      const auto hs = dea::score_all(half);
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t i = 0; i < hs.size(); ++i)
        (is_g1[i] ? m1 : m0) += hs[i].score;
      return std::pair{m0 / static_cast<double>(h0.size()),
                       m1 / static_cast<double>(h1.size())};
    };
    const auto [ma0, ma1] = half_means(a0, a1);
    const auto [mb0, mb1] = half_means(b0, b1);
    const double half0 = 0.5 * (ma0 + mb0);
    const double half1 = 0.5 * (ma1 + mb1);
    bias0.push_back(pow2k * (half0 - mean0_full) / (pow2k - 1.0));
    bias1.push_back(pow2k * (half1 - mean1_full) / (pow2k - 1.0));
  }

  res.mean_group0 = mean0_full - detail::median(bias0);
  res.mean_group1 = mean1_full - detail::median(bias1);

  const double se = std::sqrt(stats::variance(s1) / static_cast<double>(s1.size()) +
                              stats::variance(s0) / static_cast<double>(s0.size()));
  if (!(se > 0.0)) throw numeric_error("group_mean_test: zero pooled standard error");
  res.tau = (res.mean_group1 - res.mean_group0) / se;
  res.tau_pvalue = 2.0 * (1.0 - stats::normal_cdf(std::fabs(res.tau)));
  res.ks_pvalue = stats::ks_two_sample_pvalue(res.ks, s0.size(), s1.size());
  res.verdict = res.tau_pvalue < detail::k_alpha ? Verdict::separate : Verdict::common;
  return res;
}

inline std::string format_report(const FrontierTestResult& r) {
  std::string out = "tau=" + csv::fmt(r.tau, 6) + " (p=" + csv::fmt(r.tau_pvalue, 6) +
                    "), KS=" + csv::fmt(r.ks, 6) + " (p=" + csv::fmt(r.ks_pvalue, 6) +
                    "), kappa=" + csv::fmt(r.kappa, 6) +
                    ", verdict=" + to_string(r.verdict);
  return out;
}

}  // namespace frontier_match::ftest
