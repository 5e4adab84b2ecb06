#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/matching.hpp"
#include "frontier_match/pscore.hpp"
#include "frontier_match/stats.hpp"

namespace frontier_match::balance {

// Signed standardized mean difference, treated minus control. Reports take
// the absolute value; a +-inf return marks the degenerate zero-variance,
// different-means case and is flagged by callers.
inline double smd(std::span<const double> values, std::span<const double> groups) {
  if (values.size() != groups.size())
    throw validation_error("smd: values/groups length mismatch");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < values.size(); ++i)
    (groups[i] > 0.5 ? a : b).push_back(values[i]);
  return stats::smd_two_sample(a, b);
}

struct CovariateSmd {
  std::string name;
  double before = 0.0;              // unmatched sample
  std::vector<double> after;        // one entry per matching method
  bool degenerate = false;          // any +-inf encountered
};

struct StratumTest {
  double lower = 0.0, upper = 0.0;
  int depth = 0;
  std::size_t n_treated = 0, n_control = 0;
  double t_stat = 0.0;
  double p_value = 1.0;
  bool tested = false;     // enough units in both groups
  bool balanced = true;    // propensity score balanced at alpha
};

struct CovariateStratum {
  std::string name;
  bool balanced = true;
  double min_p = 1.0;
  int blocks_rejected = 0;
};

struct BalanceReport {
  // SMD section (before/after per method)
  std::vector<std::string> method_names;
  std::vector<CovariateSmd> smds;
  // Becker-Ichino stratification section
  double support_lower = 0.0, support_upper = 0.0;
  std::vector<StratumTest> blocks;
  std::vector<CovariateStratum> covariate_tests;
  bool score_balanced = true;
  bool covariates_balanced = true;
  double alpha = 0.0;
};

namespace detail {

inline std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

struct Stratum {
  double lower, upper;
  int depth;
  std::vector<std::size_t> members;
};

}  // namespace detail

// Becker-Ichino style stratification: five equal-width propensity blocks over
// the common support, recursively halved (max depth 6) until the score is
// balanced within each block, then Welch t-tests of every covariate per block.
inline BalanceReport stratification_test(const pscore::PropensityModel& model,
                                         const dataset::DesignMatrix& design,
                                         double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw validation_error("stratification_test: alpha must be in (0,1)");
  const Eigen::Index n = design.rows();
  double min_t = 1.0, max_t = 0.0, min_c = 1.0, max_c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = model.scores(i);
    if (design.treatment(i) > 0.5) {
      min_t = std::min(min_t, s);
      max_t = std::max(max_t, s);
    } else {
      min_c = std::min(min_c, s);
      max_c = std::max(max_c, s);
    }
  }
  const double lo = std::max(min_t, min_c), hi = std::min(max_t, max_c);
  if (!(lo <= hi)) throw numeric_error("stratification_test: empty common support");

  BalanceReport report;
  report.alpha = alpha;
  report.support_lower = lo;
  report.support_upper = hi;

  std::vector<std::size_t> in_support;
  for (Eigen::Index i = 0; i < n; ++i)
    if (model.scores(i) >= lo && model.scores(i) <= hi)
      in_support.push_back(static_cast<std::size_t>(i));

  constexpr int k_initial_blocks = 5;
  constexpr int k_max_depth = 6;
  std::vector<detail::Stratum> todo;
  const double width = (hi - lo) / k_initial_blocks;
  for (int b = 0; b < k_initial_blocks; ++b) {
    detail::Stratum s{lo + b * width, (b + 1 == k_initial_blocks) ? hi : lo + (b + 1) * width, 0, {}};
    todo.push_back(std::move(s));
  }
  for (std::size_t i : in_support) {
    const double s = model.scores(static_cast<Eigen::Index>(i));
    int b = width > 0.0 ? std::min(k_initial_blocks - 1,
                                   static_cast<int>((s - lo) / width))
                        : 0;
    todo[static_cast<std::size_t>(b)].members.push_back(i);
  }

  std::vector<detail::Stratum> leaves;
  while (!todo.empty()) {
    detail::Stratum s = std::move(todo.back());
    todo.pop_back();
    std::vector<double> st, sc;
    for (std::size_t i : s.members)
      (design.treatment(static_cast<Eigen::Index>(i)) > 0.5 ? st : sc)
          .push_back(model.scores(static_cast<Eigen::Index>(i)));
    StratumTest rec{s.lower, s.upper, s.depth, st.size(), sc.size(), 0.0, 1.0, false, true};
    if (st.size() >= 2 && sc.size() >= 2) {
      const auto tt = stats::welch_t_test(st, sc);
      rec.tested = true;
      rec.t_stat = tt.t;
      rec.p_value = tt.p_value;
      if (tt.p_value < alpha) {
        if (s.depth < k_max_depth) {
          const double mid = 0.5 * (s.lower + s.upper);
          detail::Stratum left{s.lower, mid, s.depth + 1, {}};
          detail::Stratum right{mid, s.upper, s.depth + 1, {}};
          for (std::size_t i : s.members)
            (model.scores(static_cast<Eigen::Index>(i)) < mid ? left : right)
                .members.push_back(i);
          todo.push_back(std::move(left));
          todo.push_back(std::move(right));
          continue;
        }
        rec.balanced = false;
        report.score_balanced = false;
      }
    }
    report.blocks.push_back(rec);
    leaves.push_back(std::move(s));
  }
  std::sort(report.blocks.begin(), report.blocks.end(),
            [](const StratumTest& a, const StratumTest& b) { return a.lower < b.lower; });

  for (Eigen::Index j = 1; j < design.cols(); ++j) {
    CovariateStratum cs;
    cs.name = design.column_name(j);
    for (const auto& leaf : leaves) {
      std::vector<double> vt, vc;
      for (std::size_t i : leaf.members)
        (design.treatment(static_cast<Eigen::Index>(i)) > 0.5 ? vt : vc)
            .push_back(design.covariates(static_cast<Eigen::Index>(i), j));
      if (vt.size() < 2 || vc.size() < 2) continue;
      const auto tt = stats::welch_t_test(vt, vc);
      cs.min_p = std::min(cs.min_p, tt.p_value);
      if (tt.p_value < alpha) {
        cs.balanced = false;
        ++cs.blocks_rejected;
      }
    }
    if (!cs.balanced) report.covariates_balanced = false;
    report.covariate_tests.push_back(std::move(cs));
  }
  return report;
}

// Before/after SMD table for the non-constant design columns. After-matching
// groups come from the treated->control pairs of each matched sample.
inline std::vector<CovariateSmd> covariate_smds(
    const dataset::DesignMatrix& design,
    const std::vector<const matching::MatchedSample*>& matched) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < design.ids.size(); ++i) index[design.ids[i]] = i;

  std::vector<CovariateSmd> out;
  const std::vector<double> groups(design.treatment.data(),
                                   design.treatment.data() + design.rows());
  for (Eigen::Index j = 1; j < design.cols(); ++j) {
    CovariateSmd row;
    row.name = design.column_name(j);
    const std::vector<double> values = detail::column(design.covariates, j);
    row.before = smd(values, groups);
    if (std::isinf(row.before)) row.degenerate = true;
    for (const auto* m : matched) {
      std::vector<double> vt, vc;
      for (const auto& p : m->pairs) {
        if (p.direction != matching::Direction::treated_to_control) continue;
        vt.push_back(values[index.at(p.focal_id)]);
        vc.push_back(values[index.at(p.matched_id)]);
      }
      if (vt.empty()) {
        row.after.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const double v = stats::smd_two_sample(vt, vc);
      if (std::isinf(v)) row.degenerate = true;
      row.after.push_back(v);
    }
    out.push_back(std::move(row));
  }
  return out;
}

struct DensityEstimate {
  std::vector<double> grid;     // ascending, uniform over the support
  std::vector<double> density;  // non-negative
  double bandwidth = 0.0;
  double support_lower = 0.0, support_upper = 0.0;
};

// Gaussian kernel density with boundary reflection at both support endpoints
// (efficiency scores live in (0,1], naive kernels leak mass past 1).
// Default bandwidth is Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5).
inline DensityEstimate kernel_density(std::span<const double> values, double support_lower,
                                      double support_upper,
                                      std::optional<double> bandwidth = {}) {
  if (!(support_lower < support_upper))
    throw validation_error("kernel_density: empty support interval");
  if (values.empty()) throw validation_error("kernel_density: no values");
  for (double v : values)
    if (v < support_lower || v > support_upper)
      throw validation_error("kernel_density: value outside the support");

  double h;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw validation_error("kernel_density: bandwidth must be > 0");
    h = *bandwidth;
  } else {
    std::vector<double> v(values.begin(), values.end());
    const double sd = stats::stddev(v);
    if (sd == 0.0) throw numeric_error("kernel_density: all values identical");
    const double iqr = stats::interquartile_range(v);
    // heavily tied samples can have zero IQR with positive sd; fall back to sd
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    h = 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
  }

  constexpr std::size_t k_grid = 512;
  DensityEstimate est;
  est.bandwidth = h;
  est.support_lower = support_lower;
  est.support_upper = support_upper;
  est.grid.resize(k_grid);
  est.density.assign(k_grid, 0.0);
  const double step = (support_upper - support_lower) / static_cast<double>(k_grid - 1);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  auto kern = [&](double u) { return std::exp(-0.5 * u * u); };
  for (std::size_t g = 0; g < k_grid; ++g) {
    const double x = support_lower + static_cast<double>(g) * step;
    est.grid[g] = x;
    double acc = 0.0;
    for (double xi : values) {
      acc += kern((x - xi) / h);
      acc += kern((x - (2.0 * support_lower - xi)) / h);  // reflect at lower edge
      acc += kern((x - (2.0 * support_upper - xi)) / h);  // reflect at upper edge
    }
    est.density[g] = norm * acc;
  }
  return est;
}

inline double trapezoid_integral(const DensityEstimate& est) {
  double s = 0.0;
  for (std::size_t i = 1; i < est.grid.size(); ++i)
    s += 0.5 * (est.density[i] + est.density[i - 1]) * (est.grid[i] - est.grid[i - 1]);
  return s;
}

inline void write_density_csv(std::ostream& out, const DensityEstimate& est) {
  out << "x,density\n";
  for (std::size_t i = 0; i < est.grid.size(); ++i)
    out << csv::fmt(est.grid[i], 10) << ',' << csv::fmt(est.density[i], 10) << '\n';
}

inline void write_smd_csv(std::ostream& out, const BalanceReport& report) {
  out << "covariate,smd_unmatched";
  for (const auto& m : report.method_names) out << ",smd_" << m;
  out << '\n';
  for (const auto& row : report.smds) {
    out << row.name << ',' << csv::fmt(row.before, 10);
    for (double v : row.after) out << ',' << csv::fmt(v, 10);
    out << '\n';
  }
}

inline void write_stratification_csv(std::ostream& out, const BalanceReport& report) {
  out << "block_lower,block_upper,depth,n_treated,n_control,t_stat,p_value,tested,balanced\n";
  for (const auto& b : report.blocks)
    out << csv::fmt(b.lower, 10) << ',' << csv::fmt(b.upper, 10) << ',' << b.depth << ','
        << b.n_treated << ',' << b.n_control << ',' << csv::fmt(b.t_stat, 10) << ','
        << csv::fmt(b.p_value, 10) << ',' << (b.tested ? 1 : 0) << ','
        << (b.balanced ? 1 : 0) << '\n';
  out << "covariate,balanced,min_p,blocks_rejected\n";
  for (const auto& c : report.covariate_tests)
    out << c.name << ',' << (c.balanced ? 1 : 0) << ',' << csv::fmt(c.min_p, 10) << ','
        << c.blocks_rejected << '\n';
}

inline void write_balance_markdown(std::ostream& out, const BalanceReport& report) {
  out << "| covariate | unmatched ";
  for (const auto& m : report.method_names) out << "| " << m << ' ';
  out << "|\n|---|---";
  for (std::size_t i = 0; i < report.method_names.size(); ++i) out << "|---";
  out << "|\n";
  for (const auto& row : report.smds) {
    out << "| " << row.name << " | " << csv::fmt_fixed(std::fabs(row.before), 4) << ' ';
    for (double v : row.after) out << "| " << csv::fmt_fixed(std::fabs(v), 4) << ' ';
    out << "|\n";
  }
  out << "\nstratification (alpha " << csv::fmt(report.alpha) << "): score "
      << (report.score_balanced ? "balanced" : "NOT balanced") << ", covariates "
      << (report.covariates_balanced ? "balanced" : "NOT balanced") << " over "
      << report.blocks.size() << " blocks on support ["
      << csv::fmt_fixed(report.support_lower, 4) << ", "
      << csv::fmt_fixed(report.support_upper, 4) << "]\n";
}

}  // namespace frontier_match::balance
