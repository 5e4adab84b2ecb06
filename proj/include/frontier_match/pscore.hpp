#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/errors.hpp"

namespace frontier_match::pscore {

struct PropensityModel {
  std::vector<std::string> terms;  // design column names
  Eigen::VectorXd coefficients;    // aligned with DesignMatrix columns, raw scale
  Eigen::VectorXd std_errors;      // from the inverse observed information
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd scores;    // fitted probabilities, strictly inside (0,1)
  Eigen::VectorXd log_odds;  // linear predictor
};

namespace detail {

constexpr double k_grad_tol = 1e-8;
constexpr int k_max_iter = 50;
constexpr int k_max_halvings = 20;
constexpr double k_separation_norm = 1e3;

inline double log1pexp(double x) {
  // log(1 + e^x) without overflow
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += y(i) * eta(i) - log1pexp(eta(i));
  return ll;
}

}  // namespace detail

// Maximum-likelihood logit fit by Newton iterations with step halving.
// Covariates are standardised internally (the reserve price is ~1e5 times the
// dummy scale); coefficients and the covariance are mapped back to raw scale.
inline PropensityModel fit_logit(const dataset::DesignMatrix& design) {
  const Eigen::MatrixXd& x = design.covariates;
  const Eigen::VectorXd& y = design.treatment;
  const Eigen::Index n = x.rows(), p = x.cols();
  const double treated = y.sum();
  if (treated < 1.0 || treated > static_cast<double>(n) - 1.0)
    throw validation_error("fit_logit: need at least one treated and one control record");

  // standardise non-constant columns; constant columns other than column 0
  // are perfectly collinear with the intercept
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p), sd = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 1; j < p; ++j) {
    mu(j) = x.col(j).mean();
    const double var = (x.col(j).array() - mu(j)).square().sum() /
                       static_cast<double>(n > 1 ? n - 1 : 1);
    if (var <= 0.0)
      throw numeric_error("fit_logit: singular information matrix (column '" +
                          design.column_name(j) + "' is constant)");
    sd(j) = std::sqrt(var);
    z.col(j) = (x.col(j).array() - mu(j)) / sd(j);
  }

  const double pbar = treated / static_cast<double>(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = std::log(pbar / (1.0 - pbar));

  Eigen::VectorXd eta = z * beta;
  double ll = detail::log_likelihood(eta, y);
  bool converged = false;
  int iter = 0;
  Eigen::VectorXd prob(n);
  while (iter < detail::k_max_iter) {
    prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Eigen::VectorXd grad = z.transpose() * (y - prob);
    if (grad.lpNorm<Eigen::Infinity>() < detail::k_grad_tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
    const Eigen::MatrixXd info = z.transpose() * w.asDiagonal() * z;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const Eigen::VectorXd diag = ldlt.vectorD();
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite() ||
        diag.minCoeff() <= 1e-12 * diag.maxCoeff() ||
        (info * step - grad).norm() > 1e-6 * (grad.norm() + 1.0))
      throw numeric_error("fit_logit: singular information matrix");

    // step halving keeps the log-likelihood non-decreasing
    double scale = 1.0;
    Eigen::VectorXd cand;
    double ll_new = ll;
    for (int h = 0; h <= detail::k_max_halvings; ++h) {
      cand = beta + scale * step;
      ll_new = detail::log_likelihood(z * cand, y);
      if (ll_new >= ll - 1e-12) break;
      scale *= 0.5;
    }
    beta = cand;
    eta = z * beta;
    ll = ll_new;
    ++iter;

    if (beta.norm() > detail::k_separation_norm) {
      Eigen::Index worst = 0;
      beta.cwiseAbs().maxCoeff(&worst);
      throw numeric_error("fit_logit: perfect separation along '" +
                          design.column_name(worst) + "' (diverging coefficients)");
    }
  }

  // map standardised coefficients back to the raw covariate scale
  PropensityModel m;
  m.coefficients = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p, p);  // d(raw)/d(standardised)
  jac(0, 0) = 1.0;
  m.coefficients(0) = beta(0);
  for (Eigen::Index j = 1; j < p; ++j) {
    m.coefficients(j) = beta(j) / sd(j);
    m.coefficients(0) -= beta(j) * mu(j) / sd(j);
    jac(j, j) = 1.0 / sd(j);
    jac(0, j) = -mu(j) / sd(j);
  }
  prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
  const Eigen::MatrixXd info = z.transpose() * w.asDiagonal() * z;
  const Eigen::MatrixXd cov_std =
      info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov = jac * cov_std * jac.transpose();
  m.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  m.terms = design.column_names;
  m.log_likelihood = ll;
  m.converged = converged;
  m.iterations = iter;
  m.log_odds = x * m.coefficients;
  m.scores = (1.0 / (1.0 + (-m.log_odds.array()).exp())).matrix();
  return m;
}

// Coefficient table in the usual estimate/(std error) layout.
inline void write_model_csv(std::ostream& out, const PropensityModel& m) {
  out << "term,estimate,std_error\n";
  for (Eigen::Index j = 0; j < m.coefficients.size(); ++j)
    out << m.terms[static_cast<std::size_t>(j)] << ',' << csv::fmt(m.coefficients(j))
        << ',' << csv::fmt(m.std_errors(j)) << '\n';
  out << "log_likelihood," << csv::fmt(m.log_likelihood) << ",\n";
  out << "converged," << (m.converged ? 1 : 0) << ",\n";
  out << "iterations," << m.iterations << ",\n";
}

inline void write_model_markdown(std::ostream& out, const PropensityModel& m) {
  out << "| term | estimate | std. error |\n|---|---|---|\n";
  for (Eigen::Index j = 0; j < m.coefficients.size(); ++j)
    out << "| " << m.terms[static_cast<std::size_t>(j)] << " | "
        << csv::fmt_fixed(m.coefficients(j), 4) << " | "
        << csv::fmt_fixed(m.std_errors(j), 4) << " |\n";
  out << "\nlog-likelihood " << csv::fmt_fixed(m.log_likelihood, 2) << ", "
      << (m.converged ? "converged" : "did not converge") << " in " << m.iterations
      << " iterations\n";
}

}  // namespace frontier_match::pscore
