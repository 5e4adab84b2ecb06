#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/pscore.hpp"
#include "frontier_match/rng.hpp"
#include "frontier_match/stats.hpp"

namespace frontier_match::matching {

enum class Method { nn, genetic };
enum class Direction { treated_to_control, control_to_treated };

inline const char* to_string(Method m) { return m == Method::nn ? "nn" : "genetic"; }
inline const char* to_string(Direction d) {
  return d == Direction::treated_to_control ? "treated_to_control" : "control_to_treated";
}

struct MatchedPair {
  std::string focal_id;
  std::string matched_id;
  double distance = 0.0;
  Direction direction = Direction::treated_to_control;
};

struct MatchedSample {
  Method method = Method::nn;
  std::vector<MatchedPair> pairs;
  std::vector<std::string> unmatched_ids;   // sorted
  std::vector<double> weights;              // genetic: diagonal metric weights
  std::vector<std::string> weight_names;
};

struct MatchOptions {
  bool with_replacement = false;
  std::optional<double> caliper;  // in units of sd(log-odds)
};

struct GeneticOptions {
  int population = 32;
  int generations = 50;
  std::uint64_t seed = 0;
  MatchOptions policy;
};

namespace detail {

struct Pool {
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
};

inline Pool split_groups(const Eigen::VectorXd& treatment) {
  Pool p;
  for (Eigen::Index i = 0; i < treatment.size(); ++i)
    (treatment(i) > 0.5 ? p.treated : p.control).push_back(static_cast<std::size_t>(i));
  if (p.treated.empty() || p.control.empty())
    throw validation_error("matching requires both a treated and a control group");
  return p;
}

// Focal units are processed in descending log-odds order (ties by id); donors
// are scanned in ascending id order so that equidistant donors resolve to the
// lexicographically smaller contract id.
inline std::vector<std::size_t> focal_order(const std::vector<std::size_t>& group,
                                            const Eigen::VectorXd& log_odds,
                                            const std::vector<std::string>& ids) {
  std::vector<std::size_t> order = group;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = log_odds(static_cast<Eigen::Index>(a));
    const double lb = log_odds(static_cast<Eigen::Index>(b));
    if (la != lb) return la > lb;
    return ids[a] < ids[b];
  });
  return order;
}

inline std::vector<std::size_t> id_order(const std::vector<std::size_t>& group,
                                         const std::vector<std::string>& ids) {
  std::vector<std::size_t> order = group;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return order;
}

// One greedy direction. `distance` is the matching metric; `gate` is the
// caliper eligibility value (always the absolute log-odds difference, so a
// caliper means the same thing under both metrics).
template <typename DistanceFn, typename GateFn>
void greedy_direction(const std::vector<std::size_t>& focal_order,
                      const std::vector<std::size_t>& donor_order,
                      const std::vector<std::string>& ids, Direction direction,
                      const MatchOptions& opt, double caliper_threshold,
                      DistanceFn&& distance, GateFn&& gate, MatchedSample& out) {
  std::vector<char> used(ids.size(), 0);
  for (std::size_t f : focal_order) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t d : donor_order) {
      if (!opt.with_replacement && used[d]) continue;
      const double dist = distance(f, d);
      if (dist < best_dist) {
        best_dist = dist;
        best = d;
      }
    }
    if (best == std::numeric_limits<std::size_t>::max() ||
        (opt.caliper && gate(f, best) > caliper_threshold)) {
      out.unmatched_ids.push_back(ids[f]);
      continue;
    }
    used[best] = 1;
    out.pairs.push_back({ids[f], ids[best], best_dist, direction});
  }
}

inline double log_odds_sd(const Eigen::VectorXd& log_odds) {
  std::vector<double> v(log_odds.data(), log_odds.data() + log_odds.size());
  return stats::stddev(v);
}

template <typename DistanceFn, typename GateFn>
MatchedSample match_both_directions(const dataset::DesignMatrix& design,
                                    const Eigen::VectorXd& log_odds, Method method,
                                    const MatchOptions& opt, DistanceFn&& distance,
                                    GateFn&& gate) {
  const Pool pool = split_groups(design.treatment);
  const double threshold = opt.caliper ? *opt.caliper * log_odds_sd(log_odds)
                                       : std::numeric_limits<double>::infinity();
  MatchedSample out;
  out.method = method;
  greedy_direction(focal_order(pool.treated, log_odds, design.ids),
                   id_order(pool.control, design.ids), design.ids,
                   Direction::treated_to_control, opt, threshold, distance, gate, out);
  greedy_direction(focal_order(pool.control, log_odds, design.ids),
                   id_order(pool.treated, design.ids), design.ids,
                   Direction::control_to_treated, opt, threshold, distance, gate, out);
  std::sort(out.unmatched_ids.begin(), out.unmatched_ids.end());
  return out;
}

}  // namespace detail

// Nearest-neighbour matching on the log-odds scale, both directions.
inline MatchedSample match_nn(const dataset::DesignMatrix& design,
                              const pscore::PropensityModel& model,
                              const MatchOptions& opt = {}) {
  const Eigen::VectorXd& lo = model.log_odds;
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::fabs(lo(static_cast<Eigen::Index>(a)) - lo(static_cast<Eigen::Index>(b)));
  };
  return detail::match_both_directions(design, lo, Method::nn, opt, dist, dist);
}

namespace detail {

// Feature block for the weighted metric: standardized non-constant covariates
// plus the standardized log-odds as the last row. Stored transposed (feature
// by unit) for contiguous per-unit access.
struct FeatureSpace {
  Eigen::MatrixXd feat;  // d x n
  std::vector<std::string> names;
};

inline FeatureSpace build_features(const dataset::DesignMatrix& design,
                                   const pscore::PropensityModel& model) {
  const Eigen::Index n = design.rows(), p = design.cols();
  FeatureSpace fs;
  fs.feat.setZero(p, n);  // p-1 covariates + log-odds
  Eigen::Index row = 0;
  auto standardize = [&](const Eigen::VectorXd& col, const std::string& name) {
    const double mu = col.mean();
    const double var = (col.array() - mu).square().sum() /
                       static_cast<double>(n > 1 ? n - 1 : 1);
    if (var > 0.0)
      fs.feat.row(row) = ((col.array() - mu) / std::sqrt(var)).transpose();
    fs.names.push_back(name);
    ++row;
  };
  for (Eigen::Index j = 1; j < p; ++j)
    standardize(design.covariates.col(j), design.column_name(j));
  standardize(model.log_odds, "log_odds");
  return fs;
}

inline double weighted_distance(const FeatureSpace& fs, const std::vector<double>& w,
                                std::size_t a, std::size_t b) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < fs.feat.rows(); ++k) {
    const double d = fs.feat(k, static_cast<Eigen::Index>(a)) -
                     fs.feat(k, static_cast<Eigen::Index>(b));
    s += w[static_cast<std::size_t>(k)] * d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

// Greedy matching under the diagonal weighted metric used by the genetic
// search. All weights 1 is Euclidean distance on the standardized features.
inline MatchedSample match_weighted(const dataset::DesignMatrix& design,
                                    const pscore::PropensityModel& model,
                                    const std::vector<double>& weights,
                                    const MatchOptions& opt = {}) {
  const detail::FeatureSpace fs = detail::build_features(design, model);
  if (weights.size() != static_cast<std::size_t>(fs.feat.rows()))
    throw validation_error("match_weighted: expected one weight per feature (" +
                           std::to_string(fs.feat.rows()) + ")");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw validation_error("match_weighted: weights must be non-negative finite");
  const Eigen::VectorXd& lo = model.log_odds;
  auto dist = [&](std::size_t a, std::size_t b) {
    return detail::weighted_distance(fs, weights, a, b);
  };
  auto gate = [&](std::size_t a, std::size_t b) {
    return std::fabs(lo(static_cast<Eigen::Index>(a)) - lo(static_cast<Eigen::Index>(b)));
  };
  MatchedSample out =
      detail::match_both_directions(design, lo, Method::genetic, opt, dist, gate);
  out.weights = weights;
  out.weight_names = fs.names;
  return out;
}

namespace detail {

// Balance objective: absolute post-match SMDs of the raw covariates over the
// treated->control pairs, compared lexicographically on the three largest.
using Fitness = std::array<double, 3>;

inline Fitness evaluate_balance(const dataset::DesignMatrix& design,
                                const MatchedSample& matched) {
  std::vector<std::size_t> focal, donor;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < design.ids.size(); ++i) index[design.ids[i]] = i;
  for (const auto& pr : matched.pairs) {
    if (pr.direction != Direction::treated_to_control) continue;
    focal.push_back(index.at(pr.focal_id));
    donor.push_back(index.at(pr.matched_id));
  }
  const double inf = std::numeric_limits<double>::infinity();
  if (focal.empty()) return {inf, inf, inf};
  std::vector<double> smds;
  std::vector<double> a(focal.size()), b(donor.size());
  for (Eigen::Index j = 1; j < design.cols(); ++j) {
    for (std::size_t i = 0; i < focal.size(); ++i) {
      a[i] = design.covariates(static_cast<Eigen::Index>(focal[i]), j);
      b[i] = design.covariates(static_cast<Eigen::Index>(donor[i]), j);
    }
    smds.push_back(std::fabs(stats::smd_two_sample(a, b)));
  }
  std::sort(smds.begin(), smds.end(), std::greater<>());
  Fitness f{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < std::min<std::size_t>(3, smds.size()); ++k) f[k] = smds[k];
  return f;
}

inline void normalize_mean_one(std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v;
  if (s <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0);
    return;
  }
  const double scale = static_cast<double>(w.size()) / s;
  for (double& v : w) v *= scale;
}

}  // namespace detail

// Genetic search over diagonal metric weights, Diamond-Sekhon style but with
// the max-|SMD| balance objective instead of the p-value loss. Deterministic
// for a fixed seed: every individual draws from its own derived RNG stream.
inline MatchedSample match_genetic(const dataset::DesignMatrix& design,
                                   const pscore::PropensityModel& model,
                                   const GeneticOptions& opt) {
  if (opt.population < 8) throw validation_error("match_genetic: population must be >= 8");
  if (opt.generations < 1) throw validation_error("match_genetic: generations must be >= 1");
  const detail::FeatureSpace fs = detail::build_features(design, model);
  const std::size_t dim = static_cast<std::size_t>(fs.feat.rows());
  const std::size_t pop_size = static_cast<std::size_t>(opt.population);

  std::vector<std::vector<double>> pop(pop_size, std::vector<double>(dim, 1.0));
  // individual 1 matches on log-odds alone, reproducing nearest-neighbour
  // matching; the genetic optimum can therefore never balance worse than NN
  std::fill(pop[1].begin(), pop[1].end(), 0.0);
  pop[1][dim - 1] = 1.0;
  detail::normalize_mean_one(pop[1]);
  for (std::size_t i = 2; i < pop_size; ++i) {
    auto eng = rng::make_engine(opt.seed, {0, i});
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (double& w : pop[i]) w = std::exp(gauss(eng));
    detail::normalize_mean_one(pop[i]);
  }

  std::vector<detail::Fitness> fit(pop_size);
  auto evaluate = [&](const std::vector<double>& w) {
    return detail::evaluate_balance(design, match_weighted(design, model, w, opt.policy));
  };
  for (std::size_t i = 0; i < pop_size; ++i) fit[i] = evaluate(pop[i]);

  auto best_index = [&]() {
    std::size_t b = 0;
    for (std::size_t i = 1; i < pop_size; ++i)
      if (fit[i] < fit[b]) b = i;
    return b;
  };
  const std::size_t b0 = best_index();
  std::vector<double> best_weights = pop[b0];
  detail::Fitness best_fit = fit[b0];

  for (int gen = 1; gen <= opt.generations; ++gen) {
    std::vector<std::vector<double>> next(pop_size);
    next[0] = pop[best_index()];  // elitism of one
    for (std::size_t i = 1; i < pop_size; ++i) {
      auto eng = rng::make_engine(opt.seed, {static_cast<std::uint64_t>(gen), i});
      std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
      auto tournament = [&]() {
        std::size_t winner = pick(eng);
        for (int t = 1; t < 3; ++t) {
          const std::size_t c = pick(eng);
          if (fit[c] < fit[winner]) winner = c;
        }
        return winner;
      };
      const auto& pa = pop[tournament()];
      const auto& pb = pop[tournament()];
      std::vector<double> child(dim);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::size_t k = 0; k < dim; ++k) {
        const double u = unif(eng);
        child[k] = u * pa[k] + (1.0 - u) * pb[k];       // blend crossover
        child[k] *= std::exp(0.25 * gauss(eng));        // log-normal mutation
      }
      detail::normalize_mean_one(child);
      next[i] = std::move(child);
    }
    pop = std::move(next);
    for (std::size_t i = 0; i < pop_size; ++i) fit[i] = evaluate(pop[i]);
    const std::size_t b = best_index();
    if (fit[b] < best_fit) {
      best_fit = fit[b];
      best_weights = pop[b];
    }
  }

  MatchedSample out = match_weighted(design, model, best_weights, opt.policy);
  return out;
}

inline void write_matched_csv(std::ostream& out, const MatchedSample& m) {
  out << "focal_id,matched_id,direction,distance,method\n";
  for (const auto& p : m.pairs)
    out << p.focal_id << ',' << p.matched_id << ',' << to_string(p.direction) << ','
        << csv::fmt(p.distance, 10) << ',' << to_string(m.method) << '\n';
}

inline void write_weights_csv(std::ostream& out, const MatchedSample& m) {
  out << "feature,weight\n";
  for (std::size_t k = 0; k < m.weights.size(); ++k)
    out << m.weight_names[k] << ',' << csv::fmt(m.weights[k], 10) << '\n';
}

}  // namespace frontier_match::matching
