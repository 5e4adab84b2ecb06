#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/dea.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/matching.hpp"
#include "frontier_match/pscore.hpp"
#include "frontier_match/rng.hpp"
#include "frontier_match/stats.hpp"

namespace frontier_match::effects {

enum class Estimand { ate, att };

inline const char* to_string(Estimand e) { return e == Estimand::ate ? "ATE" : "ATT"; }

struct EffectEstimate {
  Estimand estimand = Estimand::ate;
  double point = 0.0;
  double bootstrap_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int replicates = 0;   // successful replicates
  int failed = 0;       // discarded replicates
  std::uint64_t seed = 0;
};

using OutcomeMap = std::map<std::string, double>;

namespace detail {

inline double outcome_of(const OutcomeMap& outcomes, const std::string& id) {
  const auto it = outcomes.find(id);
  if (it == outcomes.end())
    throw validation_error("missing outcome for unit '" + id + "'");
  return it->second;
}

}  // namespace detail

// Mean outcome gap over treated units and their matched controls; only the
// treated->control pairs are read.
inline double att(const matching::MatchedSample& matched, const OutcomeMap& outcomes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : matched.pairs) {
    if (p.direction != matching::Direction::treated_to_control) continue;
    sum += detail::outcome_of(outcomes, p.focal_id) -
           detail::outcome_of(outcomes, p.matched_id);
    ++n;
  }
  if (n == 0) throw numeric_error("att: no treated_to_control pairs");
  return sum / static_cast<double>(n);
}

// Every matched unit contributes (outcome under treatment - outcome under
// control), the observed value filling its own arm and the matched unit's
// value filling the other. Requires both match directions.
inline double ate(const matching::MatchedSample& matched, const OutcomeMap& outcomes) {
  double sum = 0.0;
  std::size_t n = 0;
  bool saw_t2c = false, saw_c2t = false;
  for (const auto& p : matched.pairs) {
    const double yf = detail::outcome_of(outcomes, p.focal_id);
    const double ym = detail::outcome_of(outcomes, p.matched_id);
    if (p.direction == matching::Direction::treated_to_control) {
      saw_t2c = true;
      sum += yf - ym;
    } else {
      saw_c2t = true;
      sum += ym - yf;
    }
    ++n;
  }
  if (!saw_t2c || !saw_c2t)
    throw numeric_error("ate: both match directions are required");
  return sum / static_cast<double>(n);
}

// Configuration of one matched-DEA pass, shared by the CLI and the bootstrap.
struct PipelineConfig {
  matching::Method method = matching::Method::nn;
  matching::MatchOptions match_options;
  int ga_population = 32;
  int ga_generations = 50;
  std::uint64_t ga_seed = 0;
};

struct PipelineResult {
  pscore::PropensityModel model;
  matching::MatchedSample matched;
  dea::FrontierSample matched_sample;        // pooled matched units, common scope
  std::vector<dea::EfficiencyScore> scores;  // aligned with matched_sample.units
  OutcomeMap outcomes;                       // unit id -> efficiency score
};

// Frontier sample over a set of records: inputs are the achieved cost/time,
// outputs the contracted targets.
inline dea::FrontierSample make_frontier_sample(
    const std::vector<dataset::ContractRecord>& records, dea::Scope scope) {
  dea::FrontierSample s;
  s.n_inputs = 2;
  s.n_outputs = 2;
  s.scope = scope;
  s.units.reserve(records.size());
  for (const auto& r : records) {
    s.units.push_back({r.contract_id,
                       {r.actual_cost, r.actual_time},
                       {r.agreed_cost, r.planned_time}});
    if (scope == dea::Scope::by_group) s.groups.push_back(dataset::to_string(r.group));
  }
  return s;
}

// Match first, then score the pooled matched units against a common frontier.
// The matched set is every unit appearing in a pair, in either role.
inline PipelineResult run_matched_dea(const std::vector<dataset::ContractRecord>& records,
                                      const PipelineConfig& config) {
  PipelineResult out;
  const dataset::DesignMatrix design = dataset::build_design(records);
  out.model = pscore::fit_logit(design);
  if (config.method == matching::Method::nn) {
    out.matched = matching::match_nn(design, out.model, config.match_options);
  } else {
    matching::GeneticOptions ga;
    ga.population = config.ga_population;
    ga.generations = config.ga_generations;
    ga.seed = config.ga_seed;
    ga.policy = config.match_options;
    out.matched = matching::match_genetic(design, out.model, ga);
  }

  std::set<std::string> matched_ids;
  for (const auto& p : out.matched.pairs) {
    matched_ids.insert(p.focal_id);
    matched_ids.insert(p.matched_id);
  }
  std::vector<dataset::ContractRecord> matched_records;
  matched_records.reserve(matched_ids.size());
  for (const auto& r : records)
    if (matched_ids.count(r.contract_id)) matched_records.push_back(r);
  if (matched_records.empty())
    throw numeric_error("matched sample is empty; nothing to score");

  out.matched_sample = make_frontier_sample(matched_records, dea::Scope::common);
  out.scores = dea::score_all(out.matched_sample);
  for (const auto& s : out.scores) out.outcomes[s.unit_id] = s.score;
  return out;
}

inline double point_estimate(Estimand estimand, const PipelineResult& r) {
  return estimand == Estimand::att ? att(r.matched, r.outcomes) : ate(r.matched, r.outcomes);
}

namespace detail {

// Group-stratified resample with replacement; duplicated draws get a suffix
// so contract ids stay unique within the replicate.
inline std::vector<dataset::ContractRecord> resample(
    const std::vector<dataset::ContractRecord>& records, std::mt19937_64& eng) {
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < records.size(); ++i)
    (records[i].group == dataset::Group::db ? treated : control).push_back(i);
  std::vector<dataset::ContractRecord> out;
  out.reserve(records.size());
  std::unordered_map<std::string, int> seen;
  auto draw_from = [&](const std::vector<std::size_t>& pool) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = 0; k < pool.size(); ++k) {
      dataset::ContractRecord r = records[pool[pick(eng)]];
      const int count = ++seen[r.contract_id];
      if (count > 1) r.contract_id += "~" + std::to_string(count);
      out.push_back(std::move(r));
    }
  };
  draw_from(treated);
  draw_from(control);
  return out;
}

}  // namespace detail

// Full-pipeline bootstrap: each replicate redraws records within group, then
// refits the propensity model, rematches and rescores before computing the
// effect, so the variability of the estimated frontier is propagated.
// Replicates that fail numerically (e.g. separation) are discarded.
inline EffectEstimate bootstrap(Estimand estimand,
                                const std::vector<dataset::ContractRecord>& records,
                                const PipelineConfig& config, int replicates,
                                std::uint64_t seed) {
  if (replicates < 100)
    throw validation_error("bootstrap: at least 100 replicates are required");

  EffectEstimate est;
  est.estimand = estimand;
  est.seed = seed;
  est.point = point_estimate(estimand, run_matched_dea(records, config));

  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(replicates));
  int failed = 0;
  for (int b = 0; b < replicates; ++b) {
    auto eng = rng::make_engine(seed, {static_cast<std::uint64_t>(b)});
    const auto sample = detail::resample(records, eng);
    try {
      PipelineConfig rep_config = config;
      rep_config.ga_seed = rng::derive_seed(seed, {static_cast<std::uint64_t>(b), 1});
      draws.push_back(point_estimate(estimand, run_matched_dea(sample, rep_config)));
    } catch (const numeric_error&) {
      ++failed;
    }
  }
  if (failed * 10 > replicates)
    throw numeric_error("bootstrap: more than 10% of replicates failed (" +
                        std::to_string(failed) + "/" + std::to_string(replicates) + ")");

  est.replicates = static_cast<int>(draws.size());
  est.failed = failed;
  est.bootstrap_se = draws.size() > 1 ? stats::stddev(draws) : 0.0;
  est.ci_low = stats::quantile(draws, 0.025);
  est.ci_high = stats::quantile(draws, 0.975);
  return est;
}

inline void write_effects_csv(std::ostream& out, const std::vector<EffectEstimate>& ests,
                              const std::vector<std::string>& methods,
                              std::size_t n_treated, std::size_t n_controls) {
  out << "estimand,method,point,bootstrap_se,ci_low,ci_high,replicates,failed,"
         "n_treated,n_controls,seed\n";
  for (std::size_t i = 0; i < ests.size(); ++i) {
    const auto& e = ests[i];
    out << to_string(e.estimand) << ',' << methods[i] << ',' << csv::fmt(e.point, 10)
        << ',' << csv::fmt(e.bootstrap_se, 10) << ',' << csv::fmt(e.ci_low, 10) << ','
        << csv::fmt(e.ci_high, 10) << ',' << e.replicates << ',' << e.failed << ','
        << n_treated << ',' << n_controls << ',' << e.seed << '\n';
  }
}

}  // namespace frontier_match::effects
