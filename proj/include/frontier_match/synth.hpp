#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "frontier_match/dataset.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/rng.hpp"

namespace frontier_match::synth {

// Synthetic population with covariate-dependent selection into DB and a
// planted treatment effect on the execution overruns. Covariate shapes follow
// the descriptive statistics of small Italian public-works contracts.
struct ScenarioConfig {
  int n = 1000;
  // aligned with the design columns: constant, reserve_price, new_build,
  // negotiation, province, region, public_company, autonomous, central_gov
  std::array<double, 9> selection_coefficients{};
  double planted_effect = 0.0;      // subtracted from treated log-overruns
  double overrun_noise_mean = 0.15; // location of the base log-overrun draw
  double overrun_noise_sd = 0.18;
  double reserve_price_min = 40.0;
  double reserve_price_max = 200.0;
  double p_new_build = 0.39;
  double p_negotiation = 0.45;
  // municipality, province, region, public_company, autonomous, central
  std::array<double, 6> authority_probs{0.50, 0.12, 0.10, 0.11, 0.03, 0.13};
  double rebate_min = 0.05;
  double rebate_max = 0.30;
  double planned_time_mean = 103.0;  // log-normal mean in days
  double planned_time_log_sd = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 50) throw validation_error("scenario: n must be >= 50");
    for (double p : {p_new_build, p_negotiation})
      if (p < 0.0 || p > 1.0) throw validation_error("scenario: probabilities must be in [0,1]");
    double s = 0.0;
    for (double p : authority_probs) {
      if (p < 0.0) throw validation_error("scenario: authority probabilities must be >= 0");
      s += p;
    }
    if (s <= 0.0) throw validation_error("scenario: authority probabilities sum to zero");
    if (!(reserve_price_min > 0.0 && reserve_price_max > reserve_price_min))
      throw validation_error("scenario: bad reserve price range");
    if (!(rebate_min >= 0.0 && rebate_max < 1.0 && rebate_max > rebate_min))
      throw validation_error("scenario: bad rebate range");
    if (!(overrun_noise_sd > 0.0)) throw validation_error("scenario: overrun_noise_sd must be > 0");
    if (!(planned_time_mean > 0.0 && planned_time_log_sd > 0.0))
      throw validation_error("scenario: bad planned time parameters");
  }
};

// Each record draws from its own derived RNG stream, so generation order and
// any future parallel split cannot change the population.
inline std::vector<dataset::ContractRecord> generate(const ScenarioConfig& config) {
  config.validate();
  std::vector<dataset::ContractRecord> records;
  records.reserve(static_cast<std::size_t>(config.n));
  double auth_total = 0.0;
  for (double p : config.authority_probs) auth_total += p;
  const double mu_pt =
      std::log(config.planned_time_mean) - 0.5 * config.planned_time_log_sd * config.planned_time_log_sd;

  for (int i = 0; i < config.n; ++i) {
    auto eng = rng::make_engine(config.seed, {static_cast<std::uint64_t>(i)});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    dataset::ContractRecord r;
    char id[16];
    std::snprintf(id, sizeof(id), "S%06d", i);
    r.contract_id = id;
    r.reserve_price = config.reserve_price_min +
                      unif(eng) * (config.reserve_price_max - config.reserve_price_min);
    r.new_build = unif(eng) < config.p_new_build;
    r.negotiation = unif(eng) < config.p_negotiation;
    const double au = unif(eng) * auth_total;
    double acc = 0.0;
    r.authority = dataset::Authority::central;
    for (std::size_t a = 0; a < config.authority_probs.size(); ++a) {
      acc += config.authority_probs[a];
      if (au < acc) {
        r.authority = static_cast<dataset::Authority>(a);
        break;
      }
    }

    const auto& beta = config.selection_coefficients;
    double eta = beta[0] + beta[1] * r.reserve_price + beta[2] * (r.new_build ? 1 : 0) +
                 beta[3] * (r.negotiation ? 1 : 0);
    switch (r.authority) {
      case dataset::Authority::municipality: break;
      case dataset::Authority::province: eta += beta[4]; break;
      case dataset::Authority::region: eta += beta[5]; break;
      case dataset::Authority::public_company: eta += beta[6]; break;
      case dataset::Authority::autonomous: eta += beta[7]; break;
      case dataset::Authority::central: eta += beta[8]; break;
    }
    const double p_treat = 1.0 / (1.0 + std::exp(-eta));
    r.group = unif(eng) < p_treat ? dataset::Group::db : dataset::Group::dbb;
    const double treated = r.group == dataset::Group::db ? 1.0 : 0.0;

    const double rebate = config.rebate_min + unif(eng) * (config.rebate_max - config.rebate_min);
    r.agreed_cost = r.reserve_price * (1.0 - rebate);
    r.planned_time = std::exp(mu_pt + config.planned_time_log_sd * gauss(eng));

    // overruns are clamped non-negative: renegotiation raises cost and time,
    // so actual >= agreed always holds
    const double over_cost = std::max(
        0.0, config.overrun_noise_mean + config.overrun_noise_sd * gauss(eng) -
                 config.planted_effect * treated);
    const double over_time = std::max(
        0.0, config.overrun_noise_mean + config.overrun_noise_sd * gauss(eng) -
                 config.planted_effect * treated);
    r.actual_cost = r.agreed_cost * std::exp(over_cost);
    r.actual_time = r.planned_time * std::exp(over_time);
    r.award_year = 2008 + static_cast<int>(unif(eng) * 7.0);

    records.push_back(std::move(r));
  }
  return records;
}

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"n", c.n},
                     {"selection_coefficients", c.selection_coefficients},
                     {"planted_effect", c.planted_effect},
                     {"overrun_noise_mean", c.overrun_noise_mean},
                     {"overrun_noise_sd", c.overrun_noise_sd},
                     {"reserve_price_min", c.reserve_price_min},
                     {"reserve_price_max", c.reserve_price_max},
                     {"p_new_build", c.p_new_build},
                     {"p_negotiation", c.p_negotiation},
                     {"authority_probs", c.authority_probs},
                     {"rebate_min", c.rebate_min},
                     {"rebate_max", c.rebate_max},
                     {"planned_time_mean", c.planned_time_mean},
                     {"planned_time_log_sd", c.planned_time_log_sd},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  ScenarioConfig defaults;
  c = defaults;
  c.n = j.value("n", defaults.n);
  if (j.contains("selection_coefficients"))
    j.at("selection_coefficients").get_to(c.selection_coefficients);
  c.planted_effect = j.value("planted_effect", defaults.planted_effect);
  c.overrun_noise_mean = j.value("overrun_noise_mean", defaults.overrun_noise_mean);
  c.overrun_noise_sd = j.value("overrun_noise_sd", defaults.overrun_noise_sd);
  c.reserve_price_min = j.value("reserve_price_min", defaults.reserve_price_min);
  c.reserve_price_max = j.value("reserve_price_max", defaults.reserve_price_max);
  c.p_new_build = j.value("p_new_build", defaults.p_new_build);
  c.p_negotiation = j.value("p_negotiation", defaults.p_negotiation);
  if (j.contains("authority_probs")) j.at("authority_probs").get_to(c.authority_probs);
  c.rebate_min = j.value("rebate_min", defaults.rebate_min);
  c.rebate_max = j.value("rebate_max", defaults.rebate_max);
  c.planned_time_mean = j.value("planned_time_mean", defaults.planned_time_mean);
  c.planned_time_log_sd = j.value("planned_time_log_sd", defaults.planned_time_log_sd);
  c.seed = j.value("seed", defaults.seed);
}

}  // namespace frontier_match::synth
