#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frontier_match/balance.hpp"
#include "frontier_match/dataset.hpp"
#include "frontier_match/dea.hpp"
#include "frontier_match/effects.hpp"
#include "frontier_match/errors.hpp"
#include "frontier_match/ftest.hpp"
#include "frontier_match/matching.hpp"
#include "frontier_match/pscore.hpp"
#include "frontier_match/synth.hpp"
#include "frontier_match/version.hpp"

namespace frontier_match::pipeline {

enum class ReportFormat { csv, md, both };

inline const char* to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::md: return "md";
    case ReportFormat::both: return "both";
  }
  return "?";
}

struct RunConfig {
  std::string input_path;                      // dataset CSV, or
  std::optional<synth::ScenarioConfig> scenario;  // generate in-process
  std::vector<matching::Method> methods{matching::Method::nn};
  bool with_replacement = false;
  std::optional<double> caliper;
  int ga_population = 32;
  int ga_generations = 50;
  int replicates = 999;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  ReportFormat format = ReportFormat::both;
  double stratification_alpha = 0.01;

  void validate() const {
    if (input_path.empty() && !scenario)
      throw validation_error("config: either an input path or a scenario is required");
    if (!input_path.empty() && scenario)
      throw validation_error("config: input path and scenario are mutually exclusive");
    // every stochastic stage (bootstrap, genetic search, frontier-test splits)
    // sits downstream of the one top-level seed
    if (!seed) throw validation_error("config: a seed is required");
    if (replicates < 100) throw validation_error("config: replicates must be >= 100");
    if (ga_population < 8) throw validation_error("config: ga_population must be >= 8");
    if (ga_generations < 1) throw validation_error("config: ga_generations must be >= 1");
    if (caliper && !(*caliper > 0.0)) throw validation_error("config: caliper must be > 0");
    if (out_dir.empty()) throw validation_error("config: an output directory is required");
  }
};

struct ScoreSummaryRow {
  std::string label;
  std::size_t obs = 0;
  double mean = 0.0, sd = 0.0, min = 0.0, max = 0.0;
};

// Obs/Mean/SD/Min/Max per group plus a pooled row. Contract groups report in
// the order pooled, DBB, DB.
inline std::vector<ScoreSummaryRow> summarize_scores(const std::vector<double>& scores,
                                                     const std::vector<std::string>& groups) {
  if (scores.empty() || scores.size() != groups.size())
    throw validation_error("summarize_scores: empty or misaligned inputs");
  auto row = [](const std::string& label, const std::vector<double>& v) {
    ScoreSummaryRow r;
    r.label = label;
    r.obs = v.size();
    r.mean = stats::mean(v);
    r.sd = v.size() > 1 ? stats::stddev(v) : 0.0;
    r.min = *std::min_element(v.begin(), v.end());
    r.max = *std::max_element(v.begin(), v.end());
    return r;
  };
  std::vector<ScoreSummaryRow> out;
  out.push_back(row("pooled", scores));
  std::set<std::string> labels(groups.begin(), groups.end());
  std::vector<std::string> order(labels.begin(), labels.end());
  if (labels == std::set<std::string>{"DB", "DBB"}) order = {"DBB", "DB"};
  for (const auto& label : order) {
    std::vector<double> v;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (groups[i] == label) v.push_back(scores[i]);
    out.push_back(row(label, v));
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::string& section,
                              const std::vector<ScoreSummaryRow>& rows, bool header) {
  if (header) out << "sample,group,obs,mean,sd,min,max\n";
  for (const auto& r : rows)
    out << section << ',' << r.label << ',' << r.obs << ',' << csv::fmt_fixed(r.mean, 4)
        << ',' << csv::fmt_fixed(r.sd, 4) << ',' << csv::fmt_fixed(r.min, 4) << ','
        << csv::fmt_fixed(r.max, 4) << '\n';
}

inline void write_summary_markdown(std::ostream& out, const std::string& section,
                                   const std::vector<ScoreSummaryRow>& rows) {
  out << "\n**" << section << "**\n\n";
  out << "| group | obs | mean | sd | min | max |\n|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    out << "| " << r.label << " | " << r.obs << " | " << csv::fmt_fixed(r.mean, 4)
        << " | " << csv::fmt_fixed(r.sd, 4) << " | " << csv::fmt_fixed(r.min, 4) << " | "
        << csv::fmt_fixed(r.max, 4) << " |\n";
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json::object();
  j["input"] = c.input_path;
  if (c.scenario) j["scenario"] = *c.scenario;
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.push_back(matching::to_string(m));
  j["methods"] = methods;
  j["with_replacement"] = c.with_replacement;
  if (c.caliper) j["caliper"] = *c.caliper;
  j["ga_population"] = c.ga_population;
  j["ga_generations"] = c.ga_generations;
  j["replicates"] = c.replicates;
  if (c.seed) j["seed"] = *c.seed;
  j["out"] = c.out_dir;
  j["format"] = to_string(c.format);
  j["stratification_alpha"] = c.stratification_alpha;
}

inline matching::Method parse_method(const std::string& s) {
  if (s == "nn") return matching::Method::nn;
  if (s == "genetic") return matching::Method::genetic;
  throw validation_error("unknown matching method '" + s + "' (expected nn or genetic)");
}

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "md") return ReportFormat::md;
  if (s == "both") return ReportFormat::both;
  throw validation_error("unknown report format '" + s + "' (expected csv, md or both)");
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  c.input_path = j.value("input", std::string());
  if (j.contains("scenario")) c.scenario = j.at("scenario").get<synth::ScenarioConfig>();
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m));
  }
  c.with_replacement = j.value("with_replacement", false);
  if (j.contains("caliper")) c.caliper = j.at("caliper").get<double>();
  c.ga_population = j.value("ga_population", 32);
  c.ga_generations = j.value("ga_generations", 50);
  c.replicates = j.value("replicates", 999);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  c.out_dir = j.value("out", std::string());
  if (j.contains("format")) c.format = parse_format(j.at("format").get<std::string>());
  c.stratification_alpha = j.value("stratification_alpha", 0.01);
}

struct PipelineOutputs {
  std::vector<dataset::ContractRecord> records;
  dataset::DesignMatrix design;
  pscore::PropensityModel model;
  std::vector<matching::MatchedSample> matched;      // aligned with config.methods
  balance::BalanceReport balance_report;
  std::vector<dea::EfficiencyScore> full_common;
  std::vector<dea::EfficiencyScore> full_by_group;
  std::vector<std::vector<dea::EfficiencyScore>> matched_scores;  // per method
  std::vector<std::vector<std::string>> matched_groups;           // per method
  ftest::FrontierTestResult frontier_test;
  std::vector<effects::EffectEstimate> effect_rows;  // ATE,ATT per method
  std::vector<std::string> effect_methods;
  std::vector<std::size_t> n_treated_matched, n_control_matched;  // per method
};

namespace detail {

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const validation_error& e) {
    throw validation_error(std::string(stage) + ": " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(std::string(stage) + ": " + e.what());
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  out << content;
}

template <typename Writer>
std::string render(Writer&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

}  // namespace detail

// The full batch analysis, in the published order: match first, then estimate
// the frontier on the matched sample, then the treatment effects.
inline PipelineOutputs run_pipeline(const RunConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  const std::uint64_t seed = *config.seed;
  PipelineOutputs out;

  detail::with_stage("ingest", [&] {
    if (config.scenario) {
      out.records = synth::generate(*config.scenario);
    } else {
      std::ifstream in(config.input_path, std::ios::binary);
      if (!in) throw validation_error("cannot open '" + config.input_path + "'");
      out.records = dataset::parse_csv(in);
    }
  });

  detail::with_stage("pscore", [&] {
    out.design = dataset::build_design(out.records);
    out.model = pscore::fit_logit(out.design);
  });

  detail::with_stage("matching", [&] {
    for (std::size_t i = 0; i < config.methods.size(); ++i) {
      matching::MatchOptions policy{config.with_replacement, config.caliper};
      if (config.methods[i] == matching::Method::nn) {
        out.matched.push_back(matching::match_nn(out.design, out.model, policy));
      } else {
        matching::GeneticOptions ga;
        ga.population = config.ga_population;
        ga.generations = config.ga_generations;
        ga.seed = rng::derive_seed(seed, {100, i});
        ga.policy = policy;
        out.matched.push_back(matching::match_genetic(out.design, out.model, ga));
      }
    }
  });

  detail::with_stage("balance", [&] {
    std::vector<const matching::MatchedSample*> matched_ptrs;
    for (const auto& m : out.matched) matched_ptrs.push_back(&m);
    out.balance_report = balance::stratification_test(out.model, out.design,
                                                      config.stratification_alpha);
    out.balance_report.smds = balance::covariate_smds(out.design, matched_ptrs);
    for (auto m : config.methods)
      out.balance_report.method_names.push_back(matching::to_string(m));
  });

  detail::with_stage("dea", [&] {
    const auto common = effects::make_frontier_sample(out.records, dea::Scope::common);
    out.full_common = dea::score_all(common);
    const auto split = effects::make_frontier_sample(out.records, dea::Scope::by_group);
    out.full_by_group = dea::score_all(split);
    for (std::size_t i = 0; i < out.matched.size(); ++i) {
      std::set<std::string> ids;
      for (const auto& p : out.matched[i].pairs) {
        ids.insert(p.focal_id);
        ids.insert(p.matched_id);
      }
      std::vector<dataset::ContractRecord> matched_records;
      for (const auto& r : out.records)
        if (ids.count(r.contract_id)) matched_records.push_back(r);
      if (matched_records.empty()) throw numeric_error("matched sample is empty");
      const auto sample = effects::make_frontier_sample(matched_records, dea::Scope::common);
      out.matched_scores.push_back(dea::score_all(sample));
      std::vector<std::string> groups;
      for (const auto& r : matched_records)
        groups.push_back(dataset::to_string(r.group));
      out.matched_groups.push_back(std::move(groups));
    }
  });

  detail::with_stage("ftest", [&] {
    const auto full = effects::make_frontier_sample(out.records, dea::Scope::common);
    std::vector<int> labels;
    for (const auto& r : out.records)
      labels.push_back(r.group == dataset::Group::db ? 1 : 0);
    out.frontier_test = ftest::group_mean_test(full, labels, rng::derive_seed(seed, {300}));
  });

  detail::with_stage("effects", [&] {
    for (std::size_t i = 0; i < config.methods.size(); ++i) {
      effects::PipelineConfig pc;
      pc.method = config.methods[i];
      pc.match_options = matching::MatchOptions{config.with_replacement, config.caliper};
      pc.ga_population = config.ga_population;
      pc.ga_generations = config.ga_generations;
      pc.ga_seed = rng::derive_seed(seed, {100, i});
      std::size_t n_t = 0, n_c = 0;
      for (const auto& p : out.matched[i].pairs)
        if (p.direction == matching::Direction::treated_to_control) ++n_t;
      std::set<std::string> controls;
      for (const auto& p : out.matched[i].pairs)
        if (p.direction == matching::Direction::treated_to_control)
          controls.insert(p.matched_id);
      n_c = controls.size();
      out.n_treated_matched.push_back(n_t);
      out.n_control_matched.push_back(n_c);
      for (auto estimand : {effects::Estimand::ate, effects::Estimand::att}) {
        const std::uint64_t b_seed =
            rng::derive_seed(seed, {400, i, estimand == effects::Estimand::ate ? 0u : 1u});
        out.effect_rows.push_back(effects::bootstrap(estimand, out.records, pc,
                                                     config.replicates, b_seed));
        out.effect_methods.push_back(matching::to_string(config.methods[i]));
      }
    }
  });

  detail::with_stage("report", [&] {
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    const bool want_csv = config.format != ReportFormat::md;
    const bool want_md = config.format != ReportFormat::csv;

    nlohmann::json manifest;
    manifest["tool"] = "frontier_match";
    manifest["version"] = k_version;
    manifest["seed"] = seed;
    manifest["config"] = config;
    manifest["n_records"] = out.records.size();
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    if (want_csv)
      detail::write_file(dir / "model.csv", detail::render([&](std::ostream& os) {
                           pscore::write_model_csv(os, out.model);
                         }));
    if (want_md)
      detail::write_file(dir / "model.md", detail::render([&](std::ostream& os) {
                           pscore::write_model_markdown(os, out.model);
                         }));

    for (std::size_t i = 0; i < out.matched.size(); ++i) {
      const std::string name = matching::to_string(config.methods[i]);
      if (want_csv)
        detail::write_file(dir / ("matched_" + name + ".csv"),
                           detail::render([&](std::ostream& os) {
                             matching::write_matched_csv(os, out.matched[i]);
                           }));
      if (config.methods[i] == matching::Method::genetic && want_csv)
        detail::write_file(dir / "weights_genetic.csv", detail::render([&](std::ostream& os) {
                             matching::write_weights_csv(os, out.matched[i]);
                           }));
    }

    if (want_csv) {
      detail::write_file(dir / "balance.csv", detail::render([&](std::ostream& os) {
                           balance::write_smd_csv(os, out.balance_report);
                         }));
      detail::write_file(dir / "stratification.csv", detail::render([&](std::ostream& os) {
                           balance::write_stratification_csv(os, out.balance_report);
                         }));
    }
    if (want_md)
      detail::write_file(dir / "balance.md", detail::render([&](std::ostream& os) {
                           balance::write_balance_markdown(os, out.balance_report);
                         }));

    // density exports are the plotting-ready "figures"
    if (want_csv) {
      for (const char* label : {"DB", "DBB"}) {
        std::vector<double> v;
        for (std::size_t i = 0; i < out.records.size(); ++i)
          if (std::string(dataset::to_string(out.records[i].group)) == label)
            v.push_back(out.model.scores(static_cast<Eigen::Index>(i)));
        const auto est = balance::kernel_density(v, 0.0, 1.0);
        detail::write_file(dir / ("density_propensity_" + std::string(label) + ".csv"),
                           detail::render([&](std::ostream& os) {
                             balance::write_density_csv(os, est);
                           }));
      }
      for (std::size_t i = 0; i < out.matched_scores.size(); ++i) {
        const std::string name = matching::to_string(config.methods[i]);
        for (const char* label : {"DB", "DBB"}) {
          std::vector<double> v;
          for (std::size_t k = 0; k < out.matched_scores[i].size(); ++k)
            if (out.matched_groups[i][k] == label)
              v.push_back(out.matched_scores[i][k].score);
          if (v.size() < 2) continue;
          const auto est = balance::kernel_density(v, 0.0, 1.0);
          detail::write_file(
              dir / ("density_efficiency_" + name + "_" + std::string(label) + ".csv"),
              detail::render([&](std::ostream& os) { balance::write_density_csv(os, est); }));
        }
      }
    }

    if (want_csv) {
      const auto common = effects::make_frontier_sample(out.records, dea::Scope::common);
      detail::write_file(dir / "scores_full_common.csv", detail::render([&](std::ostream& os) {
                           dea::write_scores_csv(os, out.full_common, common);
                         }));
      const auto split = effects::make_frontier_sample(out.records, dea::Scope::by_group);
      detail::write_file(dir / "scores_full_by_group.csv",
                         detail::render([&](std::ostream& os) {
                           dea::write_scores_csv(os, out.full_by_group, split);
                         }));
      for (std::size_t i = 0; i < out.matched_scores.size(); ++i) {
        const std::string name = matching::to_string(config.methods[i]);
        dea::FrontierSample pseudo;  // only scope/group metadata feed the writer
        pseudo.scope = dea::Scope::common;
        detail::write_file(dir / ("scores_matched_" + name + ".csv"),
                           detail::render([&](std::ostream& os) {
                             dea::write_scores_csv(os, out.matched_scores[i], pseudo);
                           }));
      }
    }

    // Table-1 style summaries
    auto groups_of = [&](const std::vector<dataset::ContractRecord>& recs) {
      std::vector<std::string> g;
      for (const auto& r : recs) g.push_back(dataset::to_string(r.group));
      return g;
    };
    auto values_of = [](const std::vector<dea::EfficiencyScore>& s) {
      std::vector<double> v;
      for (const auto& e : s) v.push_back(e.score);
      return v;
    };
    std::vector<std::pair<std::string, std::vector<ScoreSummaryRow>>> sections;
    sections.emplace_back("full_common",
                          summarize_scores(values_of(out.full_common), groups_of(out.records)));
    sections.emplace_back("full_by_group", summarize_scores(values_of(out.full_by_group),
                                                            groups_of(out.records)));
    for (std::size_t i = 0; i < out.matched_scores.size(); ++i)
      sections.emplace_back(
          std::string("matched_") + matching::to_string(config.methods[i]),
          summarize_scores(values_of(out.matched_scores[i]), out.matched_groups[i]));
    if (want_csv)
      detail::write_file(dir / "summary.csv", detail::render([&](std::ostream& os) {
                           for (std::size_t s = 0; s < sections.size(); ++s)
                             write_summary_csv(os, sections[s].first, sections[s].second,
                                               s == 0);
                         }));
    if (want_md)
      detail::write_file(dir / "summary.md", detail::render([&](std::ostream& os) {
                           os << "# Efficiency score summaries\n";
                           for (const auto& [name, rows] : sections)
                             write_summary_markdown(os, name, rows);
                         }));

    detail::write_file(dir / "ftest.txt", ftest::format_report(out.frontier_test) + "\n");

    if (want_csv)
      detail::write_file(dir / "effects.csv", detail::render([&](std::ostream& os) {
                           std::size_t row = 0;
                           os << "estimand,method,point,bootstrap_se,ci_low,ci_high,"
                                 "replicates,failed,n_treated,n_controls,seed\n";
                           for (std::size_t i = 0; i < config.methods.size(); ++i)
                             for (int e = 0; e < 2; ++e, ++row) {
                               const auto& est = out.effect_rows[row];
                               os << to_string(est.estimand) << ','
                                  << out.effect_methods[row] << ','
                                  << csv::fmt(est.point, 10) << ','
                                  << csv::fmt(est.bootstrap_se, 10) << ','
                                  << csv::fmt(est.ci_low, 10) << ','
                                  << csv::fmt(est.ci_high, 10) << ','
                                  << est.replicates << ',' << est.failed << ','
                                  << out.n_treated_matched[i] << ','
                                  << out.n_control_matched[i] << ',' << est.seed << '\n';
                             }
                         }));
    if (want_md)
      detail::write_file(dir / "effects.md", detail::render([&](std::ostream& os) {
                           os << "# Average treatment effects (outcome: DEA CRS score)\n\n";
                           os << "| estimand |";
                           for (std::size_t i = 0; i < config.methods.size(); ++i)
                             os << ' ' << matching::to_string(config.methods[i]) << " |";
                           os << "\n|---|";
                           for (std::size_t i = 0; i < config.methods.size(); ++i) os << "---|";
                           os << '\n';
                           for (int e = 0; e < 2; ++e) {
                             os << "| " << (e == 0 ? "ATE" : "ATT") << " |";
                             for (std::size_t i = 0; i < config.methods.size(); ++i) {
                               const auto& est = out.effect_rows[2 * i + static_cast<std::size_t>(e)];
                               os << ' ' << csv::fmt_fixed(est.point, 4) << " ("
                                  << csv::fmt_fixed(est.bootstrap_se, 4) << ") |";
                             }
                             os << '\n';
                           }
                           os << "| n. treated |";
                           for (std::size_t i = 0; i < config.methods.size(); ++i)
                             os << ' ' << out.n_treated_matched[i] << " |";
                           os << "\n| n. controls |";
                           for (std::size_t i = 0; i < config.methods.size(); ++i)
                             os << ' ' << out.n_control_matched[i] << " |";
                           os << "\nBootstrap percentile standard errors in parentheses.\n";
                         }));
  });

  return out;
}

}  // namespace frontier_match::pipeline
