// frontier_match: batch evaluation of contract-design treatment effects by
// propensity-score matching plus DEA efficiency scoring.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frontier_match/frontier_match.hpp"

namespace fm = frontier_match;
namespace fs = std::filesystem;

namespace {

struct CliState {
  std::string config_path;
  std::string input;
  std::string scenario_path;
  std::vector<std::string> methods;
  int replicates = 999;
  std::optional<std::uint64_t> seed;
  std::optional<double> caliper;
  bool with_replacement = false;
  std::string out;
  std::string format = "both";
  int ga_population = 32;
  int ga_generations = 50;
};

void add_common_options(CLI::App* cmd, CliState& s, bool with_methods = true) {
  cmd->add_option("--config", s.config_path, "JSON run configuration (flags override)")
      ->envname("FRONTIER_MATCH_CONFIG");
  cmd->add_option("--input", s.input, "dataset CSV")->envname("FRONTIER_MATCH_INPUT");
  cmd->add_option("--scenario", s.scenario_path, "scenario JSON for synthetic input")
      ->envname("FRONTIER_MATCH_SCENARIO");
  if (with_methods)
    cmd->add_option("--method", s.methods, "matching method, repeatable (nn|genetic)");
  cmd->add_option("--replicates", s.replicates, "bootstrap replicates")
      ->envname("FRONTIER_MATCH_REPLICATES");
  cmd->add_option("--seed", s.seed, "top-level RNG seed")->envname("FRONTIER_MATCH_SEED");
  cmd->add_option("--caliper", s.caliper, "caliper in sd(log-odds) units")
      ->envname("FRONTIER_MATCH_CALIPER");
  cmd->add_flag("--with-replacement", s.with_replacement, "match with replacement");
  cmd->add_option("--out", s.out, "output directory")->envname("FRONTIER_MATCH_OUT");
  cmd->add_option("--format", s.format, "report format (csv|md|both)")
      ->envname("FRONTIER_MATCH_FORMAT");
  cmd->add_option("--ga-population", s.ga_population, "genetic search population size");
  cmd->add_option("--ga-generations", s.ga_generations, "genetic search generations");
}

fm::pipeline::RunConfig build_config(const CliState& s) {
  fm::pipeline::RunConfig config;
  if (!s.config_path.empty()) {
    std::ifstream in(s.config_path);
    if (!in) throw fm::validation_error("cannot open config '" + s.config_path + "'");
    nlohmann::json j;
    in >> j;
    config = j.get<fm::pipeline::RunConfig>();
  }
  if (!s.input.empty()) config.input_path = s.input;
  if (!s.scenario_path.empty()) {
    std::ifstream in(s.scenario_path);
    if (!in) throw fm::validation_error("cannot open scenario '" + s.scenario_path + "'");
    nlohmann::json j;
    in >> j;
    config.scenario = j.get<fm::synth::ScenarioConfig>();
  }
  if (!s.methods.empty()) {
    config.methods.clear();
    for (const auto& m : s.methods) config.methods.push_back(fm::pipeline::parse_method(m));
  }
  config.replicates = s.replicates;
  if (s.seed) config.seed = s.seed;
  if (s.caliper) config.caliper = s.caliper;
  if (s.with_replacement) config.with_replacement = true;
  if (!s.out.empty()) config.out_dir = s.out;
  config.format = fm::pipeline::parse_format(s.format);
  config.ga_population = s.ga_population;
  config.ga_generations = s.ga_generations;
  return config;
}

std::vector<fm::dataset::ContractRecord> load_records(const fm::pipeline::RunConfig& config) {
  if (config.scenario) return fm::synth::generate(*config.scenario);
  if (config.input_path.empty())
    throw fm::validation_error("an --input CSV or --scenario is required");
  std::ifstream in(config.input_path, std::ios::binary);
  if (!in) throw fm::validation_error("cannot open '" + config.input_path + "'");
  return fm::dataset::parse_csv(in);
}

void ensure_out_dir(const fm::pipeline::RunConfig& config) {
  if (config.out_dir.empty()) throw fm::validation_error("--out directory is required");
  fs::create_directories(config.out_dir);
}

void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw fm::validation_error("cannot write '" + p.string() + "'");
  out << content;
}

std::uint64_t require_seed(const fm::pipeline::RunConfig& config) {
  if (!config.seed) throw fm::validation_error("--seed is required for this command");
  return *config.seed;
}

int cmd_validate(const CliState& s) {
  const auto config = build_config(s);
  const auto records = load_records(config);
  std::size_t treated = 0;
  for (const auto& r : records)
    if (r.group == fm::dataset::Group::db) ++treated;
  std::cout << "ok: " << records.size() << " records (" << treated << " DB, "
            << records.size() - treated << " DBB)\n";
  return 0;
}

int cmd_simulate(const CliState& s) {
  auto config = build_config(s);
  if (!config.scenario) throw fm::validation_error("simulate: --scenario is required");
  if (s.seed) config.scenario->seed = *s.seed;
  if (config.out_dir.empty()) throw fm::validation_error("simulate: --out file is required");
  const auto records = fm::synth::generate(*config.scenario);
  std::ostringstream os;
  fm::dataset::write_csv(os, records);
  fs::path out_path(config.out_dir);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_text(out_path, os.str());
  std::cout << "wrote " << records.size() << " records to " << config.out_dir << "\n";
  return 0;
}

int cmd_pscore(const CliState& s) {
  const auto config = build_config(s);
  ensure_out_dir(config);
  const auto records = load_records(config);
  const auto design = fm::dataset::build_design(records);
  const auto model = fm::pscore::fit_logit(design);
  std::ostringstream c, m;
  fm::pscore::write_model_csv(c, model);
  fm::pscore::write_model_markdown(m, model);
  if (config.format != fm::pipeline::ReportFormat::md)
    write_text(fs::path(config.out_dir) / "model.csv", c.str());
  if (config.format != fm::pipeline::ReportFormat::csv)
    write_text(fs::path(config.out_dir) / "model.md", m.str());
  std::cout << "fitted logit: log-likelihood " << fm::csv::fmt(model.log_likelihood)
            << (model.converged ? ", converged" : ", NOT converged") << "\n";
  return 0;
}

std::vector<fm::matching::MatchedSample> run_matching(
    const fm::pipeline::RunConfig& config, const fm::dataset::DesignMatrix& design,
    const fm::pscore::PropensityModel& model) {
  std::vector<fm::matching::MatchedSample> out;
  fm::matching::MatchOptions policy{config.with_replacement, config.caliper};
  for (std::size_t i = 0; i < config.methods.size(); ++i) {
    if (config.methods[i] == fm::matching::Method::nn) {
      out.push_back(fm::matching::match_nn(design, model, policy));
    } else {
      fm::matching::GeneticOptions ga;
      ga.population = config.ga_population;
      ga.generations = config.ga_generations;
      ga.seed = fm::rng::derive_seed(require_seed(config), {100, i});
      ga.policy = policy;
      out.push_back(fm::matching::match_genetic(design, model, ga));
    }
  }
  return out;
}

int cmd_match(const CliState& s) {
  const auto config = build_config(s);
  ensure_out_dir(config);
  const auto records = load_records(config);
  const auto design = fm::dataset::build_design(records);
  const auto model = fm::pscore::fit_logit(design);
  const auto matched = run_matching(config, design, model);
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const std::string name = fm::matching::to_string(config.methods[i]);
    std::ostringstream os;
    fm::matching::write_matched_csv(os, matched[i]);
    write_text(fs::path(config.out_dir) / ("matched_" + name + ".csv"), os.str());
    if (config.methods[i] == fm::matching::Method::genetic) {
      std::ostringstream ws;
      fm::matching::write_weights_csv(ws, matched[i]);
      write_text(fs::path(config.out_dir) / "weights_genetic.csv", ws.str());
    }
    std::cout << name << ": " << matched[i].pairs.size() << " pairs, "
              << matched[i].unmatched_ids.size() << " unmatched\n";
  }
  return 0;
}

int cmd_score(const CliState& s, const std::string& scope) {
  const auto config = build_config(s);
  ensure_out_dir(config);
  const auto records = load_records(config);
  auto emit = [&](fm::dea::Scope sc, const std::string& name) {
    const auto sample = fm::effects::make_frontier_sample(records, sc);
    const auto scores = fm::dea::score_all(sample);
    std::ostringstream os;
    fm::dea::write_scores_csv(os, scores, sample);
    write_text(fs::path(config.out_dir) / ("scores_full_" + name + ".csv"), os.str());
    std::cout << name << ": scored " << scores.size() << " units\n";
  };
  if (scope == "common" || scope == "both") emit(fm::dea::Scope::common, "common");
  if (scope == "by_group" || scope == "both") emit(fm::dea::Scope::by_group, "by_group");
  return 0;
}

int cmd_balance(const CliState& s) {
  const auto config = build_config(s);
  ensure_out_dir(config);
  const auto records = load_records(config);
  const auto design = fm::dataset::build_design(records);
  const auto model = fm::pscore::fit_logit(design);
  const auto matched = run_matching(config, design, model);
  std::vector<const fm::matching::MatchedSample*> ptrs;
  for (const auto& m : matched) ptrs.push_back(&m);
  auto report = fm::balance::stratification_test(model, design, config.stratification_alpha);
  report.smds = fm::balance::covariate_smds(design, ptrs);
  for (auto m : config.methods) report.method_names.push_back(fm::matching::to_string(m));
  std::ostringstream c1, c2, md;
  fm::balance::write_smd_csv(c1, report);
  fm::balance::write_stratification_csv(c2, report);
  fm::balance::write_balance_markdown(md, report);
  if (config.format != fm::pipeline::ReportFormat::md) {
    write_text(fs::path(config.out_dir) / "balance.csv", c1.str());
    write_text(fs::path(config.out_dir) / "stratification.csv", c2.str());
  }
  if (config.format != fm::pipeline::ReportFormat::csv)
    write_text(fs::path(config.out_dir) / "balance.md", md.str());
  std::cout << "score " << (report.score_balanced ? "balanced" : "NOT balanced")
            << ", covariates " << (report.covariates_balanced ? "balanced" : "NOT balanced")
            << "\n";
  return 0;
}

int cmd_effects(const CliState& s) {
  const auto config = build_config(s);
  ensure_out_dir(config);
  const std::uint64_t seed = require_seed(config);
  const auto records = load_records(config);
  std::vector<fm::effects::EffectEstimate> rows;
  std::vector<std::string> row_methods;
  for (std::size_t i = 0; i < config.methods.size(); ++i) {
    fm::effects::PipelineConfig pc;
    pc.method = config.methods[i];
    pc.match_options = fm::matching::MatchOptions{config.with_replacement, config.caliper};
    pc.ga_population = config.ga_population;
    pc.ga_generations = config.ga_generations;
    pc.ga_seed = fm::rng::derive_seed(seed, {100, i});
    for (auto estimand : {fm::effects::Estimand::ate, fm::effects::Estimand::att}) {
      const auto b_seed = fm::rng::derive_seed(
          seed, {400, i, estimand == fm::effects::Estimand::ate ? 0u : 1u});
      rows.push_back(
          fm::effects::bootstrap(estimand, records, pc, config.replicates, b_seed));
      row_methods.push_back(fm::matching::to_string(config.methods[i]));
      std::cout << fm::effects::to_string(estimand) << " (" << row_methods.back()
                << "): " << fm::csv::fmt(rows.back().point, 6) << " se "
                << fm::csv::fmt(rows.back().bootstrap_se, 6) << "\n";
    }
  }
  std::ostringstream os;
  fm::effects::write_effects_csv(os, rows, row_methods, 0, 0);
  write_text(fs::path(config.out_dir) / "effects.csv", os.str());
  return 0;
}

int cmd_ftest(const CliState& s) {
  const auto config = build_config(s);
  const auto records = load_records(config);
  const auto sample = fm::effects::make_frontier_sample(records, fm::dea::Scope::common);
  std::vector<int> labels;
  for (const auto& r : records)
    labels.push_back(r.group == fm::dataset::Group::db ? 1 : 0);
  const auto result = fm::ftest::group_mean_test(
      sample, labels, fm::rng::derive_seed(require_seed(config), {300}));
  const std::string line = fm::ftest::format_report(result);
  std::cout << line << "\n";
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_text(fs::path(config.out_dir) / "ftest.txt", line + "\n");
  }
  return 0;
}

int cmd_analyze(const CliState& s) {
  const auto config = build_config(s);
  const auto out = fm::pipeline::run_pipeline(config);
  std::cout << "analyzed " << out.records.size() << " records; reports in "
            << config.out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& results_dir) {
  const fs::path dir(results_dir);
  if (!fs::exists(dir / "manifest.json"))
    throw fm::validation_error("no manifest.json in '" + results_dir + "'");
  std::ostringstream md;
  md << "# frontier_match run report\n\n";
  auto append_file = [&](const fs::path& p, const std::string& title, bool as_code) {
    std::ifstream in(p);
    if (!in) return;
    md << "## " << title << "\n\n";
    if (as_code) md << "```\n";
    md << in.rdbuf();
    if (as_code) md << "```\n";
    md << "\n";
  };
  append_file(dir / "manifest.json", "Manifest", true);
  append_file(dir / "model.md", "Propensity model", false);
  append_file(dir / "balance.md", "Covariate balance", false);
  append_file(dir / "summary.md", "Efficiency scores", false);
  append_file(dir / "ftest.txt", "Frontier separability", true);
  append_file(dir / "effects.md", "Treatment effects", false);
  write_text(dir / "report.md", md.str());
  std::cout << "wrote " << (dir / "report.md").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-effect evaluation of contract design via propensity-score "
               "matching and DEA efficiency frontiers"};
  app.require_subcommand(1);

  CliState s;
  std::string scope = "both";
  std::string results_dir;

  auto* validate = app.add_subcommand("validate", "parse and validate a dataset CSV");
  add_common_options(validate, s, false);
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset CSV");
  add_common_options(simulate, s, false);
  auto* pscore = app.add_subcommand("pscore", "fit the propensity model");
  add_common_options(pscore, s, false);
  auto* match = app.add_subcommand("match", "construct matched samples");
  add_common_options(match, s);
  auto* score = app.add_subcommand("score", "DEA-score the full sample");
  add_common_options(score, s, false);
  score->add_option("--scope", scope, "frontier scope (common|by_group|both)");
  auto* balance = app.add_subcommand("balance", "balance diagnostics");
  add_common_options(balance, s);
  auto* effects = app.add_subcommand("effects", "ATE/ATT with bootstrap inference");
  add_common_options(effects, s);
  auto* ftest = app.add_subcommand("ftest", "frontier separability test");
  add_common_options(ftest, s, false);
  auto* analyze = app.add_subcommand("analyze", "full pipeline with report bundle");
  add_common_options(analyze, s);
  auto* report = app.add_subcommand("report", "consolidate a results directory");
  report->add_option("--results", results_dir, "results directory from analyze")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(s);
    if (simulate->parsed()) return cmd_simulate(s);
    if (pscore->parsed()) return cmd_pscore(s);
    if (match->parsed()) return cmd_match(s);
    if (score->parsed()) return cmd_score(s, scope);
    if (balance->parsed()) return cmd_balance(s);
    if (effects->parsed()) return cmd_effects(s);
    if (ftest->parsed()) return cmd_ftest(s);
    if (analyze->parsed()) return cmd_analyze(s);
    if (report->parsed()) return cmd_report(results_dir);
  } catch (const fm::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fm::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
