#include <iostream>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "rstdr/errors.hpp"

using namespace rstdr;
using namespace rstdr::cli;

namespace {

/// Registers flags bound to a scratch RunConfig and remembers which config key each sets.
class FlagBinder {
 public:
  explicit FlagBinder(RunConfig& flags) : flags_(flags) {}

  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, const std::string& key, T& member,
                      const std::string& help) {
    CLI::Option* o = app->add_option(name, member, help);
    bound_.emplace_back(o, key);
    return o;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& key, bool& member,
                    const std::string& help) {
    CLI::Option* o = app->add_flag(name, member, help);
    bound_.emplace_back(o, key);
    return o;
  }

  /// Flags given on the command line override the merged config.
  void apply(Json& merged) const {
    const Json given = flags_.to_json();
    for (const auto& [opt, key] : bound_) {
      if (opt->count() > 0) merged[key] = given[key];
    }
  }

 private:
  RunConfig& flags_;
  std::vector<std::pair<CLI::Option*, std::string>> bound_;
};

void add_sampler_flags(CLI::App* cmd, FlagBinder& b, RunConfig& f) {
  b.option(cmd, "--model", "model", f.model, "BIB or BN");
  b.option(cmd, "--knots", "knots", f.knots, "number of knots M");
  b.option(cmd, "--iterations", "iterations", f.iterations, "MCMC iterations");
  b.option(cmd, "--burn-in", "burn_in", f.burn_in, "burn-in iterations");
  b.option(cmd, "--thin", "thin", f.thin, "keep every thin-th draw");
  b.option(cmd, "--smoother", "smoother", f.smoother, "mccausland or rue");
  b.option(cmd, "--phi-step", "phi_step", f.phi_step, "range proposal step");
  b.option(cmd, "--phi-proposal", "phi_proposal", f.phi_proposal, "logit or raw");
  b.flag(cmd, "--adapt-phi,!--no-adapt-phi", "adapt_phi", f.adapt_phi, "adapt the range step during burn-in");
  b.option(cmd, "--phi-xi-target", "phi_xi_target", f.phi_xi_target, "full_multinomial or indicator_only");
  b.flag(cmd, "--skip-unused-pg,!--no-skip-unused-pg", "skip_unused_pg", f.skip_unused_pg,
         "skip binomial PG draws for boundary-class rows");
  b.flag(cmd, "--monotone,!--no-monotone", "monotone", f.monotone, "rearrange CDF estimates to be monotone");
  b.option(cmd, "--thresholds", "thresholds", f.thresholds, "threshold grid a_1 < ... < a_K")->delimiter(',');
}

void add_scenario_flags(CLI::App* cmd, FlagBinder& b, RunConfig& f) {
  b.option(cmd, "--scenario", "scenario", f.scenario, "simulation scenario (1 or 2)");
  b.option(cmd, "--mixing", "mixing", f.mixing, "per_site or per_response");
  b.option(cmd, "--periods", "periods", f.periods, "number of periods T");
  b.option(cmd, "--sites", "sites_per_period", f.sites_per_period, "sites per period");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust spatio-temporal distribution regression"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig f;
  FlagBinder b(f);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  b.option(&app, "--output-dir", "output_dir", f.output_dir, "output directory (default $RSTDR_OUTPUT_DIR or .)");
  b.option(&app, "--seed", "seed", f.seed, "random seed");
  b.option(&app, "--jobs", "jobs", f.jobs, "parallel tasks");

  auto* simulate = app.add_subcommand("simulate", "generate one replication: micro.csv and truth.csv");
  add_scenario_flags(simulate, b, f);
  b.option(simulate, "--replication", "replication", f.replication, "replication index");
  b.option(simulate, "--thresholds", "thresholds", f.thresholds, "thresholds for truth.csv")->delimiter(',');

  auto* bin = app.add_subcommand("bin", "bin micro data into counts: binned.csv");
  b.option(bin, "--input", "input", f.input, "micro.csv");
  b.option(bin, "--thresholds", "thresholds", f.thresholds, "threshold grid")->delimiter(',');

  auto* fit = app.add_subcommand("fit", "fit one model per threshold: surface.csv and draws");
  b.option(fit, "--input", "input", f.input, "micro.csv or binned.csv");
  add_sampler_flags(fit, b, f);
  b.option(fit, "--draws-format", "draws_format", f.draws_format, "binary, csv or none");
  b.flag(fit, "--include-cdf,!--no-include-cdf", "include_cdf", f.include_cdf, "CDF draws in CSV draws files");

  auto* summarize = app.add_subcommand("summarize", "posterior summaries of draws files");
  b.option(summarize, "draws", "draws", f.draws, "draws files (.bin or long .csv)");
  b.flag(summarize, "--include-cdf,!--no-include-cdf", "include_cdf", f.include_cdf, "summarize CDF columns");

  auto* evaluate = app.add_subcommand("evaluate", "MSE, coverage and interval length against truth");
  b.option(evaluate, "--surface", "surface", f.surface, "surface.csv from fit");
  b.option(evaluate, "--truth", "truth", f.truth, "truth.csv from simulate");

  auto* replicate = app.add_subcommand("replicate", "simulation study over replications and methods");
  add_scenario_flags(replicate, b, f);
  add_sampler_flags(replicate, b, f);
  b.option(replicate, "--replications", "replications", f.replications, "number of replications R");
  b.option(replicate, "--methods", "methods", f.methods, "methods to compare")->delimiter(',');

  auto* check = app.add_subcommand("check", "self-check suites: pg, linalg, conditionals, geweke");
  b.option(check, "--suite", "suites", f.suites, "suites to run (repeatable)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Json merged = config_path.empty() ? RunConfig{}.to_json() : load_config_file(config_path);
    b.apply(merged);
    const RunConfig config = RunConfig::from_json(merged);
    config.validate();
    if (simulate->parsed()) return cmd_simulate(config);
    if (bin->parsed()) return cmd_bin(config);
    if (fit->parsed()) return cmd_fit(config);
    if (summarize->parsed()) return cmd_summarize(config);
    if (evaluate->parsed()) return cmd_evaluate(config);
    if (replicate->parsed()) return cmd_replicate(config);
    if (check->parsed()) return cmd_check(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TooManyKnots& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
