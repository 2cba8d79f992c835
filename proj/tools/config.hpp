#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rstdr/distribution.hpp"
#include "rstdr/simstudy.hpp"

namespace rstdr::cli {

using Json = nlohmann::ordered_json;

/**
 * @brief Every setting of every command, flat.
 *
 * Resolution order: defaults, then the JSON config file, then command-line
 * flags. The output directory additionally falls back to $RSTDR_OUTPUT_DIR.
 */
struct RunConfig {
  // general
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output_dir;

  // inputs
  std::string input;
  std::string truth;
  std::string surface;
  std::vector<std::string> draws;

  // data generation
  int scenario = 1;
  int replication = 0;
  std::string mixing = "per_site";
  int periods = 10;
  int sites_per_period = 50;
  std::vector<double> thresholds{1, 2, 4, 6, 8, 10, 14};

  // sampler
  std::string model = "BIB";
  int knots = 25;
  int iterations = 3000;
  int burn_in = 1000;
  int thin = 1;
  std::string smoother = "mccausland";
  double phi_step = 0.3;
  std::string phi_proposal = "logit";
  bool adapt_phi = false;
  std::string phi_xi_target = "full_multinomial";
  bool skip_unused_pg = false;
  bool monotone = false;
  std::string draws_format = "binary";
  bool include_cdf = false;

  // priors; empty means use zero, scalar precisions multiply the identity
  std::vector<double> prior_beta_mean;
  double prior_beta_precision = 0.01;
  std::vector<double> prior_gamma0_mean;
  std::vector<double> prior_gamma1_mean;
  double prior_gamma_precision = 0.01;
  double prior_tau_u_shape = 1.0;
  double prior_tau_u_rate = 1.0;
  double prior_tau_xi_shape = 1.0;
  double prior_tau_xi_rate = 1.0;
  /// Range prior bounds as multiples of the largest pairwise site distance.
  double prior_phi_lower_scale = 0.05;
  double prior_phi_upper_scale = 2.0;

  // study
  int replications = 20;
  std::vector<std::string> methods{"BIB", "BN"};

  // self-check
  std::vector<std::string> suites{"pg", "linalg", "conditionals", "geweke"};

  Json to_json() const;
  /// Throws ConfigError on a key that is not a RunConfig field or a value of the wrong type.
  static RunConfig from_json(const Json& j);
  static std::vector<std::string> keys();

  /// Range checks shared by all commands; throws ConfigError.
  void validate() const;

  mcmc::SamplerConfig sampler() const;
  sim::ScenarioSpec scenario_spec() const;
  /// Default priors for `data` with the configured overrides applied.
  Priors priors(const PanelDataset& data) const;
};

/// Reads a JSON object from `path`; ConfigError if it is not valid JSON or
/// contains unknown keys. Returns the merged JSON (defaults + file).
Json load_config_file(const std::string& path);

/// Output directory: explicit setting, else $RSTDR_OUTPUT_DIR, else ".".
std::string resolve_output_dir(const RunConfig& config);

}  // namespace rstdr::cli
