#include "config.hpp"

#include <cstdlib>
#include <fstream>

#include "rstdr/checks.hpp"
#include "rstdr/errors.hpp"

namespace rstdr::cli {

namespace {

/// Calls v(key, member) for every field, in manifest order.
template <class Config, class Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("seed", c.seed);
  v("jobs", c.jobs);
  v("output_dir", c.output_dir);
  v("input", c.input);
  v("truth", c.truth);
  v("surface", c.surface);
  v("draws", c.draws);
  v("scenario", c.scenario);
  v("replication", c.replication);
  v("mixing", c.mixing);
  v("periods", c.periods);
  v("sites_per_period", c.sites_per_period);
  v("thresholds", c.thresholds);
  v("model", c.model);
  v("knots", c.knots);
  v("iterations", c.iterations);
  v("burn_in", c.burn_in);
  v("thin", c.thin);
  v("smoother", c.smoother);
  v("phi_step", c.phi_step);
  v("phi_proposal", c.phi_proposal);
  v("adapt_phi", c.adapt_phi);
  v("phi_xi_target", c.phi_xi_target);
  v("skip_unused_pg", c.skip_unused_pg);
  v("monotone", c.monotone);
  v("draws_format", c.draws_format);
  v("include_cdf", c.include_cdf);
  v("prior_beta_mean", c.prior_beta_mean);
  v("prior_beta_precision", c.prior_beta_precision);
  v("prior_gamma0_mean", c.prior_gamma0_mean);
  v("prior_gamma1_mean", c.prior_gamma1_mean);
  v("prior_gamma_precision", c.prior_gamma_precision);
  v("prior_tau_u_shape", c.prior_tau_u_shape);
  v("prior_tau_u_rate", c.prior_tau_u_rate);
  v("prior_tau_xi_shape", c.prior_tau_xi_shape);
  v("prior_tau_xi_rate", c.prior_tau_xi_rate);
  v("prior_phi_lower_scale", c.prior_phi_lower_scale);
  v("prior_phi_upper_scale", c.prior_phi_upper_scale);
  v("replications", c.replications);
  v("methods", c.methods);
  v("suites", c.suites);
}

mcmc::PhiProposal parse_phi_proposal(const std::string& text) {
  if (text == "logit") return mcmc::PhiProposal::LogitScale;
  if (text == "raw") return mcmc::PhiProposal::RawScale;
  throw ConfigError("unknown phi_proposal '" + text + "' (expected logit or raw)");
}

mcmc::PhiXiTarget parse_phi_xi_target(const std::string& text) {
  if (text == "full_multinomial") return mcmc::PhiXiTarget::FullMultinomial;
  if (text == "indicator_only") return mcmc::PhiXiTarget::IndicatorOnly;
  throw ConfigError("unknown phi_xi_target '" + text + "' (expected full_multinomial or indicator_only)");
}

Vector prior_mean(const std::vector<double>& values, int q, const char* key) {
  if (values.empty()) return Vector::Zero(q);
  if (static_cast<int>(values.size()) != q) {
    throw ConfigError(std::string(key) + " has " + std::to_string(values.size()) + " entries, expected " +
                      std::to_string(q) + " (intercept, x)");
  }
  return Eigen::Map<const Vector>(values.data(), q);
}

}  // namespace

Json RunConfig::to_json() const {
  Json j = Json::object();
  visit_fields(*this, [&](const char* key, const auto& value) { j[key] = value; });
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const std::vector<std::string> known = keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  visit_fields(c, [&](const char* key, auto& value) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  });
  return c;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  RunConfig c;
  visit_fields(c, [&](const char* key, const auto&) { out.emplace_back(key); });
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(jobs >= 1, "jobs must be >= 1");
  require(scenario == 1 || scenario == 2, "scenario must be 1 or 2, got " + std::to_string(scenario));
  require(replication >= 0, "replication must be >= 0");
  require(replications >= 1, "replications must be >= 1");
  require(draws_format == "binary" || draws_format == "csv" || draws_format == "none",
          "draws_format must be binary, csv or none");
  require(prior_beta_precision > 0 && prior_gamma_precision > 0, "prior precisions must be positive");
  require(prior_tau_u_shape > 0 && prior_tau_u_rate > 0 && prior_tau_xi_shape > 0 && prior_tau_xi_rate > 0,
          "gamma prior hyperparameters must be positive");
  require(prior_phi_lower_scale > 0 && prior_phi_upper_scale > prior_phi_lower_scale,
          "range prior scales must satisfy 0 < lower < upper");
  require(!methods.empty(), "methods must not be empty");
  for (const auto& m : methods) mcmc::parse_model_kind(m);
  for (const auto& s : suites) {
    const auto& names = checks::suite_names();
    require(std::find(names.begin(), names.end(), s) != names.end(), "unknown check suite '" + s + "'");
  }
  dr::ThresholdGrid grid(thresholds);
  sampler().validate();
  scenario_spec().validate();
}

mcmc::SamplerConfig RunConfig::sampler() const {
  mcmc::SamplerConfig s;
  s.iterations = iterations;
  s.burn_in = burn_in;
  s.thin = thin;
  s.model = mcmc::parse_model_kind(model);
  s.smoother = mcmc::parse_smoother(smoother);
  s.knot_count = knots;
  s.seed = seed;
  s.stream = 0;
  s.phi_step = phi_step;
  s.phi_proposal = parse_phi_proposal(phi_proposal);
  s.adapt_phi = adapt_phi;
  s.phi_xi_target = parse_phi_xi_target(phi_xi_target);
  s.skip_unused_pg = skip_unused_pg;
  return s;
}

sim::ScenarioSpec RunConfig::scenario_spec() const {
  sim::ScenarioSpec spec;
  spec.scenario = scenario;
  spec.periods = periods;
  spec.sites_per_period = sites_per_period;
  spec.thresholds = thresholds;
  spec.mixing = sim::parse_mixing_level(mixing);
  return spec;
}

Priors RunConfig::priors(const PanelDataset& data) const {
  const int q = data.covariate_dim;
  const double dmax = spatial::max_pairwise_distance(data.pooled_sites());
  Priors p = Priors::defaults(q, dmax);
  p.beta_mean = prior_mean(prior_beta_mean, q, "prior_beta_mean");
  p.beta_precision = Matrix::Identity(q, q) * prior_beta_precision;
  p.gamma_mean[0] = prior_mean(prior_gamma0_mean, q, "prior_gamma0_mean");
  p.gamma_mean[1] = prior_mean(prior_gamma1_mean, q, "prior_gamma1_mean");
  for (auto& g : p.gamma_precision) g = Matrix::Identity(q, q) * prior_gamma_precision;
  p.tau_u_shape = prior_tau_u_shape;
  p.tau_u_rate = prior_tau_u_rate;
  p.tau_xi_shape = {prior_tau_xi_shape, prior_tau_xi_shape};
  p.tau_xi_rate = {prior_tau_xi_rate, prior_tau_xi_rate};
  p.phi_lower = prior_phi_lower_scale * dmax;
  p.phi_upper = prior_phi_upper_scale * dmax;
  p.validate(q);
  return p;
}

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  Json file;
  try {
    file = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  Json merged = RunConfig::from_json(file).to_json();  // validates keys and types
  return merged;
}

std::string resolve_output_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("RSTDR_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace rstdr::cli
