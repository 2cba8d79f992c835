#pragma once

#include <string>
#include <vector>

#include "rstdr/distribution.hpp"
#include "rstdr/mcmc.hpp"

namespace rstdr::sim {

/**
 * How mixture components are assigned to micro-responses.
 *
 * PerSite draws one component per (site, period) and takes all of that
 * site's responses from it, so lower/upper-uniform sites produce counts at
 * the boundaries n and 0. PerResponse draws a component for every response.
 * In both cases the truth surface is the same mixture CDF.
 */
enum class MixingLevel { PerSite, PerResponse };

std::string to_string(MixingLevel level);
MixingLevel parse_mixing_level(const std::string& text);

struct ScenarioSpec {
  int scenario = 1;
  int periods = 10;
  int sites_per_period = 50;
  /// Trials are floor(Uniform(trials_lower, trials_upper)).
  double trials_lower = 50.0;
  double trials_upper = 100.0;
  std::vector<double> thresholds{1, 2, 4, 6, 8, 10, 14};
  /// Width c of the upper uniform component on (a_K, a_K + c).
  double tail_width = 1.0;
  MixingLevel mixing = MixingLevel::PerSite;

  void validate() const;
};

struct ZetaTerms {
  double zeta0 = 0.0, zeta1 = 0.0, zeta2 = 0.0;
};
/// Spatial terms; `indicator_weight` scales the discontinuous Scenario 2 parts.
ZetaTerms zeta_terms(int scenario, const spatial::Point& s, double indicator_weight = 1.0);

struct IotaTerms {
  double iota0 = 0.0, iota1 = 0.0, iota2 = 0.0;
};
/// Temporal terms for period t (1-based) of T.
IotaTerms iota_terms(int t, int periods);

struct SiteParameters {
  double lambda0 = 0.0;  // upper uniform (above a_K)
  double lambda1 = 0.0;  // lower uniform (below a_1)
  double mu = 0.0;
  double sigma = 1.0;
};

SiteParameters site_parameters(const ZetaTerms& zeta, const IotaTerms& iota, double x);

double normal_cdf(double x);
/// lambda1 + (1 - lambda0 - lambda1) Phi((log a - mu) / sigma).
double truth_cdf(const SiteParameters& p, double a);

struct Replication {
  std::vector<dr::MicroSample> samples;  // period-major; matches binned dataset rows
  std::vector<SiteParameters> parameters;
  std::vector<int> component;            // drawn component (PerSite) or -1
  Matrix truth;                          // N x K
};

Replication generate_replication(const ScenarioSpec& spec, RngStream& rng);

/// Mean squared error over all (i, t) at one threshold.
double compute_mse(const Vector& estimate, const Vector& truth);

/// Running coverage / interval-length totals; merging is associative.
struct CoverageAccumulator {
  long covered = 0;
  long total = 0;
  double length_sum = 0.0;

  void add(const Vector& lower, const Vector& upper, const Vector& truth);
  void merge(const CoverageAccumulator& other);
  double cp_percent() const;
  double average_length() const;
};

struct CpAl {
  double cp_percent = 0.0;
  double average_length = 0.0;
};
/// CP (percent) and AL at threshold k over replications.
CpAl compute_cp_al(const std::vector<dr::DistributionSurface>& surfaces, const std::vector<Matrix>& truths,
                   int k);

struct StudyConfig {
  ScenarioSpec spec;
  std::vector<mcmc::ModelKind> methods{mcmc::ModelKind::BIB, mcmc::ModelKind::BN};
  int replications = 20;
  /// Worker threads over (replication, method) tasks.
  int jobs = 1;
  std::uint64_t seed = 2024;
  mcmc::SamplerConfig sampler;
  bool monotone = false;

  void validate() const;
};

struct ReplicationRecord {
  int replication = 0;
  mcmc::ModelKind method = mcmc::ModelKind::BIB;
  double threshold = 0.0;
  double mse = 0.0;
  double cp_percent = 0.0;
  double average_length = 0.0;
};

struct MethodSummary {
  mcmc::ModelKind method = mcmc::ModelKind::BIB;
  double threshold = 0.0;
  double mse_mean = 0.0;
  double mse_lower = 0.0;  // 2.5% replication quantile
  double mse_upper = 0.0;  // 97.5% replication quantile
  double cp_percent = 0.0;
  double average_length = 0.0;
  int replications = 0;
};

struct StudyResult {
  std::vector<ReplicationRecord> records;
  std::vector<MethodSummary> summary;
  int failures = 0;
  std::vector<std::string> failure_messages;
  double seconds = 0.0;

  const MethodSummary& find(mcmc::ModelKind method, double threshold) const;
};

/// Replication r uses generator stream replication_stream(seed, r).
std::uint64_t replication_stream(std::uint64_t seed, int replication);
/// Fits intercept + x with default priors.
StudyResult run_study(const StudyConfig& config);

/// Writes mse_by_threshold.csv, coverage.csv and replication_raw.csv into `dir`.
void write_study_tables(const std::string& dir, const StudyResult& result);

}  // namespace rstdr::sim
