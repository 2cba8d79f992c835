#pragma once

#include <array>
#include <vector>

#include "rstdr/linalg.hpp"
#include "rstdr/spatial.hpp"

namespace rstdr {

using linalg::Matrix;
using linalg::Vector;

/// One binomial count at a site in a period. `period` is 1-based.
struct Observation {
  int period = 1;
  int site = 0;
  spatial::Point location;
  std::vector<double> covariates;
  int trials = 1;
  int successes = 0;
};

/**
 * @brief Observations grouped by period, flattened in period order.
 *
 * Rows [period_offset[t], period_offset[t+1]) belong to period t (0-based).
 * Periods may have different numbers of sites, including none.
 */
struct PanelDataset {
  int periods = 0;
  int covariate_dim = 0;
  Matrix design;  // N x q
  std::vector<int> trials;
  std::vector<int> successes;
  std::vector<int> site_ids;
  std::vector<spatial::Point> locations;
  std::vector<int> period_offset;

  static PanelDataset from_observations(const std::vector<Observation>& observations, int periods);

  int size() const { return static_cast<int>(trials.size()); }
  int period_begin(int t) const { return period_offset[t]; }
  int period_end(int t) const { return period_offset[t + 1]; }
  int period_size(int t) const { return period_end(t) - period_begin(t); }
  /// 0-based period of observation i.
  int period_of(int i) const;

  std::vector<spatial::SiteSet> sites_by_period() const;
  spatial::SiteSet pooled_sites() const;

  /// Throws DimensionMismatch / InvalidShape on inconsistent contents.
  void validate() const;
};

struct Priors {
  Vector beta_mean;
  Matrix beta_precision;
  std::array<Vector, 2> gamma_mean;
  std::array<Matrix, 2> gamma_precision;
  double tau_u_shape = 1.0;
  double tau_u_rate = 1.0;
  std::array<double, 2> tau_xi_shape{1.0, 1.0};
  std::array<double, 2> tau_xi_rate{1.0, 1.0};
  double phi_lower = 0.05;
  double phi_upper = 2.0;

  /// Zero means, 0.01 I precisions, Ga(1, 1) precisions and a range prior
  /// on (0.05, 2) times the largest pairwise site distance.
  static Priors defaults(int covariate_dim, double max_site_distance);

  void validate(int covariate_dim) const;
};

/// Knot-level random walk: column t of `values` is the field at period t+1,
/// `start` the period-0 value.
struct LatentField {
  Matrix values;  // M x T
  Vector start;   // M
  double tau = 1.0;
  double phi = 1.0;
};

/// Field slots inside ChainState::fields.
enum FieldIndex : int { kFieldU = 0, kFieldXi0 = 1, kFieldXi1 = 2 };

struct ChainState {
  Vector beta;
  std::array<Vector, 2> gamma;
  std::array<LatentField, 3> fields;
  std::vector<int> indicator;       // r in {0, 1, 2}
  Vector omega;                     // binomial-part PG latents
  std::array<Vector, 2> omega_k;    // multinomial-part PG latents

  LatentField& u() { return fields[kFieldU]; }
  const LatentField& u() const { return fields[kFieldU]; }
  LatentField& xi(int k) { return fields[1 + k]; }
  const LatentField& xi(int k) const { return fields[1 + k]; }
};

/// Per-observation linear predictors and derived probabilities.
struct LinearPredictors {
  Vector eta, pi, psi0, psi1, p0, p1;
};

/// Overflow-safe logistic function.
double logistic(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);
/// (p0, p1) = exp(psi_k) / (1 + exp(psi0) + exp(psi1)).
std::array<double, 2> multinomial_logit(double psi0, double psi1);
/// p1 + (1 - p0 - p1) * pi.
double mixture_cdf(double p0, double p1, double pi);
/// log Bin(y; n, logistic(eta)).
double log_binomial_pmf(int y, int n, double eta);

}  // namespace rstdr
