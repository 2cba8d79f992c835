#pragma once

#include <cmath>
#include <vector>

#include "rstdr/mcmc.hpp"
#include "rstdr/model.hpp"
#include "rstdr/random.hpp"
#include "rstdr/spatial.hpp"

namespace fixtures {

using rstdr::Matrix;
using rstdr::Vector;

/// Random panel on the unit square with an intercept plus (q - 1) normal covariates.
inline rstdr::PanelDataset random_panel(int periods, int sites_per_period, int q, int max_trials,
                                        rstdr::RngStream& rng, double boundary_share = 0.3) {
  std::vector<rstdr::Observation> obs;
  for (int t = 1; t <= periods; ++t) {
    for (int i = 0; i < sites_per_period; ++i) {
      rstdr::Observation o;
      o.period = t;
      o.site = i;
      o.location = {rng.uniform(), rng.uniform()};
      o.covariates.push_back(1.0);
      for (int j = 1; j < q; ++j) o.covariates.push_back(rng.normal());
      o.trials = 1 + static_cast<int>(rng.uniform() * max_trials);
      const double u = rng.uniform();
      if (u < boundary_share / 2) {
        o.successes = 0;
      } else if (u < boundary_share) {
        o.successes = o.trials;
      } else {
        o.successes = static_cast<int>(rng.uniform() * (o.trials + 1));
      }
      obs.push_back(o);
    }
  }
  return rstdr::PanelDataset::from_observations(obs, periods);
}

inline Matrix random_matrix(int rows, int cols, rstdr::RngStream& rng, double scale = 1.0) {
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = scale * rng.normal();
  return a;
}

/// State with every block randomized inside its support; r feasible for the data.
inline rstdr::ChainState random_state(const rstdr::PanelDataset& data, const rstdr::Priors& priors, int m,
                                      rstdr::RngStream& rng) {
  const int q = data.covariate_dim;
  rstdr::ChainState s;
  s.beta = random_matrix(q, 1, rng, 0.5).col(0);
  for (int k = 0; k < 2; ++k) s.gamma[k] = random_matrix(q, 1, rng, 0.5).col(0);
  for (auto& f : s.fields) {
    f.values = random_matrix(m, data.periods, rng, 0.7);
    f.start = random_matrix(m, 1, rng, 0.7).col(0);
    f.tau = 0.5 + rng.uniform();
    f.phi = priors.phi_lower + (0.2 + 0.6 * rng.uniform()) * (priors.phi_upper - priors.phi_lower);
  }
  const int n = data.size();
  s.indicator.assign(n, 2);
  for (int i = 0; i < n; ++i) {
    if (data.successes[i] == 0 && rng.uniform() < 0.5) s.indicator[i] = 0;
    if (data.successes[i] == data.trials[i] && rng.uniform() < 0.5) s.indicator[i] = 1;
  }
  s.omega = (Vector::Random(n).array() + 1.5).matrix();
  for (auto& w : s.omega_k) w = (Vector::Random(n).array() + 1.5).matrix();
  return s;
}

/// Site values of a knot field at period t computed directly as c^T C^{-1} v.
inline Vector project_direct(const std::vector<rstdr::spatial::Point>& sites, const rstdr::spatial::KnotSet& knots,
                             double phi, const Vector& v) {
  const Matrix c = rstdr::spatial::knot_covariance(knots, phi);
  const Matrix cross = rstdr::spatial::cross_correlation(sites, knots, phi);
  return cross * c.ldlt().solve(v);
}

/// Site values of a field for every observation, in dataset order.
inline Vector site_field(const rstdr::PanelDataset& data, const rstdr::spatial::KnotSet& knots,
                         const rstdr::LatentField& f) {
  Vector out(data.size());
  const auto by_period = data.sites_by_period();
  for (int t = 0; t < data.periods; ++t) {
    if (by_period[t].empty()) continue;
    out.segment(data.period_begin(t), data.period_size(t)) =
        project_direct(by_period[t], knots, f.phi, f.values.col(t));
  }
  return out;
}

inline double log_binomial(int y, int n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0) + y * std::log(p) +
         (n - y) * std::log1p(-p);
}

/// log N(x; mean, cov) evaluated from scratch.
inline double log_normal(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  const Vector z = l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (x.size() * std::log(2.0 * M_PI) + 2.0 * l.diagonal().array().log().sum() + z.squaredNorm());
}

}  // namespace fixtures
