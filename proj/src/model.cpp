#include "rstdr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rstdr/errors.hpp"

namespace rstdr {

PanelDataset PanelDataset::from_observations(const std::vector<Observation>& observations,
                                             int periods) {
  if (periods < 1) throw InvalidShape("PanelDataset: need at least one period");
  PanelDataset data;
  data.periods = periods;
  data.covariate_dim = observations.empty() ? 0 : static_cast<int>(observations.front().covariates.size());

  std::vector<std::size_t> order(observations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (const auto& obs : observations) {
    if (obs.period < 1 || obs.period > periods) {
      throw InvalidShape("PanelDataset: period " + std::to_string(obs.period) + " outside 1.." +
                         std::to_string(periods));
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return observations[a].period < observations[b].period;
  });

  const auto n = static_cast<Eigen::Index>(observations.size());
  data.design.resize(n, data.covariate_dim);
  data.period_offset.assign(periods + 1, 0);
  for (Eigen::Index row = 0; row < n; ++row) {
    const Observation& obs = observations[order[row]];
    if (static_cast<int>(obs.covariates.size()) != data.covariate_dim) {
      throw DimensionMismatch("PanelDataset: covariate length differs between observations");
    }
    for (int j = 0; j < data.covariate_dim; ++j) data.design(row, j) = obs.covariates[j];
    data.trials.push_back(obs.trials);
    data.successes.push_back(obs.successes);
    data.site_ids.push_back(obs.site);
    data.locations.push_back(obs.location);
    ++data.period_offset[obs.period];
  }
  for (int t = 0; t < periods; ++t) data.period_offset[t + 1] += data.period_offset[t];
  data.validate();
  return data;
}

int PanelDataset::period_of(int i) const {
  const auto it = std::upper_bound(period_offset.begin(), period_offset.end(), i);
  return static_cast<int>(it - period_offset.begin()) - 1;
}

std::vector<spatial::SiteSet> PanelDataset::sites_by_period() const {
  std::vector<spatial::SiteSet> out(periods);
  for (int t = 0; t < periods; ++t) {
    out[t].assign(locations.begin() + period_begin(t), locations.begin() + period_end(t));
  }
  return out;
}

spatial::SiteSet PanelDataset::pooled_sites() const { return locations; }

void PanelDataset::validate() const {
  const int n = size();
  if (periods < 1) throw InvalidShape("PanelDataset: need at least one period");
  if (static_cast<int>(period_offset.size()) != periods + 1 || period_offset.front() != 0 ||
      period_offset.back() != n) {
    throw DimensionMismatch("PanelDataset: inconsistent period offsets");
  }
  if (static_cast<int>(successes.size()) != n || static_cast<int>(site_ids.size()) != n ||
      static_cast<int>(locations.size()) != n || design.rows() != n ||
      design.cols() != covariate_dim) {
    throw DimensionMismatch("PanelDataset: column lengths differ");
  }
  for (int i = 0; i < n; ++i) {
    if (trials[i] < 1) throw InvalidShape("PanelDataset: trials must be >= 1");
    if (successes[i] < 0 || successes[i] > trials[i]) {
      throw InvalidShape("PanelDataset: successes outside [0, trials]");
    }
    if (!std::isfinite(locations[i].s1) || !std::isfinite(locations[i].s2)) {
      throw InvalidShape("PanelDataset: non-finite location");
    }
  }
  if (!design.allFinite()) throw InvalidShape("PanelDataset: non-finite covariate");
}

Priors Priors::defaults(int covariate_dim, double max_site_distance) {
  Priors p;
  p.beta_mean = Vector::Zero(covariate_dim);
  p.beta_precision = 0.01 * Matrix::Identity(covariate_dim, covariate_dim);
  for (int k = 0; k < 2; ++k) {
    p.gamma_mean[k] = Vector::Zero(covariate_dim);
    p.gamma_precision[k] = 0.01 * Matrix::Identity(covariate_dim, covariate_dim);
  }
  const double scale = max_site_distance > 0.0 ? max_site_distance : 1.0;
  p.phi_lower = 0.05 * scale;
  p.phi_upper = 2.0 * scale;
  return p;
}

void Priors::validate(int covariate_dim) const {
  auto check_normal = [&](const Vector& mean, const Matrix& precision, const char* name) {
    if (mean.size() != covariate_dim || precision.rows() != covariate_dim ||
        precision.cols() != covariate_dim) {
      throw DimensionMismatch(std::string("Priors: ") + name + " has wrong dimension");
    }
    linalg::Cholesky check(precision);  // throws NotPositiveDefinite
  };
  check_normal(beta_mean, beta_precision, "beta");
  check_normal(gamma_mean[0], gamma_precision[0], "gamma0");
  check_normal(gamma_mean[1], gamma_precision[1], "gamma1");
  for (double v : {tau_u_shape, tau_u_rate, tau_xi_shape[0], tau_xi_rate[0], tau_xi_shape[1],
                   tau_xi_rate[1]}) {
    if (!(v > 0.0)) throw ConfigError("Priors: gamma hyperparameters must be positive");
  }
  if (!(phi_lower > 0.0 && phi_lower < phi_upper)) {
    throw ConfigError("Priors: need 0 < phi_lower < phi_upper");
  }
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::array<double, 2> multinomial_logit(double psi0, double psi1) {
  const double top = std::max({0.0, psi0, psi1});
  const double e0 = std::exp(psi0 - top);
  const double e1 = std::exp(psi1 - top);
  const double denom = std::exp(-top) + e0 + e1;
  return {e0 / denom, e1 / denom};
}

double mixture_cdf(double p0, double p1, double pi) { return p1 + (1.0 - p0 - p1) * pi; }

double log_binomial_pmf(int y, int n, double eta) {
  const double log_choose = std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0);
  // log pi = -softplus(-eta), log(1 - pi) = -softplus(eta)
  return log_choose - y * softplus(-eta) - (n - y) * softplus(eta);
}

}  // namespace rstdr
