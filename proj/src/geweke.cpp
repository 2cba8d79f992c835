#include <algorithm>
#include <cmath>

#include "rstdr/errors.hpp"
#include "rstdr/mcmc.hpp"

namespace rstdr::mcmc {

namespace {

struct TinyModel {
  PanelDataset data;
  Priors priors;
  spatial::KnotSet knots;
};

TinyModel build_tiny_model(const GewekeConfig& cfg, RngStream& rng) {
  std::vector<Observation> obs;
  int site = 0;
  for (int t = 1; t <= cfg.periods; ++t) {
    for (int j = 0; j < cfg.sites_per_period; ++j) {
      Observation o;
      o.period = t;
      o.site = site++;
      o.location = {rng.uniform(), rng.uniform()};
      o.covariates = {1.0, rng.normal()};
      o.trials = 1 + static_cast<int>(rng.uniform() * cfg.max_trials);
      o.successes = 0;
      obs.push_back(o);
    }
  }
  TinyModel m;
  m.data = PanelDataset::from_observations(obs, cfg.periods);
  const int q = m.data.covariate_dim;
  m.priors.beta_mean = Vector::Zero(q);
  m.priors.beta_precision = Matrix::Identity(q, q);
  for (int k = 0; k < 2; ++k) {
    m.priors.gamma_mean[k] = Vector::Constant(q, -0.5);
    m.priors.gamma_precision[k] = Matrix::Identity(q, q);
    m.priors.tau_xi_shape[k] = 5.0;
    m.priors.tau_xi_rate[k] = 4.0;
  }
  m.priors.tau_u_shape = 5.0;
  m.priors.tau_u_rate = 4.0;
  m.priors.phi_lower = 0.2;
  m.priors.phi_upper = 1.2;
  spatial::KMeansOptions km;
  km.restarts = 5;
  m.knots = spatial::select_knots(m.data.pooled_sites(), cfg.knot_count, rng, km);
  return m;
}

// Parameters drawn from the prior; latent indicators and PG variables left at
// neutral values (the sweep redraws them before use).
ChainState draw_prior_state(const TinyModel& m, ModelKind model, RngStream& rng) {
  ChainState s = initial_state(m.data, m.priors, static_cast<int>(m.knots.size()), model, rng);
  auto draw_normal = [&](const Vector& mean, const Matrix& precision) {
    return linalg::sample_mvn_from_precision_dense(precision * mean, precision, rng);
  };
  s.beta = draw_normal(m.priors.beta_mean, m.priors.beta_precision);
  const std::array<double, 3> shape{m.priors.tau_u_shape, m.priors.tau_xi_shape[0], m.priors.tau_xi_shape[1]};
  const std::array<double, 3> rate{m.priors.tau_u_rate, m.priors.tau_xi_rate[0], m.priors.tau_xi_rate[1]};
  const int fields = model == ModelKind::BIB ? kFieldCount : 1;
  if (model == ModelKind::BIB) {
    for (int k = 0; k < 2; ++k) s.gamma[k] = draw_normal(m.priors.gamma_mean[k], m.priors.gamma_precision[k]);
  }
  for (int f = 0; f < fields; ++f) {
    LatentField& field = s.fields[f];
    field.tau = draw_gamma(shape[f], rate[f], rng);
    field.phi = m.priors.phi_lower + (m.priors.phi_upper - m.priors.phi_lower) * rng.uniform();
    const Matrix lower = linalg::cholesky(spatial::knot_covariance(m.knots, field.phi));
    const double scale = 1.0 / std::sqrt(field.tau);
    auto gaussian = [&]() {
      Vector z(lower.rows());
      for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
      return Vector(scale * lower * z);
    };
    field.start = gaussian();
    Vector prev = field.start;
    for (Eigen::Index t = 0; t < field.values.cols(); ++t) {
      prev += gaussian();
      field.values.col(t) = prev;
    }
  }
  return s;
}

std::vector<std::string> statistic_names(int q, ModelKind model) {
  std::vector<std::string> names;
  for (int j = 0; j < q; ++j) names.push_back("beta[" + std::to_string(j) + "]");
  if (model == ModelKind::BIB) {
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < q; ++j) names.push_back("gamma" + std::to_string(k) + "[" + std::to_string(j) + "]");
    }
  }
  const int fields = model == ModelKind::BIB ? kFieldCount : 1;
  for (int f = 0; f < fields; ++f) names.push_back("tau_" + field_name(f));
  for (int f = 0; f < fields; ++f) names.push_back("phi_" + field_name(f));
  return names;
}

std::vector<double> statistics(const ChainState& s, ModelKind model) {
  std::vector<double> out(s.beta.data(), s.beta.data() + s.beta.size());
  if (model == ModelKind::BIB) {
    for (int k = 0; k < 2; ++k) out.insert(out.end(), s.gamma[k].data(), s.gamma[k].data() + s.gamma[k].size());
  }
  const int fields = model == ModelKind::BIB ? kFieldCount : 1;
  for (int f = 0; f < fields; ++f) out.push_back(s.fields[f].tau);
  for (int f = 0; f < fields; ++f) out.push_back(s.fields[f].phi);
  return out;
}

// Draw (r, y) given the parameters currently held by the sampler.
void regenerate_data(Sampler& sampler, ModelKind model, RngStream& rng) {
  const LinearPredictors lp = sampler.linear_predictors();
  const PanelDataset& data = sampler.data();
  std::vector<int> y(data.size()), r(data.size(), 2);
  for (int i = 0; i < data.size(); ++i) {
    const int n = data.trials[i];
    if (model == ModelKind::BIB) {
      const double probs[3] = {lp.p0[i], lp.p1[i], std::max(0.0, 1.0 - lp.p0[i] - lp.p1[i])};
      r[i] = draw_categorical(probs, rng);
    }
    y[i] = r[i] == 0 ? 0 : (r[i] == 1 ? n : draw_binomial(n, lp.pi[i], rng));
  }
  sampler.set_successes(y, r);
}

}  // namespace

double GewekeReport::max_abs_z() const {
  double best = 0.0;
  for (const auto& e : entries) best = std::max(best, std::abs(e.z));
  return best;
}

GewekeReport geweke_check(const GewekeConfig& cfg) {
  if (cfg.cycles < cfg.batches || cfg.batches < 2 || cfg.forward_draws < 2) {
    throw ConfigError("geweke_check: need cycles >= batches >= 2 and forward_draws >= 2");
  }
  RngStream rng(cfg.seed, 0);
  RngStream setup_rng = rng.split(1);
  RngStream forward_rng = rng.split(2);
  RngStream data_rng = rng.split(3);
  const TinyModel model = build_tiny_model(cfg, setup_rng);
  const int q = model.data.covariate_dim;
  const std::vector<std::string> names = statistic_names(q, cfg.model);
  const std::size_t p = names.size();

  // Marginal-conditional simulator: parameters straight from the prior.
  std::vector<double> f_sum(p, 0.0), f_sq(p, 0.0);
  for (int d = 0; d < cfg.forward_draws; ++d) {
    const auto stats = statistics(draw_prior_state(model, cfg.model, forward_rng), cfg.model);
    for (std::size_t j = 0; j < p; ++j) {
      f_sum[j] += stats[j];
      f_sq[j] += stats[j] * stats[j];
    }
  }

  // Successive-conditional simulator.
  SamplerConfig sc;
  sc.iterations = 1;
  sc.burn_in = 0;
  sc.model = cfg.model;
  sc.smoother = cfg.smoother;
  sc.knot_count = static_cast<int>(model.knots.size());
  sc.seed = cfg.seed;
  sc.stream = 4;
  sc.kappa_shift = cfg.kappa_shift;
  sc.check_invariants = true;
  Sampler sampler(model.data, model.priors, model.knots, sc);
  RngStream init_rng = rng.split(5);
  sampler.set_state(draw_prior_state(model, cfg.model, init_rng));
  regenerate_data(sampler, cfg.model, data_rng);

  const int batch_len = cfg.cycles / cfg.batches;
  const int used = batch_len * cfg.batches;
  std::vector<std::vector<double>> batch_means(p, std::vector<double>(cfg.batches, 0.0));
  for (int c = 0; c < used; ++c) {
    sampler.sweep();
    regenerate_data(sampler, cfg.model, data_rng);
    const auto stats = statistics(sampler.state(), cfg.model);
    for (std::size_t j = 0; j < p; ++j) batch_means[j][c / batch_len] += stats[j] / batch_len;
  }

  GewekeReport report;
  for (std::size_t j = 0; j < p; ++j) {
    const double nf = cfg.forward_draws;
    const double f_mean = f_sum[j] / nf;
    const double f_var = (f_sq[j] - nf * f_mean * f_mean) / (nf - 1.0);
    double g_mean = 0.0;
    for (double b : batch_means[j]) g_mean += b;
    g_mean /= cfg.batches;
    double g_var = 0.0;
    for (double b : batch_means[j]) g_var += (b - g_mean) * (b - g_mean);
    g_var /= (cfg.batches - 1.0);
    const double se = std::sqrt(f_var / nf + g_var / cfg.batches);
    report.entries.push_back({names[j], f_mean, g_mean, (f_mean - g_mean) / se});
  }
  return report;
}

}  // namespace rstdr::mcmc
