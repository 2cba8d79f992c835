#include "rstdr/mcmc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "rstdr/errors.hpp"

namespace rstdr::mcmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// log(1 + e^a + e^b)
double log_normalizer(double a, double b) {
  const double top = std::max({0.0, a, b});
  return top + std::log(std::exp(-top) + std::exp(a - top) + std::exp(b - top));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::BIB ? "BIB" : "BN"; }
std::string to_string(Smoother smoother) {
  return smoother == Smoother::McCausland ? "mccausland" : "rue";
}

ModelKind parse_model_kind(const std::string& text) {
  const std::string t = lower(text);
  if (t == "bib") return ModelKind::BIB;
  if (t == "bn") return ModelKind::BN;
  throw ConfigError("unknown model '" + text + "' (expected BIB or BN)");
}

Smoother parse_smoother(const std::string& text) {
  const std::string t = lower(text);
  if (t == "mccausland") return Smoother::McCausland;
  if (t == "rue") return Smoother::Rue;
  throw ConfigError("unknown smoother '" + text + "' (expected mccausland or rue)");
}

std::string field_name(int field) {
  switch (field) {
    case kFieldU: return "u";
    case kFieldXi0: return "xi0";
    case kFieldXi1: return "xi1";
  }
  throw InvalidShape("field index out of range");
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in must lie in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (knot_count < 1) throw ConfigError("knot count must be >= 1");
  if (!(phi_step > 0.0)) throw ConfigError("phi_step must be positive");
  if (pg.exact_cutoff < 1) throw ConfigError("pg exact_cutoff must be >= 1");
}

Vector GaussianConditional::mean() const { return linalg::Cholesky(precision).solve(lin); }

double GaussianConditional::log_kernel(const Vector& x) const {
  return lin.dot(x) - 0.5 * x.dot(precision * x);
}

ChainState initial_state(const PanelDataset& data, const Priors& priors, int knot_count,
                         ModelKind model, RngStream& rng) {
  const int q = data.covariate_dim;
  ChainState s;
  s.beta = Vector::Zero(q);
  s.gamma = {Vector::Zero(q), Vector::Zero(q)};
  for (auto& f : s.fields) {
    f.values = Matrix::Zero(knot_count, data.periods);
    f.start = Vector::Zero(knot_count);
    f.tau = 1.0;
    f.phi = 0.5 * (priors.phi_lower + priors.phi_upper);
  }
  const int n = data.size();
  s.indicator.assign(n, 2);
  s.omega.resize(n);
  for (int i = 0; i < n; ++i) {
    s.omega[i] = pg_mean(data.trials[i], 0.0);
    if (model == ModelKind::BN) continue;
    const int y = data.successes[i];
    if (y == 0) {
      s.indicator[i] = rng.uniform() < 0.5 ? 0 : 2;
    } else if (y == data.trials[i]) {
      s.indicator[i] = rng.uniform() < 0.5 ? 1 : 2;
    }
  }
  s.omega_k = {Vector::Constant(n, 0.25), Vector::Constant(n, 0.25)};
  return s;
}

LinearPredictors linear_predictors(const ChainState& state, const PanelDataset& data,
                                   const std::array<spatial::GppProjector, kFieldCount>& projectors,
                                   ModelKind model) {
  const int n = data.size();
  if (state.beta.size() != data.covariate_dim) {
    throw DimensionMismatch("linear_predictors: beta length differs from covariate dimension");
  }
  auto field_at_sites = [&](int f) {
    Vector out(n);
    const Matrix& values = state.fields[f].values;
    if (values.cols() != data.periods || values.rows() != projectors[f].knot_count()) {
      throw DimensionMismatch("linear_predictors: field shape differs from projector");
    }
    for (int t = 0; t < data.periods; ++t) {
      out.segment(data.period_begin(t), data.period_size(t)) = projectors[f].project(t, values.col(t));
    }
    return out;
  };
  LinearPredictors lp;
  lp.eta = data.design * state.beta + field_at_sites(kFieldU);
  lp.pi = lp.eta.unaryExpr([](double e) { return logistic(e); });
  lp.p0 = Vector::Zero(n);
  lp.p1 = Vector::Zero(n);
  if (model == ModelKind::BIB) {
    lp.psi0 = data.design * state.gamma[0] + field_at_sites(kFieldXi0);
    lp.psi1 = data.design * state.gamma[1] + field_at_sites(kFieldXi1);
    for (int i = 0; i < n; ++i) {
      const auto p = multinomial_logit(lp.psi0[i], lp.psi1[i]);
      lp.p0[i] = p[0];
      lp.p1[i] = p[1];
    }
  } else {
    lp.psi0 = Vector::Constant(n, kNegInf);
    lp.psi1 = Vector::Constant(n, kNegInf);
  }
  return lp;
}

// ---------------------------------------------------------------------------

Sampler::Sampler(PanelDataset data, Priors priors, spatial::KnotSet knots, SamplerConfig config)
    : data_(std::move(data)),
      priors_(std::move(priors)),
      knots_(std::move(knots)),
      config_(std::move(config)),
      rng_(config_.seed, config_.stream) {
  config_.validate();
  data_.validate();
  priors_.validate(data_.covariate_dim);
  if (static_cast<int>(knots_.size()) != config_.knot_count) {
    throw ConfigError("Sampler: knot set size differs from configured knot count");
  }
  sites_ = data_.sites_by_period();
  phi_step_.fill(config_.phi_step);
  set_state(initial_state(data_, priors_, config_.knot_count, config_.model, rng_));
}

void Sampler::set_state(const ChainState& state) {
  state_ = state;
  for (int f = 0; f < kFieldCount; ++f) {
    projectors_[f] = spatial::GppProjector(sites_, knots_, state_.fields[f].phi);
    refresh_field(f);
  }
  for (int g = 0; g < kFieldCount; ++g) refresh_coefficients(g);
}

void Sampler::set_successes(const std::vector<int>& successes, const std::vector<int>& indicator) {
  if (static_cast<int>(successes.size()) != data_.size() ||
      static_cast<int>(indicator.size()) != data_.size()) {
    throw DimensionMismatch("set_successes: length differs from dataset");
  }
  data_.successes = successes;
  data_.validate();
  state_.indicator = indicator;
}

const Vector& Sampler::coefficients(int group) const {
  return group == 0 ? state_.beta : state_.gamma[group - 1];
}
Vector& Sampler::coefficients(int group) { return group == 0 ? state_.beta : state_.gamma[group - 1]; }

void Sampler::refresh_coefficients(int group) { regression_[group] = data_.design * coefficients(group); }

void Sampler::refresh_field(int field) {
  site_field_[field] = site_values(projectors_[field], state_.fields[field].values);
}

Vector Sampler::site_values(const spatial::GppProjector& projector, const Matrix& field) const {
  Vector out(data_.size());
  for (int t = 0; t < data_.periods; ++t) {
    out.segment(data_.period_begin(t), data_.period_size(t)) = projector.projection(t) * field.col(t);
  }
  return out;
}

LinearPredictors Sampler::linear_predictors() const {
  return mcmc::linear_predictors(state_, data_, projectors_, config_.model);
}

Vector Sampler::cdf_values() const {
  const int n = data_.size();
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    const double pi = logistic(regression_[0][i] + site_field_[0][i]);
    if (config_.model == ModelKind::BN) {
      out[i] = pi;
      continue;
    }
    const double psi0 = regression_[1][i] + site_field_[1][i];
    const double psi1 = regression_[2][i] + site_field_[2][i];
    const double lz = log_normalizer(psi0, psi1);
    out[i] = std::exp(psi1 - lz) + std::exp(-lz) * pi;
  }
  return out;
}

double Sampler::kappa(int i) const {
  return data_.successes[i] - 0.5 * data_.trials[i] + config_.kappa_shift;
}

Sampler::PseudoLikelihood Sampler::pseudo_likelihood(int group) const {
  const int n = data_.size();
  PseudoLikelihood pl{Vector::Zero(n), Vector::Zero(n)};
  if (group == 0) {
    for (int i = 0; i < n; ++i) {
      if (state_.indicator[i] != 2) continue;
      pl.a[i] = kappa(i);
      pl.w[i] = state_.omega[i];
    }
    return pl;
  }
  const int k = group - 1;
  const int other = 1 + (1 - k);
  const Vector& omega = state_.omega_k[k];
  for (int i = 0; i < n; ++i) {
    const double big_psi = softplus(regression_[other][i] + site_field_[other][i]);
    const double kappa_k = (state_.indicator[i] == k ? 1.0 : 0.0) - 0.5;
    pl.a[i] = kappa_k + omega[i] * big_psi;
    pl.w[i] = omega[i];
  }
  return pl;
}

GaussianConditional Sampler::coefficient_conditional(int group) const {
  const Vector& prior_mean = group == 0 ? priors_.beta_mean : priors_.gamma_mean[group - 1];
  const Matrix& prior_prec = group == 0 ? priors_.beta_precision : priors_.gamma_precision[group - 1];
  const PseudoLikelihood pl = pseudo_likelihood(group);
  const Matrix& x = data_.design;
  GaussianConditional c;
  c.precision = prior_prec + x.transpose() * (x.array().colwise() * pl.w.array()).matrix();
  c.lin = prior_prec * prior_mean +
          x.transpose() * (pl.a.array() - pl.w.array() * site_field_[group].array()).matrix();
  return c;
}

GaussianConditional Sampler::beta_conditional() const { return coefficient_conditional(0); }

GaussianConditional Sampler::gamma_conditional(int k) const { return coefficient_conditional(1 + k); }

FieldConditional Sampler::field_conditional(int field) const {
  const LatentField& f = state_.fields[field];
  const spatial::GppProjector& proj = projectors_[field];
  const int m = proj.knot_count();
  const int periods = data_.periods;
  const Matrix prior_block = f.tau * proj.knot_precision();
  const PseudoLikelihood pl = pseudo_likelihood(field);

  FieldConditional c;
  c.precision = linalg::BlockTridiagonalPrecision(periods, m);
  c.lin.assign(periods, Vector::Zero(m));
  for (int t = 0; t < periods; ++t) {
    const int begin = data_.period_begin(t);
    const int size = data_.period_size(t);
    const Matrix& d = proj.projection(t);
    const auto w = pl.w.segment(begin, size).array();
    c.precision.diag[t] = (t + 1 < periods ? 2.0 : 1.0) * prior_block +
                          d.transpose() * (d.array().colwise() * w).matrix();
    const Vector resid =
        (pl.a.segment(begin, size).array() - w * regression_[field].segment(begin, size).array()).matrix();
    c.lin[t] = d.transpose() * resid;
    if (t + 1 < periods) c.precision.offdiag[t] = -prior_block;
  }
  c.lin[0] += prior_block * f.start;
  return c;
}

GaussianConditional Sampler::start_conditional(int field) const {
  const LatentField& f = state_.fields[field];
  const Matrix& cinv = projectors_[field].knot_precision();
  GaussianConditional c;
  c.precision = 2.0 * f.tau * cinv;
  c.lin = f.tau * cinv * f.values.col(0);
  return c;
}

GammaConditional Sampler::tau_conditional(int field) const {
  const LatentField& f = state_.fields[field];
  const double shape0 = field == kFieldU ? priors_.tau_u_shape : priors_.tau_xi_shape[field - 1];
  const double rate0 = field == kFieldU ? priors_.tau_u_rate : priors_.tau_xi_rate[field - 1];
  const linalg::Cholesky& chol = projectors_[field].knot_cholesky();
  const double m = static_cast<double>(f.values.rows());
  const double quad = chol.inverse_quadratic_form(f.start) +
                      linalg::random_walk_trace_form(f.values, f.start, chol);
  return {shape0 + 0.5 * m * (data_.periods + 1), rate0 + 0.5 * quad};
}

double Sampler::field_log_likelihood(int field, const Vector& site_field) const {
  const int n = data_.size();
  double total = 0.0;
  if (field == kFieldU) {
    for (int i = 0; i < n; ++i) {
      if (state_.indicator[i] != 2) continue;
      total += log_binomial_pmf(data_.successes[i], data_.trials[i], regression_[0][i] + site_field[i]);
    }
    return total;
  }
  const int k = field - 1;
  const int other = 1 + (1 - k);
  for (int i = 0; i < n; ++i) {
    const int r = state_.indicator[i];
    const double psi_k = regression_[field][i] + site_field[i];
    const double psi_o = regression_[other][i] + site_field_[other][i];
    if (config_.phi_xi_target == PhiXiTarget::IndicatorOnly) {
      if (r == k) total += psi_k - log_normalizer(psi_k, psi_o);
      continue;
    }
    const double num = r == k ? psi_k : (r == 2 ? 0.0 : psi_o);
    total += num - log_normalizer(psi_k, psi_o);
  }
  return total;
}

double Sampler::phi_log_target(int field, const spatial::GppProjector& projector,
                               Vector* site_out) const {
  const LatentField& f = state_.fields[field];
  Vector site = site_values(projector, f.values);
  const linalg::Cholesky& chol = projector.knot_cholesky();
  const double value = field_log_likelihood(field, site) +
                       linalg::mvn_log_density(f.start, Vector::Zero(f.start.size()), chol, f.tau) +
                       linalg::random_walk_log_density(f.values, f.start, chol, f.tau);
  if (site_out) *site_out = std::move(site);
  return value;
}

double Sampler::phi_log_target(int field, double phi) const {
  if (!(phi > priors_.phi_lower && phi < priors_.phi_upper)) return kNegInf;
  if (phi == state_.fields[field].phi) return phi_log_target(field, projectors_[field], nullptr);
  return phi_log_target(field, spatial::GppProjector(sites_, knots_, phi), nullptr);
}

Vector Sampler::multinomial_pg_argument(int k) const {
  const int field = 1 + k;
  const int other = 1 + (1 - k);
  const int n = data_.size();
  Vector c(n);
  for (int i = 0; i < n; ++i) {
    c[i] = regression_[field][i] + site_field_[field][i] -
           softplus(regression_[other][i] + site_field_[other][i]);
  }
  return c;
}

std::array<double, 3> Sampler::indicator_probabilities(int i) const {
  const int y = data_.successes[i];
  const int n = data_.trials[i];
  const double l0 = y == 0 ? regression_[1][i] + site_field_[1][i] : kNegInf;
  const double l1 = y == n ? regression_[2][i] + site_field_[2][i] : kNegInf;
  const double l2 = log_binomial_pmf(y, n, regression_[0][i] + site_field_[0][i]);
  const double top = std::max({l0, l1, l2});
  const double e0 = std::exp(l0 - top), e1 = std::exp(l1 - top), e2 = std::exp(l2 - top);
  const double z = e0 + e1 + e2;
  return {e0 / z, e1 / z, e2 / z};
}

// -- updates ----------------------------------------------------------------

void Sampler::sample_indicators() {
  for (int i = 0; i < data_.size(); ++i) {
    const int y = data_.successes[i];
    if (y > 0 && y < data_.trials[i]) {
      state_.indicator[i] = 2;
      continue;
    }
    const auto p = indicator_probabilities(i);
    state_.indicator[i] = draw_categorical(p, rng_);
  }
}

void Sampler::sample_pg_binomial() {
  for (int i = 0; i < data_.size(); ++i) {
    if (config_.skip_unused_pg && state_.indicator[i] != 2) continue;
    state_.omega[i] = draw_pg(data_.trials[i], regression_[0][i] + site_field_[0][i], rng_, config_.pg);
  }
}

void Sampler::sample_beta() {
  const GaussianConditional c = beta_conditional();
  state_.beta = linalg::sample_mvn_from_precision_dense(c.lin, c.precision, rng_);
  refresh_coefficients(0);
}

void Sampler::sample_gamma(int k) {
  const GaussianConditional c = gamma_conditional(k);
  state_.gamma[k] = linalg::sample_mvn_from_precision_dense(c.lin, c.precision, rng_);
  refresh_coefficients(1 + k);
}

void Sampler::sample_field(int field) {
  const FieldConditional c = field_conditional(field);
  std::vector<Vector> blocks;
  if (config_.smoother == Smoother::McCausland) {
    blocks = linalg::sample_mccausland(c.lin, c.precision, rng_).draw;
  } else {
    blocks = linalg::split_blocks(linalg::sample_rue(linalg::stack_blocks(c.lin), c.precision, rng_),
                                  c.precision.blocks());
  }
  Matrix& values = state_.fields[field].values;
  for (int t = 0; t < data_.periods; ++t) values.col(t) = blocks[t];
  refresh_field(field);
}

void Sampler::sample_start(int field) {
  const GaussianConditional c = start_conditional(field);
  state_.fields[field].start = linalg::sample_mvn_from_precision_dense(c.lin, c.precision, rng_);
}

void Sampler::sample_tau(int field) {
  const GammaConditional c = tau_conditional(field);
  state_.fields[field].tau = draw_gamma(c.shape, c.rate, rng_);
}

double Sampler::phi_metropolis_step(int field, double proposal) {
  const double lo = priors_.phi_lower;
  const double hi = priors_.phi_upper;
  const double current = state_.fields[field].phi;
  last_accepted_[field] = false;
  last_alpha_[field] = 0.0;
  if (!(proposal > lo && proposal < hi)) return 0.0;

  spatial::GppProjector candidate(sites_, knots_, proposal);
  Vector candidate_site;
  double log_ratio = phi_log_target(field, candidate, &candidate_site) -
                     phi_log_target(field, projectors_[field], nullptr);
  if (config_.phi_proposal == PhiProposal::LogitScale) {
    log_ratio += std::log((proposal - lo) * (hi - proposal)) - std::log((current - lo) * (hi - current));
  }
  const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  last_alpha_[field] = alpha;
  if (alpha >= 1.0 || std::log(rng_.uniform()) < log_ratio) {
    state_.fields[field].phi = proposal;
    projectors_[field] = std::move(candidate);
    site_field_[field] = std::move(candidate_site);
    last_accepted_[field] = true;
  }
  return alpha;
}

double Sampler::sample_phi(int field) {
  const double lo = priors_.phi_lower;
  const double hi = priors_.phi_upper;
  const double current = state_.fields[field].phi;
  const double step = phi_step_[field];
  double proposal;
  if (config_.phi_proposal == PhiProposal::LogitScale) {
    const double theta = logit((current - lo) / (hi - lo)) + step * rng_.normal();
    proposal = lo + (hi - lo) * logistic(theta);
  } else {
    proposal = current + step * (hi - lo) * rng_.normal();
  }
  return phi_metropolis_step(field, proposal);
}

void Sampler::sample_pg_multinomial(int k) {
  const Vector c = multinomial_pg_argument(k);
  Vector& omega = state_.omega_k[k];
  for (int i = 0; i < data_.size(); ++i) omega[i] = draw_pg(1, c[i], rng_, config_.pg);
}

void Sampler::sweep() {
  const bool bib = config_.model == ModelKind::BIB;
  if (bib) sample_indicators();
  sample_pg_binomial();
  sample_beta();
  sample_field(kFieldU);
  sample_start(kFieldU);
  sample_tau(kFieldU);
  sample_phi(kFieldU);
  if (bib) {
    for (int k = 0; k < 2; ++k) {
      sample_pg_multinomial(k);
      sample_gamma(k);
      sample_field(1 + k);
      sample_start(1 + k);
      sample_tau(1 + k);
      sample_phi(1 + k);
    }
  }
  if (config_.check_invariants) check_state();
}

void Sampler::check_state() const {
  for (int i = 0; i < data_.size(); ++i) {
    const int r = state_.indicator[i];
    const int y = data_.successes[i];
    const bool ok = (r == 2) || (r == 0 && y == 0) || (r == 1 && y == data_.trials[i]);
    if (!ok) throw ChainError("indicator " + std::to_string(r) + " infeasible at observation " + std::to_string(i), -1);
    if (config_.model == ModelKind::BN && r != 2) throw ChainError("BN chain with r != 2", -1);
    if (!(state_.omega[i] > 0.0)) throw ChainError("non-positive PG latent", -1);
  }
  for (int f = 0; f < kFieldCount; ++f) {
    const LatentField& field = state_.fields[f];
    if (!(field.tau > 0.0) || !std::isfinite(field.tau)) throw ChainError("precision left (0, inf)", -1);
    if (!(field.phi > priors_.phi_lower && field.phi < priors_.phi_upper)) {
      throw ChainError("range left its prior support", -1);
    }
    if (!field.values.allFinite() || !field.start.allFinite()) throw ChainError("non-finite field", -1);
  }
}

// ---------------------------------------------------------------------------

int PosteriorDraws::column(const std::string& parameter, int index) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].parameter == parameter && columns[c].index == index) return static_cast<int>(c);
  }
  throw DimensionMismatch("no draw column " + parameter + "[" + std::to_string(index) + "]");
}

PosteriorDraws run_chain(const PanelDataset& data, const Priors& priors, const SamplerConfig& config,
                         const std::optional<spatial::KnotSet>& knots) {
  config.validate();
  data.validate();
  priors.validate(data.covariate_dim);
  spatial::KnotSet knot_set;
  if (knots) {
    knot_set = *knots;
  } else {
    RngStream knot_rng(config.seed, mix_keys({config.stream, kKnotStreamKey}));
    knot_set = spatial::select_knots(data.pooled_sites(), config.knot_count, knot_rng, config.kmeans);
  }

  Sampler sampler(data, priors, knot_set, config);
  const bool bib = config.model == ModelKind::BIB;
  const int q = data.covariate_dim;
  const int n = data.size();

  PosteriorDraws out;
  out.model = config.model;
  out.knots = knot_set;
  for (int j = 0; j < q; ++j) out.columns.push_back({"beta", j});
  if (bib) {
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < q; ++j) out.columns.push_back({"gamma" + std::to_string(k), j});
    }
  }
  const std::vector<int> active = bib ? std::vector<int>{kFieldU, kFieldXi0, kFieldXi1}
                                      : std::vector<int>{kFieldU};
  for (int f : active) out.columns.push_back({"tau_" + field_name(f), 0});
  for (int f : active) out.columns.push_back({"phi_" + field_name(f), 0});

  const int retained = (config.iterations - config.burn_in) / config.thin;
  out.values.resize(retained, static_cast<Eigen::Index>(out.columns.size()));
  out.cdf.resize(retained, n);
  if (config.store_components) {
    out.pi = Matrix(retained, n);
    out.p0 = Matrix(retained, n);
    out.p1 = Matrix(retained, n);
  }
  out.iterations.reserve(retained);

  std::array<long, kFieldCount> accepted{};
  long post_burn_steps = 0;
  int row = 0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    try {
      sampler.sweep();
    } catch (const Error& e) {
      throw ChainError(std::string(e.what()) + " (iteration " + std::to_string(iter) + ")", iter);
    }
    if (iter < config.burn_in) {
      if (config.adapt_phi) {
        const double gain = std::pow(iter + 1.0, -0.6);
        for (int f : active) {
          const double step = sampler.phi_step(f) * std::exp(gain * (sampler.last_phi_acceptance(f) - 0.44));
          sampler.set_phi_step(f, std::clamp(step, 1e-3, 10.0));
        }
      }
      continue;
    }
    ++post_burn_steps;
    for (int f : active) accepted[f] += sampler.last_phi_accepted(f) ? 1 : 0;
    if ((iter - config.burn_in + 1) % config.thin != 0) continue;

    const ChainState& s = sampler.state();
    int c = 0;
    for (int j = 0; j < q; ++j) out.values(row, c++) = s.beta[j];
    if (bib) {
      for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < q; ++j) out.values(row, c++) = s.gamma[k][j];
      }
    }
    for (int f : active) out.values(row, c++) = s.fields[f].tau;
    for (int f : active) out.values(row, c++) = s.fields[f].phi;
    out.cdf.row(row) = sampler.cdf_values().transpose();
    if (config.store_components) {
      const LinearPredictors lp = sampler.linear_predictors();
      out.pi->row(row) = lp.pi.transpose();
      out.p0->row(row) = lp.p0.transpose();
      out.p1->row(row) = lp.p1.transpose();
    }
    out.iterations.push_back(iter);
    ++row;
  }
  for (int f : active) {
    out.acceptance_rate[f] = post_burn_steps > 0 ? static_cast<double>(accepted[f]) / post_burn_steps : 0.0;
  }
  return out;
}

}  // namespace rstdr::mcmc
