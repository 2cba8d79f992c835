#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "rstdr/errors.hpp"
#include "rstdr/mcmc.hpp"

using namespace rstdr;
using namespace rstdr::mcmc;
using fixtures::random_matrix;

namespace {

SamplerConfig small_config(int knots, std::uint64_t seed = 1) {
  SamplerConfig c;
  c.knot_count = knots;
  c.seed = seed;
  c.iterations = 200;
  c.burn_in = 100;
  return c;
}

Observation single_obs(int period, double s1, int n, int y) {
  Observation o;
  o.period = period;
  o.location = {s1, 0.5};
  o.covariates = {1.0};
  o.trials = n;
  o.successes = y;
  return o;
}

/// Sampler on a single observation with x = 1 and one knot at the site.
Sampler one_site_sampler(int n, int y, std::uint64_t seed = 1) {
  const PanelDataset data = PanelDataset::from_observations({single_obs(1, 0.5, n, y)}, 1);
  return Sampler(data, Priors::defaults(1, 1.0), {{0.5, 0.5}}, small_config(1, seed));
}

ChainState zero_state(const Sampler& s) {
  ChainState st = s.state();
  st.beta.setZero();
  for (auto& g : st.gamma) g.setZero();
  for (auto& f : st.fields) {
    f.values.setZero();
    f.start.setZero();
  }
  return st;
}

Matrix difference_operator(int t) {
  Matrix h = Matrix::Identity(t, t);
  for (int i = 1; i < t; ++i) h(i, i - 1) = -1.0;
  return h;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector stacked(const Matrix& field) { return Eigen::Map<const Vector>(field.data(), field.size()); }

double kernel(const FieldConditional& c, const Vector& x) {
  const Vector lin = linalg::stack_blocks(c.lin);
  return lin.dot(x) - 0.5 * x.dot(c.precision.densify() * x);
}

/// A random small instance: q = 2, T = 3, M = 2 (MT = 6), mixed boundary counts.
struct Instance {
  PanelDataset data;
  Priors priors;
  spatial::KnotSet knots;
  ChainState state;

  explicit Instance(std::uint64_t seed, int periods = 3, int sites = 5, int m = 2) {
    RngStream rng(seed, 0);
    data = fixtures::random_panel(periods, sites, 2, 8, rng, 0.4);
    priors = Priors::defaults(2, 1.0);
    priors.beta_mean = Vector::Constant(2, 0.3);
    priors.beta_precision = Matrix::Identity(2, 2) * 0.7;
    priors.gamma_mean[0] = Vector::Constant(2, -0.2);
    priors.gamma_precision[1] = Matrix::Identity(2, 2) * 1.3;
    priors.tau_u_shape = 2.0;
    priors.tau_xi_rate[1] = 0.5;
    for (int j = 0; j < m; ++j) knots.push_back({rng.uniform(), rng.uniform()});
    state = fixtures::random_state(data, priors, m, rng);
  }

  Sampler sampler(SamplerConfig cfg = {}) const {
    cfg.knot_count = static_cast<int>(knots.size());
    Sampler s(data, priors, knots, cfg);
    s.set_state(state);
    return s;
  }

  Vector field_at(int f, const Matrix& values) const {
    LatentField lf = state.fields[f];
    lf.values = values;
    return fixtures::site_field(data, knots, lf);
  }
};

/// Pseudo-likelihood of predictor group g with nu = predictor values.
double pseudo_loglik(const Instance& in, int group, const Vector& nu) {
  const ChainState& s = in.state;
  double total = 0.0;
  for (int i = 0; i < in.data.size(); ++i) {
    if (group == 0) {
      if (s.indicator[i] != 2) continue;
      const double kappa = in.data.successes[i] - 0.5 * in.data.trials[i];
      total += kappa * nu[i] - 0.5 * s.omega[i] * nu[i] * nu[i];
      continue;
    }
    const int k = group - 1;
    const int other = 1 - k;
    const double psi_other =
        in.data.design.row(i).dot(s.gamma[other]) + in.field_at(1 + other, s.fields[1 + other].values)[i];
    const double big_psi = std::log1p(std::exp(psi_other));
    const double kappa_k = (s.indicator[i] == k ? 1.0 : 0.0) - 0.5;
    const double v = nu[i] - big_psi;
    total += kappa_k * v - 0.5 * s.omega_k[k][i] * v * v;
  }
  return total;
}

}  // namespace

// -- indicators, PG latents, predictors --------------------------------------

TEST_CASE("indicator probabilities at interior and boundary counts") {
  Sampler interior = one_site_sampler(10, 3);
  const auto p = interior.indicator_probabilities(0);
  CHECK(p[2] == 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    interior.sample_indicators();
    CHECK(interior.state().indicator[0] == 2);
  }

  Sampler zero = one_site_sampler(10, 0);
  zero.set_state(zero_state(zero));  // eta = psi0 = psi1 = 0
  const auto p0 = zero.indicator_probabilities(0);
  CHECK(p0[0] == doctest::Approx(1.0 / (1.0 + std::pow(0.5, 10))).epsilon(1e-12));
  CHECK(p0[0] == doctest::Approx(0.999024).epsilon(1e-6));
  CHECK(p0[1] == 0.0);

  Sampler full = one_site_sampler(10, 10);
  ChainState st = zero_state(full);
  st.beta[0] = 40.0;                 // pi -> 1
  st.gamma[1][0] = std::log(2.0);    // e^psi1 = 2
  full.set_state(st);
  const auto p1 = full.indicator_probabilities(0);
  CHECK(p1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(p1[0] == 0.0);
}

TEST_CASE("indicator draws follow their probabilities") {
  Sampler s = one_site_sampler(4, 0, 7);
  ChainState st = zero_state(s);
  st.beta[0] = 0.8;
  st.gamma[0][0] = -1.5;
  s.set_state(st);
  const double expected = s.indicator_probabilities(0)[0];
  int zeros = 0;
  const int n = 40000;
  for (int rep = 0; rep < n; ++rep) {
    s.sample_indicators();
    zeros += s.state().indicator[0] == 0;
  }
  CHECK(std::abs(zeros / double(n) - expected) < 4.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST_CASE("binomial-part PG latents") {
  {
    Sampler s = one_site_sampler(1, 1);
    s.set_state(zero_state(s));
    double sum = 0.0;
    const int n = 100000;
    for (int rep = 0; rep < n; ++rep) {
      s.sample_pg_binomial();
      sum += s.state().omega[0];
    }
    CHECK(std::abs(sum / n - 0.25) < 0.005);
  }
  {
    Sampler s = one_site_sampler(60, 30);
    ChainState st = zero_state(s);
    st.beta[0] = 1.0;
    s.set_state(st);
    double sum = 0.0;
    const int n = 10000;
    for (int rep = 0; rep < n; ++rep) {
      s.sample_pg_binomial();
      sum += s.state().omega[0];
    }
    CHECK(std::abs(sum / n - 30.0 * std::tanh(0.5)) < 0.1);
    CHECK(std::abs(sum / n - 13.863) < 0.1);
  }
  Instance in(3);
  Sampler a = in.sampler(), b = in.sampler();
  a.sample_pg_binomial();
  b.sample_pg_binomial();
  CHECK(a.state().omega == b.state().omega);
  CHECK((a.state().omega.array() > 0.0).all());
}

TEST_CASE("multinomial PG argument and draws") {
  Sampler s = one_site_sampler(5, 2);
  ChainState st = zero_state(s);
  st.gamma[0][0] = 1.0;
  s.set_state(st);
  CHECK(s.multinomial_pg_argument(0)[0] == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  CHECK(s.multinomial_pg_argument(0)[0] == doctest::Approx(0.3069).epsilon(1e-4));
  CHECK(s.multinomial_pg_argument(1)[0] == doctest::Approx(-std::log1p(std::exp(1.0))).epsilon(1e-12));

  // psi_k = Psi_k gives PG(1, 0).
  st = zero_state(s);
  st.gamma[0][0] = std::log(2.0);
  s.set_state(st);
  CHECK(std::abs(s.multinomial_pg_argument(0)[0]) < 1e-14);
  double sum = 0.0;
  const int n = 50000;
  for (int rep = 0; rep < n; ++rep) {
    s.sample_pg_multinomial(0);
    sum += s.state().omega_k[0][0];
  }
  CHECK(std::abs(sum / n - 0.25) < 0.006);

  Instance in(4);
  Sampler a = in.sampler(), b = in.sampler();
  a.sample_pg_multinomial(1);
  b.sample_pg_multinomial(1);
  CHECK(a.state().omega_k[1] == b.state().omega_k[1]);
}

// -- coefficient conditionals --------------------------------------------

TEST_CASE("beta conditional: scalar example and prior-only case") {
  const PanelDataset data = PanelDataset::from_observations({single_obs(1, 0.5, 2, 2)}, 1);
  Priors priors = Priors::defaults(1, 1.0);
  priors.beta_precision(0, 0) = 1e-6;
  Sampler s(data, priors, {{0.5, 0.5}}, small_config(1));
  ChainState st = zero_state(s);
  st.indicator[0] = 2;
  st.omega[0] = 2.0;  // kappa = y - n/2 = 1
  s.set_state(st);
  const GaussianConditional c = s.beta_conditional();
  CHECK(c.mean()[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(1.0 / c.precision(0, 0) == doctest::Approx(0.5).epsilon(1e-5));

  // No r = 2 rows: the conditional is the prior.
  Instance in(5);
  ChainState none = in.state;
  for (int i = 0; i < in.data.size(); ++i) {
    if (in.data.successes[i] == 0) none.indicator[i] = 0;
    if (in.data.successes[i] == in.data.trials[i]) none.indicator[i] = 1;
  }
  Instance boundary = in;
  for (int i = 0; i < in.data.size(); ++i) {
    if (none.indicator[i] == 2) boundary.data.successes[i] = 0, none.indicator[i] = 0;
  }
  boundary.state = none;
  Sampler prior_only = boundary.sampler();
  const GaussianConditional pc = prior_only.beta_conditional();
  CHECK((pc.precision - in.priors.beta_precision).norm() < 1e-14);
  CHECK((pc.mean() - in.priors.beta_mean).norm() < 1e-12);
}

TEST_CASE("beta conditional matches prior x augmented likelihood at random points") {
  for (std::uint64_t seed : {11, 12, 13}) {
    Instance in(seed);
    const Sampler s = in.sampler();
    const GaussianConditional c = s.beta_conditional();
    const Vector u = in.field_at(kFieldU, in.state.u().values);
    const Matrix prior_cov = in.priors.beta_precision.inverse();
    auto brute = [&](const Vector& beta) {
      return fixtures::log_normal(beta, in.priors.beta_mean, prior_cov) +
             pseudo_loglik(in, 0, in.data.design * beta + u);
    };
    RngStream rng(seed, 1);
    const Vector ref = random_matrix(2, 1, rng).col(0);
    for (int p = 0; p < 20; ++p) {
      const Vector b = random_matrix(2, 1, rng, 2.0).col(0);
      CHECK(std::abs((c.log_kernel(b) - c.log_kernel(ref)) - (brute(b) - brute(ref))) < 1e-8);
    }
  }
}

TEST_CASE("gamma conditional: scalar example") {
  const PanelDataset data = PanelDataset::from_observations({single_obs(1, 0.5, 5, 0)}, 1);
  Priors priors = Priors::defaults(1, 1.0);
  priors.gamma_precision[0](0, 0) = 1e-6;
  Sampler s(data, priors, {{0.5, 0.5}}, small_config(1));
  ChainState st = zero_state(s);
  st.indicator[0] = 0;       // kappa_0 = 1/2
  st.omega_k[0][0] = 1.0;
  st.gamma[1][0] = -800.0;   // Psi_0 = log(1 + e^psi1) -> 0
  s.set_state(st);
  const GaussianConditional c = s.gamma_conditional(0);
  CHECK(c.mean()[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(1.0 / c.precision(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("gamma conditionals match prior x augmented likelihood at random points") {
  for (std::uint64_t seed : {21, 22}) {
    Instance in(seed);
    const Sampler s = in.sampler();
    for (int k = 0; k < 2; ++k) {
      const GaussianConditional c = s.gamma_conditional(k);
      const Vector xi = in.field_at(1 + k, in.state.xi(k).values);
      const Matrix prior_cov = in.priors.gamma_precision[k].inverse();
      auto brute = [&](const Vector& g) {
        return fixtures::log_normal(g, in.priors.gamma_mean[k], prior_cov) +
               pseudo_loglik(in, 1 + k, in.data.design * g + xi);
      };
      RngStream rng(seed, 2 + k);
      const Vector ref = random_matrix(2, 1, rng).col(0);
      for (int p = 0; p < 20; ++p) {
        const Vector g = random_matrix(2, 1, rng, 2.0).col(0);
        CHECK(std::abs((c.log_kernel(g) - c.log_kernel(ref)) - (brute(g) - brute(ref))) < 1e-8);
      }
    }
  }
}

// -- field, start, precision ---------------------------------------------

TEST_CASE("field conditionals match prior random walk x augmented likelihood") {
  for (std::uint64_t seed : {31, 32}) {
    Instance in(seed);
    const Sampler s = in.sampler();
    const int m = 2, T = in.data.periods;
    for (int f = 0; f < kFieldCount; ++f) {
      CAPTURE(f);
      const FieldConditional c = s.field_conditional(f);
      const LatentField& lf = in.state.fields[f];
      const Matrix cov = spatial::knot_covariance(in.knots, lf.phi) / lf.tau;
      const Matrix& coef_design = in.data.design;
      const Vector coef = f == 0 ? in.state.beta : in.state.gamma[f - 1];
      auto brute = [&](const Matrix& values) {
        double prior = 0.0;
        Vector prev = lf.start;
        for (int t = 0; t < T; ++t) {
          prior += fixtures::log_normal(values.col(t), prev, cov);
          prev = values.col(t);
        }
        return prior + pseudo_loglik(in, f, coef_design * coef + in.field_at(f, values));
      };
      RngStream rng(seed, 10 + f);
      const Matrix ref = random_matrix(m, T, rng);
      for (int p = 0; p < 20; ++p) {
        const Matrix v = random_matrix(m, T, rng, 1.5);
        CHECK(std::abs((kernel(c, stacked(v)) - kernel(c, stacked(ref))) - (brute(v) - brute(ref))) < 1e-8);
      }
    }
  }
}

TEST_CASE("field conditional mean equals the dense oracle for one knot, two periods, one observation") {
  const PanelDataset data = PanelDataset::from_observations({single_obs(2, 0.3, 6, 4)}, 2);
  Priors priors = Priors::defaults(1, 1.0);
  Sampler s(data, priors, {{0.6, 0.5}}, small_config(1));
  ChainState st = zero_state(s);
  st.beta[0] = 0.4;
  st.u().tau = 1.7;
  st.u().start[0] = 0.9;
  st.omega[0] = 1.3;
  st.u().phi = 0.8;
  s.set_state(st);

  const double tau = 1.7;
  const double cinv = 1.0;  // single knot: C = [[1]]
  const double d = std::exp(-0.3 / 0.8);
  const Matrix h = difference_operator(2);
  Matrix dbar = Matrix::Zero(1, 2);
  dbar(0, 1) = d;  // observation lives in period 2
  const Matrix q = tau * cinv * h.transpose() * h + dbar.transpose() * 1.3 * dbar;
  const Vector start = Vector::Constant(2, 0.9);
  const double kappa = 4 - 3.0;
  const Vector m = tau * cinv * h.transpose() * h * start + dbar.transpose() * Vector::Constant(1, kappa - 1.3 * 0.4);
  const Vector oracle = q.inverse() * m;

  const FieldConditional c = s.field_conditional(kFieldU);
  const Vector mean = c.precision.densify().llt().solve(linalg::stack_blocks(c.lin));
  CHECK((mean - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c.precision.densify() - q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("field precision equals the Kronecker assembly") {
  Instance in(41, 4, 3, 3);
  const Sampler s = in.sampler();
  const int T = 4, m = 3;
  const LatentField& lf = in.state.u();
  const Matrix cinv = spatial::knot_covariance(in.knots, lf.phi).inverse();
  Matrix dbar = Matrix::Zero(in.data.size(), m * T);
  const auto by_period = in.data.sites_by_period();
  Vector w = Vector::Zero(in.data.size());
  for (int t = 0; t < T; ++t) {
    const Matrix d = spatial::cross_correlation(by_period[t], in.knots, lf.phi) * cinv;
    dbar.block(in.data.period_begin(t), t * m, d.rows(), m) = d;
  }
  for (int i = 0; i < in.data.size(); ++i) w[i] = in.state.indicator[i] == 2 ? in.state.omega[i] : 0.0;
  const Matrix h = difference_operator(T);
  const Matrix direct = lf.tau * kron(h.transpose() * h, cinv) + dbar.transpose() * w.asDiagonal() * dbar;
  CHECK((s.field_conditional(kFieldU).precision.densify() - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("block samplers solve the assembled field systems exactly") {
  Instance in(42, 4, 4, 2);
  SamplerConfig cfg;
  Sampler s = in.sampler(cfg);
  for (int sweep = 0; sweep < 5; ++sweep) {
    s.sweep();
    for (int f = 0; f < kFieldCount; ++f) {
      const FieldConditional c = s.field_conditional(f);
      const Vector m = linalg::stack_blocks(c.lin);
      const Vector dense = c.precision.densify().llt().solve(m);
      CHECK((linalg::sample_rue(m, c.precision, s.rng(), false) - dense).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((linalg::stack_blocks(linalg::sample_mccausland(c.lin, c.precision, s.rng(), false).draw) - dense)
                .cwiseAbs()
                .maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("with no r = 2 rows the u field is drawn from its random-walk prior") {
  std::vector<Observation> obs{single_obs(1, 0.2, 5, 0), single_obs(2, 0.4, 5, 0), single_obs(3, 0.6, 5, 5)};
  const PanelDataset data = PanelDataset::from_observations(obs, 3);
  Sampler s(data, Priors::defaults(1, 1.0), {{0.5, 0.5}}, small_config(1));
  ChainState st = zero_state(s);
  st.indicator = {0, 0, 1};
  st.u().start[0] = 1.5;
  st.u().tau = 2.0;
  s.set_state(st);
  const int n = 40000;
  Vector sum = Vector::Zero(3);
  Matrix sq = Matrix::Zero(3, 3);
  for (int rep = 0; rep < n; ++rep) {
    s.sample_field(kFieldU);
    const Vector v = stacked(s.state().u().values);
    sum += v;
    sq += v * v.transpose();
  }
  const Vector mean = sum / n;
  const Matrix cov = sq / n - mean * mean.transpose();
  const Matrix h = difference_operator(3);
  const Matrix expected = (h.transpose() * h).inverse() / 2.0;  // tau^{-1} (H^T H)^{-1} kron C, C = 1
  for (int t = 0; t < 3; ++t) CHECK(std::abs(mean[t] - 1.5) < 4.0 * std::sqrt(expected(t, t) / n));
  CHECK((cov - expected).cwiseAbs().maxCoeff() < 2e-2);
}

TEST_CASE("start conditional") {
  Instance in(51);
  const Sampler s = in.sampler();
  for (int f = 0; f < kFieldCount; ++f) {
    const LatentField& lf = in.state.fields[f];
    const Matrix cov = spatial::knot_covariance(in.knots, lf.phi) / lf.tau;
    const GaussianConditional c = s.start_conditional(f);
    auto brute = [&](const Vector& x) {
      return fixtures::log_normal(x, Vector::Zero(2), cov) + fixtures::log_normal(lf.values.col(0), x, cov);
    };
    RngStream rng(51, f);
    const Vector ref = random_matrix(2, 1, rng).col(0);
    for (int p = 0; p < 20; ++p) {
      const Vector x = random_matrix(2, 1, rng, 2.0).col(0);
      CHECK(std::abs((c.log_kernel(x) - c.log_kernel(ref)) - (brute(x) - brute(ref))) < 1e-8);
    }
    CHECK((c.mean() - lf.values.col(0) / 2.0).norm() < 1e-10);
  }

  Sampler one = one_site_sampler(5, 2, 3);
  ChainState st = zero_state(one);
  st.u().tau = 2.0;
  st.u().values(0, 0) = 2.0;
  one.set_state(st);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int rep = 0; rep < n; ++rep) {
    one.sample_start(kFieldU);
    const double x = one.state().u().start[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 1.0) < 4.0 * 0.5 / std::sqrt(double(n)));
  CHECK(std::abs(sq / n - mean * mean - 0.25) < 0.01);
}

TEST_CASE("precision conditional shapes and rates") {
  {
    RngStream rng(61, 0);
    PanelDataset data = fixtures::random_panel(10, 3, 1, 5, rng);
    Priors priors = Priors::defaults(1, 1.0);
    priors.tau_u_shape = 2.0;
    Sampler s(data, priors, {{0.2, 0.2}, {0.7, 0.7}}, small_config(2));
    CHECK(s.tau_conditional(kFieldU).shape == 13.0);
    s.set_state(zero_state(s));
    CHECK(s.tau_conditional(kFieldU).rate == priors.tau_u_rate);
  }
  {
    RngStream rng(62, 0);
    PanelDataset data = fixtures::random_panel(4, 4, 1, 5, rng);
    Priors priors = Priors::defaults(1, 1.0);
    priors.tau_xi_shape = {1.0, 1.0};
    Sampler s(data, priors, {{0.2, 0.2}, {0.7, 0.7}, {0.1, 0.9}}, small_config(3));
    CHECK(s.tau_conditional(kFieldXi0).shape == 8.5);
    CHECK(s.tau_conditional(kFieldXi1).shape == 8.5);
  }
  Instance in(63, 3, 4, 2);
  const Sampler s = in.sampler();
  const Matrix h = difference_operator(3);
  for (int f = 0; f < kFieldCount; ++f) {
    const LatentField& lf = in.state.fields[f];
    const Matrix cinv = spatial::knot_covariance(in.knots, lf.phi).inverse();
    const Vector centered = stacked(lf.values) - linalg::h_inverse_stack(lf.start, 3);
    const double quad = lf.start.dot(cinv * lf.start) + centered.dot(kron(h.transpose() * h, cinv) * centered);
    const double shape0 = f == 0 ? in.priors.tau_u_shape : in.priors.tau_xi_shape[f - 1];
    const double rate0 = f == 0 ? in.priors.tau_u_rate : in.priors.tau_xi_rate[f - 1];
    const GammaConditional g = s.tau_conditional(f);
    CHECK(g.shape == shape0 + 2 * (3 + 1) / 2.0);
    CHECK(std::abs(g.rate - (rate0 + 0.5 * quad)) < 1e-8);
  }
}

// -- range updates -------------------------------------------------------

TEST_CASE("range log targets match direct evaluation") {
  Instance in(71);
  for (PhiXiTarget target : {PhiXiTarget::FullMultinomial, PhiXiTarget::IndicatorOnly}) {
    SamplerConfig cfg;
    cfg.phi_xi_target = target;
    const Sampler s = in.sampler(cfg);
    for (int f = 0; f < kFieldCount; ++f) {
      const LatentField& lf = in.state.fields[f];
      auto brute = [&](double phi) {
        LatentField moved = lf;
        moved.phi = phi;
        const Vector site = fixtures::site_field(in.data, in.knots, moved);
        const Matrix cov = spatial::knot_covariance(in.knots, phi) / lf.tau;
        double value = fixtures::log_normal(lf.start, Vector::Zero(2), cov);
        Vector prev = lf.start;
        for (int t = 0; t < in.data.periods; ++t) {
          value += fixtures::log_normal(lf.values.col(t), prev, cov);
          prev = lf.values.col(t);
        }
        for (int i = 0; i < in.data.size(); ++i) {
          const int r = in.state.indicator[i];
          if (f == 0) {
            if (r != 2) continue;
            const double eta = in.data.design.row(i).dot(in.state.beta) + site[i];
            value += fixtures::log_binomial(in.data.successes[i], in.data.trials[i], 1.0 / (1.0 + std::exp(-eta)));
            continue;
          }
          const int k = f - 1;
          const int o = 1 - k;
          const double psi_k = in.data.design.row(i).dot(in.state.gamma[k]) + site[i];
          const double psi_o = in.data.design.row(i).dot(in.state.gamma[o]) +
                               in.field_at(1 + o, in.state.fields[1 + o].values)[i];
          const double z = 1.0 + std::exp(psi_k) + std::exp(psi_o);
          const double pk = std::exp(psi_k) / z, po = std::exp(psi_o) / z;
          if (target == PhiXiTarget::IndicatorOnly) {
            if (r == k) value += std::log(pk);
          } else {
            value += std::log(r == k ? pk : (r == 2 ? 1.0 - pk - po : po));
          }
        }
        return value;
      };
      const double lo = in.priors.phi_lower, hi = in.priors.phi_upper;
      for (double frac : {0.1, 0.35, 0.6, 0.9}) {
        const double a = lo + frac * (hi - lo), b = lo + (1.0 - frac) * 0.5 * (hi - lo);
        CHECK(std::abs((s.phi_log_target(f, a) - s.phi_log_target(f, b)) - (brute(a) - brute(b))) < 1e-8);
      }
      CHECK(std::isinf(s.phi_log_target(f, hi + 0.1)));
      CHECK(std::isinf(s.phi_log_target(f, lo)));
    }
  }
}

TEST_CASE("range proposal at the current value is always accepted") {
  Instance in(72);
  Sampler s = in.sampler();
  for (int f = 0; f < kFieldCount; ++f) {
    const double phi = s.state().fields[f].phi;
    CHECK(s.phi_metropolis_step(f, phi) == 1.0);
    CHECK(s.last_phi_accepted(f));
    CHECK(s.state().fields[f].phi == phi);
  }
}

TEST_CASE("raw-scale proposals outside the prior support are rejected") {
  Instance in(73);
  SamplerConfig cfg;
  cfg.phi_proposal = PhiProposal::RawScale;
  Sampler s = in.sampler(cfg);
  const ChainState before = s.state();
  const Vector field_before = s.linear_predictors().eta;
  CHECK(s.phi_metropolis_step(kFieldU, in.priors.phi_upper + 0.01) == 0.0);
  CHECK(s.phi_metropolis_step(kFieldU, in.priors.phi_lower - 0.01) == 0.0);
  CHECK(!s.last_phi_accepted(kFieldU));
  CHECK(s.state().u().phi == before.u().phi);
  CHECK(s.linear_predictors().eta == field_before);
  // Large raw steps keep the chain inside the support.
  s.set_phi_step(kFieldU, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    s.sample_phi(kFieldU);
    CHECK(s.state().u().phi > in.priors.phi_lower);
    CHECK(s.state().u().phi < in.priors.phi_upper);
  }
}

TEST_CASE("accepted range moves refresh the projected field") {
  Instance in(74);
  Sampler s = in.sampler();
  const double phi = s.state().u().phi;
  const double proposal = phi * 1.05;
  double alpha = 0.0;
  for (int tries = 0; tries < 200 && !s.last_phi_accepted(kFieldU); ++tries) alpha = s.phi_metropolis_step(kFieldU, proposal);
  REQUIRE(s.last_phi_accepted(kFieldU));
  CHECK(alpha > 0.0);
  CHECK(s.state().u().phi == proposal);
  const Vector expected = in.data.design * in.state.beta + fixtures::site_field(in.data, in.knots, s.state().u());
  CHECK((s.linear_predictors().eta - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single-knot two-period toy has a reasonable range acceptance rate") {
  // The u range is identified through the decay of the projected field away
  // from the knot, so the toy carries a clear spatial signal.
  RngStream rng(75, 0);
  const spatial::Point knot{0.5, 0.5};
  std::vector<Observation> obs;
  for (int t = 1; t <= 2; ++t) {
    const double amplitude = t == 1 ? 3.0 : -3.0;
    for (int i = 0; i < 40; ++i) {
      Observation o;
      o.period = t;
      o.site = i;
      o.location = {rng.uniform(), rng.uniform()};
      o.covariates = {1.0};
      o.trials = 100;
      const double u = amplitude * std::exp(-spatial::distance(o.location, knot) / 0.3);
      o.successes = draw_binomial(o.trials, logistic(u), rng);
      obs.push_back(o);
    }
  }
  const PanelDataset data = PanelDataset::from_observations(obs, 2);
  const Priors priors = Priors::defaults(1, spatial::max_pairwise_distance(data.pooled_sites()));
  SamplerConfig cfg = small_config(1, 75);
  cfg.iterations = 1500;
  cfg.burn_in = 500;
  for (ModelKind model : {ModelKind::BN, ModelKind::BIB}) {
    cfg.model = model;
    const PosteriorDraws d = run_chain(data, priors, cfg, spatial::KnotSet{knot});
    CHECK(d.acceptance_rate[kFieldU] > 0.1);
    CHECK(d.acceptance_rate[kFieldU] < 0.7);
  }
}

// -- sweeps and chains ---------------------------------------------------

TEST_CASE("sweeps are deterministic and preserve the state invariants") {
  Instance in(81, 3, 6, 2);
  SamplerConfig cfg;
  cfg.check_invariants = true;
  Sampler a = in.sampler(cfg), b = in.sampler(cfg);
  for (int sweep = 0; sweep < 30; ++sweep) {
    a.sweep();
    b.sweep();
    CHECK_NOTHROW(a.check_state());
    for (int i = 0; i < in.data.size(); ++i) {
      const int y = in.data.successes[i];
      if (y > 0 && y < in.data.trials[i]) CHECK(a.state().indicator[i] == 2);
    }
    const Vector cdf = a.cdf_values();
    CHECK((cdf.array() > 0.0).all());
    CHECK((cdf.array() < 1.0).all());
  }
  CHECK(a.state().beta == b.state().beta);
  CHECK(a.state().xi(1).values == b.state().xi(1).values);
  CHECK(a.state().indicator == b.state().indicator);
  CHECK(a.state().omega_k[0] == b.state().omega_k[0]);
}

TEST_CASE("check_state rejects infeasible indicators") {
  Instance in(82);
  Sampler s = in.sampler();
  ChainState st = in.state;
  for (int i = 0; i < in.data.size(); ++i) {
    const int y = in.data.successes[i];
    if (y > 0 && y < in.data.trials[i]) {
      st.indicator[i] = 0;
      break;
    }
  }
  s.set_state(st);
  CHECK_THROWS_AS(s.check_state(), ChainError);
}

TEST_CASE("BN sweeps touch only the binomial part") {
  Instance in(83);
  SamplerConfig cfg;
  cfg.model = ModelKind::BN;
  cfg.knot_count = 2;
  Sampler s(in.data, in.priors, in.knots, cfg);
  const ChainState init = s.state();
  for (int i = 0; i < in.data.size(); ++i) CHECK(init.indicator[i] == 2);
  for (int sweep = 0; sweep < 20; ++sweep) s.sweep();
  const ChainState& st = s.state();
  CHECK(st.beta != init.beta);
  CHECK(st.u().tau != init.u().tau);
  for (int k = 0; k < 2; ++k) {
    CHECK(st.gamma[k] == init.gamma[k]);
    CHECK(st.xi(k).values == init.xi(k).values);
    CHECK(st.xi(k).start == init.xi(k).start);
    CHECK(st.xi(k).tau == init.xi(k).tau);
    CHECK(st.xi(k).phi == init.xi(k).phi);
    CHECK(st.omega_k[k] == init.omega_k[k]);
  }
  CHECK(st.indicator == init.indicator);
  const LinearPredictors lp = s.linear_predictors();
  CHECK((s.cdf_values() - lp.pi).norm() == 0.0);
}

TEST_CASE("initial state follows the documented defaults") {
  RngStream rng(84, 0);
  const PanelDataset data = fixtures::random_panel(3, 30, 2, 4, rng, 0.6);
  const Priors priors = Priors::defaults(2, 1.0);
  RngStream init_rng(84, 1);
  const ChainState s = initial_state(data, priors, 3, ModelKind::BIB, init_rng);
  CHECK(s.beta == Vector::Zero(2));
  CHECK(s.gamma[1] == Vector::Zero(2));
  for (const auto& f : s.fields) {
    CHECK(f.values == Matrix::Zero(3, 3));
    CHECK(f.start == Vector::Zero(3));
    CHECK(f.tau == 1.0);
    CHECK(f.phi == doctest::Approx(0.5 * (priors.phi_lower + priors.phi_upper)));
  }
  int boundary = 0, boundary_at_two = 0;
  for (int i = 0; i < data.size(); ++i) {
    const int y = data.successes[i], n = data.trials[i];
    if (y == 0 || y == n) {
      ++boundary;
      boundary_at_two += s.indicator[i] == 2;
      CHECK((s.indicator[i] == 2 || s.indicator[i] == (y == 0 ? 0 : 1)));
    } else {
      CHECK(s.indicator[i] == 2);
    }
  }
  CHECK(boundary > 10);
  CHECK(boundary_at_two > 0);
  CHECK(boundary_at_two < boundary);
}

TEST_CASE("run_chain bookkeeping") {
  RngStream rng(91, 0);
  const PanelDataset data = fixtures::random_panel(2, 6, 2, 10, rng);
  const Priors priors = Priors::defaults(2, spatial::max_pairwise_distance(data.pooled_sites()));
  SamplerConfig cfg = small_config(3, 91);
  cfg.iterations = 1000;
  cfg.burn_in = 500;
  cfg.store_components = true;
  const PosteriorDraws d = run_chain(data, priors, cfg);
  CHECK(d.draw_count() == 500);
  CHECK(d.values.rows() == 500);
  CHECK(d.cdf.rows() == 500);
  CHECK(d.cdf.cols() == data.size());
  CHECK(d.iterations.front() == 500);
  CHECK(d.iterations.back() == 999);
  CHECK(d.knots.size() == 3);
  CHECK(d.column("beta", 1) == 1);
  CHECK(d.column("gamma1", 0) == 4);
  CHECK(d.column("phi_xi1") == static_cast<int>(d.columns.size()) - 1);
  CHECK_THROWS_AS(d.column("beta", 7), DimensionMismatch);
  CHECK((d.cdf.array() > 0.0).all());
  CHECK((d.cdf.array() < 1.0).all());
  const Matrix mix = d.p1->array() + (1.0 - d.p0->array() - d.p1->array()) * d.pi->array();
  CHECK((mix - d.cdf).cwiseAbs().maxCoeff() < 1e-12);

  cfg.thin = 3;
  cfg.store_components = false;
  const PosteriorDraws thinned = run_chain(data, priors, cfg);
  CHECK(thinned.draw_count() == 500 / 3);
  CHECK(!thinned.pi.has_value());
  CHECK((thinned.iterations[1] - thinned.iterations[0]) == 3);

  cfg.model = ModelKind::BN;
  cfg.thin = 1;
  const PosteriorDraws bn = run_chain(data, priors, cfg);
  CHECK(bn.columns.size() == 4);  // beta[0], beta[1], tau_u, phi_u
  CHECK_THROWS_AS(bn.column("gamma0", 0), DimensionMismatch);

  SamplerConfig bad = cfg;
  bad.burn_in = bad.iterations;
  CHECK_THROWS_AS(run_chain(data, priors, bad), ConfigError);
  bad = cfg;
  bad.knot_count = 100;
  CHECK_THROWS_AS(run_chain(data, priors, bad), TooManyKnots);
}

TEST_CASE("run_chain is reproducible and both smoothers run") {
  RngStream rng(92, 0);
  const PanelDataset data = fixtures::random_panel(3, 5, 1, 10, rng);
  const Priors priors = Priors::defaults(1, spatial::max_pairwise_distance(data.pooled_sites()));
  SamplerConfig cfg = small_config(2, 92);
  const PosteriorDraws a = run_chain(data, priors, cfg), b = run_chain(data, priors, cfg);
  CHECK(a.values == b.values);
  CHECK(a.cdf == b.cdf);
  cfg.smoother = Smoother::Rue;
  const PosteriorDraws rue = run_chain(data, priors, cfg);
  CHECK(rue.values.allFinite());
  CHECK(rue.values != a.values);
  cfg.smoother = Smoother::McCausland;
  cfg.stream = 1;
  CHECK(run_chain(data, priors, cfg).values != a.values);
}

TEST_CASE("numerical failures inside a chain carry the iteration index") {
  RngStream rng(93, 0);
  const PanelDataset data = fixtures::random_panel(2, 4, 1, 10, rng);
  Priors priors = Priors::defaults(1, 1.0);
  SamplerConfig cfg = small_config(2, 93);
  // Knots closer than any correlation range can separate: the knot covariance
  // is numerically singular at every range in the prior support.
  const spatial::KnotSet knots{{0.5, 0.5}, {0.5, 0.5 + 1e-14}};
  try {
    run_chain(data, priors, cfg, knots);
    FAIL("expected a failure");
  } catch (const NotPositiveDefinite&) {
    // Raised while building the initial projector, before any sweep.
  } catch (const ChainError& e) {
    CHECK(e.iteration() >= 0);
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("BN and BIB agree on pi when there are no boundary counts") {
  RngStream rng(94, 0);
  std::vector<Observation> obs;
  for (int t = 1; t <= 2; ++t) {
    for (int i = 0; i < 8; ++i) {
      Observation o;
      o.period = t;
      o.site = i;
      o.location = {rng.uniform(), rng.uniform()};
      o.covariates = {1.0};
      o.trials = 20;
      o.successes = 4 + static_cast<int>(rng.uniform() * 12);
      obs.push_back(o);
    }
  }
  const PanelDataset data = PanelDataset::from_observations(obs, 2);
  const Priors priors = Priors::defaults(1, spatial::max_pairwise_distance(data.pooled_sites()));
  SamplerConfig cfg = small_config(2, 94);
  cfg.iterations = 4000;
  cfg.burn_in = 1000;
  cfg.store_components = true;
  const spatial::KnotSet knots{{0.25, 0.5}, {0.75, 0.5}};
  const PosteriorDraws bib = run_chain(data, priors, cfg, knots);
  cfg.model = ModelKind::BN;
  const PosteriorDraws bn = run_chain(data, priors, cfg, knots);
  const Vector diff = bib.pi->colwise().mean() - bn.pi->colwise().mean();
  CHECK(diff.cwiseAbs().maxCoeff() < 0.03);
}

// -- correctness harness -------------------------------------------------

TEST_CASE("Geweke joint-distribution test") {
  GewekeConfig cfg;
  const GewekeReport report = geweke_check(cfg);
  REQUIRE(!report.entries.empty());
  for (const auto& e : report.entries) {
    CAPTURE(e.name);
    CHECK(std::abs(e.z) < 4.0);
  }
  const GewekeReport again = geweke_check(cfg);
  CHECK(again.max_abs_z() == report.max_abs_z());

  cfg.smoother = Smoother::Rue;
  CHECK(geweke_check(cfg).max_abs_z() < 4.0);

  GewekeConfig bn;
  bn.model = ModelKind::BN;
  CHECK(geweke_check(bn).max_abs_z() < 4.0);
}

TEST_CASE("Geweke test detects a corrupted kappa") {
  GewekeConfig cfg;
  cfg.kappa_shift = 0.1;
  CHECK(geweke_check(cfg).max_abs_z() > 6.0);
}

// -- persistence ---------------------------------------------------------

TEST_CASE("posterior draws round-trip through CSV and binary files") {
  RngStream rng(95, 0);
  const PanelDataset data = fixtures::random_panel(2, 3, 1, 10, rng);
  SamplerConfig cfg = small_config(2, 95);
  cfg.iterations = 30;
  cfg.burn_in = 20;
  const PosteriorDraws d = run_chain(data, Priors::defaults(1, 1.0), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "rstdr_test_mcmc_io";
  std::filesystem::create_directories(dir);

  const std::string bin = (dir / "draws.bin").string();
  write_draws_binary(bin, d);
  const BinaryDraws back = read_draws_binary(bin);
  CHECK(back.values.rows() == 10);
  CHECK(back.names.front() == "beta[0]");
  CHECK(back.values.leftCols(d.values.cols()) == d.values);
  CHECK(back.values.rightCols(data.size()) == d.cdf);
  CHECK(std::filesystem::file_size(bin) > 16);
  {
    std::ifstream in(bin, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "RSTD");
  }
  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "NOPE0000000000000000";
  }
  CHECK_THROWS_AS(read_draws_binary((dir / "bad.bin").string()), SchemaError);
  CHECK_THROWS_AS(read_draws_binary((dir / "missing.bin").string()), IoError);

  const std::string csv = (dir / "draws.csv").string();
  write_draws_csv(csv, d, true);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,parameter,index,value");
  int rows = 0;
  double beta_sum = 0.0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",beta,0,") != std::string::npos) beta_sum += std::stod(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 10 * (d.values.cols() + data.size()));
  CHECK(beta_sum == doctest::Approx(d.values.col(0).sum()).epsilon(1e-14));
  std::filesystem::remove_all(dir);
}
