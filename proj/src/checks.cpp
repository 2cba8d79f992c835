#include "rstdr/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "rstdr/errors.hpp"
#include "rstdr/linalg.hpp"
#include "rstdr/mcmc.hpp"
#include "rstdr/random.hpp"
#include "rstdr/spatial.hpp"

namespace rstdr::checks {

namespace {

using linalg::Matrix;
using linalg::Vector;

std::string format(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = name;
  body(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Matrix random_matrix(int rows, int cols, RngStream& rng, double scale = 1.0) {
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = scale * rng.normal();
  return a;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix difference_operator(int t) {
  Matrix h = Matrix::Identity(t, t);
  for (int i = 1; i < t; ++i) h(i, i - 1) = -1.0;
  return h;
}

Vector stacked(const Matrix& field) { return Eigen::Map<const Vector>(field.data(), field.size()); }

/// log N(x; mean, cov) from an Eigen LLT, independent of the library factorization.
double log_normal(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  const Vector z = l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + 2.0 * l.diagonal().array().log().sum() +
                 z.squaredNorm());
}

// -- small random model instance ---------------------------------------------

PanelDataset random_panel(int periods, int sites_per_period, int q, int max_trials, RngStream& rng) {
  std::vector<Observation> obs;
  for (int t = 1; t <= periods; ++t) {
    for (int i = 0; i < sites_per_period; ++i) {
      Observation o;
      o.period = t;
      o.site = i;
      o.location = {rng.uniform(), rng.uniform()};
      o.covariates.push_back(1.0);
      for (int j = 1; j < q; ++j) o.covariates.push_back(rng.normal());
      o.trials = 1 + static_cast<int>(rng.uniform() * max_trials);
      const double u = rng.uniform();
      if (u < 0.2) {
        o.successes = 0;
      } else if (u < 0.4) {
        o.successes = o.trials;
      } else {
        o.successes = static_cast<int>(rng.uniform() * (o.trials + 1));
      }
      obs.push_back(o);
    }
  }
  return PanelDataset::from_observations(obs, periods);
}

/// q = 2, T = 3, M = 2 (MT = 6) with non-default priors and a random feasible state.
struct Instance {
  PanelDataset data;
  Priors priors;
  spatial::KnotSet knots;
  ChainState state;

  explicit Instance(RngStream& rng) {
    const int m = 2;
    data = random_panel(3, 5, 2, 8, rng);
    priors = Priors::defaults(2, 1.0);
    priors.beta_mean = Vector::Constant(2, 0.3);
    priors.beta_precision = Matrix::Identity(2, 2) * 0.7;
    priors.gamma_mean[0] = Vector::Constant(2, -0.2);
    priors.gamma_precision[1] = Matrix::Identity(2, 2) * 1.3;
    priors.tau_u_shape = 2.0;
    priors.tau_xi_rate[1] = 0.5;
    for (int j = 0; j < m; ++j) knots.push_back({rng.uniform(), rng.uniform()});

    const int n = data.size();
    state.beta = random_matrix(2, 1, rng, 0.5).col(0);
    for (auto& g : state.gamma) g = random_matrix(2, 1, rng, 0.5).col(0);
    for (auto& f : state.fields) {
      f.values = random_matrix(m, data.periods, rng, 0.7);
      f.start = random_matrix(m, 1, rng, 0.7).col(0);
      f.tau = 0.5 + rng.uniform();
      f.phi = priors.phi_lower + (0.2 + 0.6 * rng.uniform()) * (priors.phi_upper - priors.phi_lower);
    }
    state.indicator.assign(n, 2);
    for (int i = 0; i < n; ++i) {
      if (data.successes[i] == 0 && rng.uniform() < 0.5) state.indicator[i] = 0;
      if (data.successes[i] == data.trials[i] && rng.uniform() < 0.5) state.indicator[i] = 1;
    }
    state.omega.resize(n);
    for (int i = 0; i < n; ++i) state.omega[i] = 0.5 + rng.uniform();
    for (auto& w : state.omega_k) {
      w.resize(n);
      for (int i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform();
    }
  }

  mcmc::Sampler sampler() const {
    mcmc::SamplerConfig cfg;
    cfg.knot_count = static_cast<int>(knots.size());
    mcmc::Sampler s(data, priors, knots, cfg);
    s.set_state(state);
    return s;
  }

  /// Site values c^T C^{-1} v per observation, computed directly.
  Vector site_field(int f, const Matrix& values) const {
    const double phi = state.fields[f].phi;
    const Matrix c = spatial::knot_covariance(knots, phi);
    Vector out(data.size());
    for (int i = 0; i < data.size(); ++i) {
      const Matrix cross = spatial::cross_correlation({data.locations[i]}, knots, phi);
      out[i] = (cross * c.ldlt().solve(Vector(values.col(data.period_of(i)))))(0);
    }
    return out;
  }

  /// Augmented log-likelihood of predictor group g (0: eta, 1+k: psi_k) at predictor values nu.
  double pseudo_loglik(int group, const Vector& nu) const {
    double total = 0.0;
    for (int i = 0; i < data.size(); ++i) {
      if (group == 0) {
        if (state.indicator[i] != 2) continue;
        const double kappa = data.successes[i] - 0.5 * data.trials[i];
        total += kappa * nu[i] - 0.5 * state.omega[i] * nu[i] * nu[i];
        continue;
      }
      const int k = group - 1;
      const int other = 1 - k;
      const double psi_other =
          data.design.row(i).dot(state.gamma[other]) + site_field(1 + other, state.fields[1 + other].values)[i];
      const double offset = std::log1p(std::exp(psi_other));
      const double kappa_k = (state.indicator[i] == k ? 1.0 : 0.0) - 0.5;
      const double v = nu[i] - offset;
      total += kappa_k * v - 0.5 * state.omega_k[k][i] * v * v;
    }
    return total;
  }

  const Vector& coefficients(int group) const { return group == 0 ? state.beta : state.gamma[group - 1]; }

  double log_prior_field(int f, const Matrix& values, const Vector& start) const {
    const LatentField& lf = state.fields[f];
    const Matrix cov = spatial::knot_covariance(knots, lf.phi) / lf.tau;
    double total = log_normal(start, Vector::Zero(start.size()), cov);
    Vector prev = start;
    for (int t = 0; t < values.cols(); ++t) {
      total += log_normal(values.col(t), prev, cov);
      prev = values.col(t);
    }
    return total;
  }
};

/// Largest |(f(x) - f(ref)) - (g(x) - g(ref))| over random points.
template <class F, class G, class Draw>
double max_kernel_gap(F&& implemented, G&& brute, Draw&& draw, int points) {
  const auto ref = draw();
  const double fi = implemented(ref), gi = brute(ref);
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    const auto x = draw();
    worst = std::max(worst, std::abs((implemented(x) - fi) - (brute(x) - gi)));
  }
  return worst;
}

/// Random SPD block-tridiagonal Q = tau (H^T H kron C^{-1}) + blockdiag(B_t^T W_t B_t) + I.
linalg::BlockTridiagonalPrecision random_system(int blocks, int dim, RngStream& rng) {
  spatial::KnotSet knots;
  for (int j = 0; j < dim; ++j) knots.push_back({rng.uniform(), rng.uniform()});
  const double phi = 0.2 + rng.uniform();
  const Matrix cinv = spatial::knot_covariance(knots, phi).inverse();
  linalg::BlockTridiagonalPrecision q = linalg::random_walk_precision(cinv, 0.2 + rng.uniform(), blocks);
  for (int t = 0; t < blocks; ++t) {
    const Matrix b = random_matrix(3, dim, rng, 0.7);
    Vector w(3);
    for (int i = 0; i < 3; ++i) w[i] = rng.uniform();
    q.diag[t] += b.transpose() * w.asDiagonal() * b + Matrix::Identity(dim, dim);
  }
  return q;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

CheckResult pg_moment_grid(const CheckOptions& options) {
  return timed("pg moment grid", [&](CheckResult& r) {
    RngStream rng(options.seed, mix_keys({0x5047ULL}));  // "PG"
    const int n = options.pg_draws;
    double worst_mean = 0.0, worst_var = 0.0;
    std::vector<double> x(n);
    for (int b : {1, 3, 10, 50}) {
      for (double c : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        for (int d = 0; d < n; ++d) x[d] = draw_pg(b, c, rng);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= n;
        double m2 = 0.0, m4 = 0.0;
        for (double v : x) {
          const double e = (v - mean) * (v - mean);
          m2 += e;
          m4 += e * e;
        }
        m2 /= n;
        m4 /= n;
        const double var = m2 * n / (n - 1.0);
        const double se_mean = std::sqrt(pg_variance(b, c) / n);
        const double se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
        worst_mean = std::max(worst_mean, std::abs(mean - pg_mean(b, c)) / se_mean);
        worst_var = std::max(worst_var, std::abs(var - pg_variance(b, c)) / se_var);
      }
    }
    r.passed = worst_mean < 5.0 && worst_var < 5.0;
    r.detail = format("20 (b,c) cells x %.0f draws; max |z| mean %.2f, variance %.2f (limit 5)", n, worst_mean,
                      worst_var);
  });
}

CheckResult block_sampler_oracle(const CheckOptions& options) {
  return timed("block sampler oracle", [&](CheckResult& r) {
    RngStream rng(options.seed, mix_keys({0x424c4bULL}));  // "BLK"
    const int draws = options.linalg_draws;
    double worst_mean = 0.0, worst_cov = 0.0;
    int max_dim = 0;
    for (int sys = 0; sys < options.linalg_systems; ++sys) {
      const int blocks = 1 + static_cast<int>(rng.uniform() * 4);      // T in 1..4
      const int dim = 1 + static_cast<int>(rng.uniform() * (8 / blocks));  // MT <= 8
      const int n = blocks * dim;
      max_dim = std::max(max_dim, n);
      const linalg::BlockTridiagonalPrecision q = random_system(blocks, dim, rng);
      const Vector m = random_matrix(n, 1, rng).col(0);
      const Matrix dense = q.densify();
      const Vector oracle_mean = linalg::sample_mvn_from_precision_dense(m, dense, rng, false);
      const Matrix oracle_cov = linalg::Cholesky(dense).inverse();
      const std::vector<Vector> m_blocks = linalg::split_blocks(m, blocks);

      worst_mean = std::max(worst_mean, (linalg::sample_rue(m, q, rng, false) - oracle_mean).cwiseAbs().maxCoeff());
      const Vector mc = linalg::stack_blocks(linalg::sample_mccausland(m_blocks, q, rng, false).draw);
      worst_mean = std::max(worst_mean, (mc - oracle_mean).cwiseAbs().maxCoeff());

      for (int which = 0; which < 2; ++which) {
        Vector sum = Vector::Zero(n);
        Matrix outer = Matrix::Zero(n, n);
        for (int d = 0; d < draws; ++d) {
          const Vector x = which == 0 ? linalg::sample_rue(m, q, rng)
                                      : linalg::stack_blocks(linalg::sample_mccausland(m_blocks, q, rng).draw);
          const Vector c = x - oracle_mean;
          sum += c;
          outer.selfadjointView<Eigen::Lower>().rankUpdate(c);
        }
        const Vector mean = sum / draws;
        Matrix cov = outer.selfadjointView<Eigen::Lower>();
        cov = (cov - draws * mean * mean.transpose()) / (draws - 1.0);
        worst_cov = std::max(worst_cov, (cov - oracle_cov).cwiseAbs().maxCoeff());
      }
    }
    r.passed = worst_mean < 1e-8 && worst_cov < 2e-2;
    r.detail = format("%.0f systems (MT <= %.0f), ", options.linalg_systems, max_dim) +
               format("max solve gap %.2e (limit 1e-8), max covariance gap %.2e (limit 2e-2)", worst_mean, worst_cov);
  });
}

CheckResult random_walk_density_equivalence(const CheckOptions& options) {
  return timed("random walk density equivalence", [&](CheckResult& r) {
    RngStream rng(options.seed, mix_keys({0x41315257ULL}));  // "A1RW"
    double worst = 0.0;
    for (int s = 0; s < options.density_states; ++s) {
      const int m = 1 + static_cast<int>(rng.uniform() * 3);
      const int t = 1 + static_cast<int>(rng.uniform() * 5);
      spatial::KnotSet knots;
      for (int j = 0; j < m; ++j) knots.push_back({rng.uniform(), rng.uniform()});
      const Matrix c = spatial::knot_covariance(knots, 0.2 + rng.uniform());
      const double tau = 0.3 + 2.0 * rng.uniform();
      const Vector start = random_matrix(m, 1, rng).col(0);
      const Matrix field = random_matrix(m, t, rng, 1.5);

      const Matrix h = difference_operator(t);
      const Matrix joint_cov = kron((h.transpose() * h).inverse(), c) / tau;
      const double joint = log_normal(stacked(field), linalg::h_inverse_stack(start, t), joint_cov);

      const linalg::Cholesky chol(c);
      double sequential = 0.0;
      Vector prev = start;
      for (int j = 0; j < t; ++j) {
        sequential += linalg::mvn_log_density(field.col(j), prev, chol, tau);
        prev = field.col(j);
      }
      const double trace_form = linalg::random_walk_log_density(field, start, chol, tau);
      worst = std::max({worst, std::abs(joint - sequential), std::abs(joint - trace_form)});
    }
    r.passed = worst < 1e-8;
    r.detail = format("%.0f random states (M <= 3, T <= 5), max |joint - sequential| %.2e (limit 1e-8)",
                      options.density_states, worst);
  });
}

CheckResult gaussian_conditional_oracles(const CheckOptions& options) {
  return timed("gaussian conditional oracles", [&](CheckResult& r) {
    RngStream rng(options.seed, mix_keys({0x434f4e44ULL}));  // "COND"
    const int points = options.oracle_points;
    double worst_coef = 0.0, worst_field = 0.0, worst_start = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const Instance in(rng);
      const mcmc::Sampler s = in.sampler();
      const int m = static_cast<int>(in.knots.size());
      const int T = in.data.periods;

      // beta (group 0) and gamma_k (group 1 + k)
      for (int g = 0; g < 3; ++g) {
        const mcmc::GaussianConditional c = g == 0 ? s.beta_conditional() : s.gamma_conditional(g - 1);
        const Vector field = in.site_field(g, in.state.fields[g].values);
        const Vector prior_mean = g == 0 ? in.priors.beta_mean : in.priors.gamma_mean[g - 1];
        const Matrix prior_cov = (g == 0 ? in.priors.beta_precision : in.priors.gamma_precision[g - 1]).inverse();
        worst_coef = std::max(
            worst_coef,
            max_kernel_gap([&](const Vector& x) { return c.log_kernel(x); },
                           [&](const Vector& x) {
                             return log_normal(x, prior_mean, prior_cov) +
                                    in.pseudo_loglik(g, in.data.design * x + field);
                           },
                           [&] { return Vector(random_matrix(2, 1, rng, 2.0).col(0)); }, points));
      }

      for (int f = 0; f < mcmc::kFieldCount; ++f) {
        const LatentField& lf = in.state.fields[f];
        const Vector regression = in.data.design * in.coefficients(f);

        const mcmc::FieldConditional fc = s.field_conditional(f);
        const Vector lin = linalg::stack_blocks(fc.lin);
        const Matrix prec = fc.precision.densify();
        worst_field = std::max(
            worst_field,
            max_kernel_gap([&](const Matrix& v) { return lin.dot(stacked(v)) - 0.5 * stacked(v).dot(prec * stacked(v)); },
                           [&](const Matrix& v) {
                             return in.log_prior_field(f, v, lf.start) + in.pseudo_loglik(f, regression + in.site_field(f, v));
                           },
                           [&] { return random_matrix(m, T, rng, 1.5); }, points));

        const mcmc::GaussianConditional sc = s.start_conditional(f);
        worst_start = std::max(
            worst_start, max_kernel_gap([&](const Vector& v) { return sc.log_kernel(v); },
                                        [&](const Vector& v) { return in.log_prior_field(f, lf.values, v); },
                                        [&] { return Vector(random_matrix(m, 1, rng, 1.5).col(0)); }, points));
      }
    }
    const double worst = std::max({worst_coef, worst_field, worst_start});
    r.passed = worst < 1e-8;
    r.detail = format("3 instances x %.0f points; max gap beta/gamma %.2e, fields %.2e, ", points, worst_coef,
                      worst_field) +
               format("start %.2e (limit 1e-8)", worst_start);
  });
}

CheckResult gamma_conditional_oracles(const CheckOptions& options) {
  return timed("gamma conditional oracles", [&](CheckResult& r) {
    RngStream rng(options.seed, mix_keys({0x47414dULL}));  // "GAM"
    bool shapes_ok = true;
    double worst_rate = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const Instance in(rng);
      const mcmc::Sampler s = in.sampler();
      const int m = static_cast<int>(in.knots.size());
      const int T = in.data.periods;
      const Matrix h = difference_operator(T);
      for (int f = 0; f < mcmc::kFieldCount; ++f) {
        const LatentField& lf = in.state.fields[f];
        const Matrix cinv = spatial::knot_covariance(in.knots, lf.phi).inverse();
        const Vector centered = stacked(lf.values) - linalg::h_inverse_stack(lf.start, T);
        const double quad = lf.start.dot(cinv * lf.start) + centered.dot(kron(h.transpose() * h, cinv) * centered);
        const double shape0 = f == 0 ? in.priors.tau_u_shape : in.priors.tau_xi_shape[f - 1];
        const double rate0 = f == 0 ? in.priors.tau_u_rate : in.priors.tau_xi_rate[f - 1];
        const mcmc::GammaConditional g = s.tau_conditional(f);
        shapes_ok = shapes_ok && g.shape == shape0 + m * (T + 1) / 2.0;
        worst_rate = std::max(worst_rate, std::abs(g.rate - (rate0 + 0.5 * quad)));
      }
    }
    r.passed = shapes_ok && worst_rate < 1e-8;
    r.detail = std::string("shapes a0 + M(T+1)/2 ") + (shapes_ok ? "exact" : "MISMATCH") +
               format("; max rate gap vs Kronecker quadratic form %.2e (limit 1e-8)", worst_rate);
  });
}

CheckResult geweke(const CheckOptions& options) {
  return timed("geweke", [&](CheckResult& r) {
    mcmc::GewekeConfig cfg;
    cfg.cycles = options.geweke_cycles;
    cfg.forward_draws = options.geweke_cycles;
    cfg.seed = options.seed;
    const mcmc::GewekeReport report = mcmc::geweke_check(cfg);
    std::string worst_name;
    double worst = 0.0;
    for (const auto& e : report.entries) {
      if (std::abs(e.z) >= worst) {
        worst = std::abs(e.z);
        worst_name = e.name;
      }
    }
    r.passed = !report.entries.empty() && worst < 4.0;
    r.detail = format("M=%.0f, T=%.0f, N_t=%.0f, ", cfg.knot_count, cfg.periods, cfg.sites_per_period) +
               format("%.0f cycles, %.0f statistics; max |z| %.2f", cfg.cycles, static_cast<double>(report.entries.size()), worst) + " (" +
               worst_name + ", limit 4)";
  });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"pg", "linalg", "conditionals", "geweke"};
  return names;
}

SuiteReport run_suite(const std::string& name, const CheckOptions& options) {
  SuiteReport report;
  report.suite = name;
  if (name == "pg") {
    report.checks.push_back(pg_moment_grid(options));
  } else if (name == "linalg") {
    report.checks.push_back(block_sampler_oracle(options));
    report.checks.push_back(random_walk_density_equivalence(options));
  } else if (name == "conditionals") {
    report.checks.push_back(gaussian_conditional_oracles(options));
    report.checks.push_back(gamma_conditional_oracles(options));
  } else if (name == "geweke") {
    report.checks.push_back(geweke(options));
  } else {
    throw ConfigError("unknown check suite '" + name + "' (expected pg, linalg, conditionals or geweke)");
  }
  return report;
}

}  // namespace rstdr::checks
