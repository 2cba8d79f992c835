#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rstdr::checks {

/// One verified property with the numbers behind the verdict.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
};

struct CheckOptions {
  std::uint64_t seed = 20240611;
  int pg_draws = 100000;
  int linalg_systems = 50;
  int linalg_draws = 100000;
  int density_states = 50;
  int oracle_points = 20;
  int geweke_cycles = 10000;
};

/// PG(b, c) draws over b in {1,3,10,50}, c in {0,0.5,1,2,5}: sample mean and
/// variance within 5 standard errors of the closed forms.
CheckResult pg_moment_grid(const CheckOptions& options);

/// Random SPD block-tridiagonal systems with MT <= 8: both block samplers
/// solve to the dense mean within 1e-8 and reproduce Q^{-1} within 2e-2.
CheckResult block_sampler_oracle(const CheckOptions& options);

/// Joint random-walk log-density (dense Kronecker covariance) equals the sum
/// of sequential conditional log-densities and the trace form within 1e-8.
CheckResult random_walk_density_equivalence(const CheckOptions& options);

/// Gaussian full conditionals (beta, gamma_k, knot fields, start vectors)
/// against brute-force prior x augmented likelihood at random points.
CheckResult gaussian_conditional_oracles(const CheckOptions& options);
/// Precision updates: exact shape and the trace-form rate.
CheckResult gamma_conditional_oracles(const CheckOptions& options);

/// Successive-conditional joint-distribution test on the tiny model.
CheckResult geweke(const CheckOptions& options);

/// Suite names accepted by run_suite: pg, linalg, conditionals, geweke.
const std::vector<std::string>& suite_names();
/// Throws ConfigError for an unknown suite.
SuiteReport run_suite(const std::string& name, const CheckOptions& options);

}  // namespace rstdr::checks
