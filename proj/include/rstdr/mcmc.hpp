#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rstdr/linalg.hpp"
#include "rstdr/model.hpp"
#include "rstdr/random.hpp"
#include "rstdr/spatial.hpp"

namespace rstdr::mcmc {

/// BIB: boundary-inflated binomial. BN: plain binomial with r fixed at 2.
enum class ModelKind { BIB, BN };
enum class Smoother { McCausland, Rue };
/// LogitScale walks on logit((phi - lo) / (hi - lo)); RawScale walks on phi.
enum class PhiProposal { LogitScale, RawScale };
/**
 * Likelihood factor used in the range update of xi_k.
 *
 * FullMultinomial uses prod_i p_{r_i, i}: every category probability depends
 * on psi_k through the shared normalizer. IndicatorOnly keeps only the
 * p_k^{I(r = k)} factors.
 */
enum class PhiXiTarget { FullMultinomial, IndicatorOnly };

std::string to_string(ModelKind kind);
std::string to_string(Smoother smoother);
ModelKind parse_model_kind(const std::string& text);
Smoother parse_smoother(const std::string& text);

struct SamplerConfig {
  int iterations = 3000;
  int burn_in = 1000;
  int thin = 1;
  ModelKind model = ModelKind::BIB;
  Smoother smoother = Smoother::McCausland;
  int knot_count = 25;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;

  double phi_step = 0.3;
  PhiProposal phi_proposal = PhiProposal::LogitScale;
  /// Robbins-Monro step adaptation toward 0.44 acceptance, burn-in only.
  bool adapt_phi = false;
  PhiXiTarget phi_xi_target = PhiXiTarget::FullMultinomial;

  /// Skip PG draws in step 2(a) for observations with r != 2.
  bool skip_unused_pg = false;
  PgOptions pg;
  spatial::KMeansOptions kmeans;

  /// Keep per-observation draws of pi, p0, p1 in addition to the CDF value.
  bool store_components = false;
  /// Verify ChainState invariants after every sweep.
  bool check_invariants = false;

  /// Fault injection for the correctness harness: added to kappa = y - n/2.
  double kappa_shift = 0.0;

  void validate() const;
};

/// N(P^{-1} lin, P^{-1}) stored in canonical form.
struct GaussianConditional {
  Vector lin;
  Matrix precision;

  Vector mean() const;
  /// lin^T x - x^T P x / 2, i.e. the log-density up to a constant.
  double log_kernel(const Vector& x) const;
};

/// Joint conditional of a T x M knot field in canonical block form.
struct FieldConditional {
  linalg::BlockTridiagonalPrecision precision;
  std::vector<Vector> lin;
};

struct GammaConditional {
  double shape = 1.0;
  double rate = 1.0;
};

/// Dimensions and identifiers of the three latent fields.
inline constexpr int kFieldCount = 3;
std::string field_name(int field);

/**
 * @brief Metropolis-within-Gibbs sampler for the DGPP-BIB model.
 *
 * Owns the chain state, one predictive-process projector per latent field
 * (their ranges move independently), and per-observation caches of the
 * regression and field contributions to every linear predictor.
 *
 * Every full conditional is exposed as a const method so tests can compare
 * it with brute-force evaluations; the step methods draw from them.
 */
class Sampler {
 public:
  Sampler(PanelDataset data, Priors priors, spatial::KnotSet knots, SamplerConfig config);

  const PanelDataset& data() const { return data_; }
  const Priors& priors() const { return priors_; }
  const SamplerConfig& config() const { return config_; }
  const spatial::KnotSet& knots() const { return knots_; }
  const ChainState& state() const { return state_; }
  const spatial::GppProjector& projector(int field) const { return projectors_.at(field); }
  RngStream& rng() { return rng_; }

  /// Replace the state; projectors and caches are rebuilt.
  void set_state(const ChainState& state);
  /// Replace the success counts (trials unchanged) together with a feasible indicator vector.
  void set_successes(const std::vector<int>& successes, const std::vector<int>& indicator);

  LinearPredictors linear_predictors() const;
  /// Per-observation mixture CDF value p1 + (1 - p0 - p1) pi (pi for BN).
  Vector cdf_values() const;

  // -- full conditionals --------------------------------------------------
  /// (p~0, p~1, p~2) for observation i.
  std::array<double, 3> indicator_probabilities(int i) const;
  GaussianConditional beta_conditional() const;
  GaussianConditional gamma_conditional(int k) const;
  FieldConditional field_conditional(int field) const;
  GaussianConditional start_conditional(int field) const;
  GammaConditional tau_conditional(int field) const;
  /// Log target of the range update at phi (without proposal Jacobian);
  /// -inf outside the prior support.
  double phi_log_target(int field, double phi) const;
  /// Argument c of PG(1, c) for the multinomial part: psi_k - Psi_k.
  Vector multinomial_pg_argument(int k) const;

  // -- updates ------------------------------------------------------------
  void sample_indicators();
  void sample_pg_binomial();
  void sample_beta();
  void sample_field(int field);
  void sample_start(int field);
  void sample_tau(int field);
  /// One MH step; returns the acceptance probability min(1, ratio).
  double sample_phi(int field);
  /// MH step with an explicit proposal value, for testing.
  double phi_metropolis_step(int field, double proposal);
  void sample_pg_multinomial(int k);
  void sample_gamma(int k);

  /// One full sweep in order 1, 2(a)-(f), 3(a)-(f) for k = 0 then 1.
  /// BN runs step 2 only.
  void sweep();

  double phi_step(int field) const { return phi_step_[field]; }
  void set_phi_step(int field, double step) { phi_step_[field] = step; }
  /// Acceptance probability and decision of the latest range update.
  double last_phi_acceptance(int field) const { return last_alpha_[field]; }
  bool last_phi_accepted(int field) const { return last_accepted_[field]; }

  /// Throws ChainError if r, omega, tau or phi leave their support.
  void check_state() const;

 private:
  struct PseudoLikelihood {
    Vector a;  // linear coefficient of the predictor
    Vector w;  // quadratic weight
  };
  /// Gaussian-form likelihood of predictor group g (0: eta, 1: psi0, 2: psi1).
  PseudoLikelihood pseudo_likelihood(int group) const;
  GaussianConditional coefficient_conditional(int group) const;
  Vector site_values(const spatial::GppProjector& projector, const Matrix& field) const;
  double kappa(int i) const;
  double field_log_likelihood(int field, const Vector& site_field) const;
  double phi_log_target(int field, const spatial::GppProjector& projector, Vector* site_out) const;
  void refresh_coefficients(int group);
  void refresh_field(int field);
  const Vector& coefficients(int group) const;
  Vector& coefficients(int group);

  PanelDataset data_;
  Priors priors_;
  spatial::KnotSet knots_;
  SamplerConfig config_;
  RngStream rng_;
  std::vector<spatial::SiteSet> sites_;
  ChainState state_;
  std::array<spatial::GppProjector, kFieldCount> projectors_;
  std::array<Vector, kFieldCount> regression_;  // X beta, X gamma0, X gamma1
  std::array<Vector, kFieldCount> site_field_;  // projected field per observation
  std::array<double, kFieldCount> phi_step_{};
  std::array<double, kFieldCount> last_alpha_{};
  std::array<bool, kFieldCount> last_accepted_{};
};

/// Initial state: zero coefficients and fields, unit precisions, ranges at
/// the prior midpoint, r = 2 except at boundary counts where r is uniform
/// over {boundary class, 2}.
ChainState initial_state(const PanelDataset& data, const Priors& priors, int knot_count,
                         ModelKind model, RngStream& rng);

LinearPredictors linear_predictors(const ChainState& state, const PanelDataset& data,
                                   const std::array<spatial::GppProjector, kFieldCount>& projectors,
                                   ModelKind model);

/// Labeled column of PosteriorDraws::values.
struct DrawColumn {
  std::string parameter;
  int index = 0;
};

struct PosteriorDraws {
  ModelKind model = ModelKind::BIB;
  std::vector<int> iterations;       // 0-based sweep index of each retained draw
  std::vector<DrawColumn> columns;
  Matrix values;                     // draws x columns
  Matrix cdf;                        // draws x N
  std::optional<Matrix> pi, p0, p1;  // draws x N when components are stored
  std::array<double, kFieldCount> acceptance_rate{};
  spatial::KnotSet knots;

  int draw_count() const { return static_cast<int>(iterations.size()); }
  /// Column index of (parameter, index); throws DimensionMismatch if absent.
  int column(const std::string& parameter, int index = 0) const;
};

/// Runs a full chain. Knots are taken from `knots` when given, otherwise
/// chosen by k-means on the pooled sites from a stream split off the chain seed.
PosteriorDraws run_chain(const PanelDataset& data, const Priors& priors, const SamplerConfig& config,
                         const std::optional<spatial::KnotSet>& knots = std::nullopt);

/// Knot stream key used by run_chain when knots are not supplied.
inline constexpr std::uint64_t kKnotStreamKey = 0x4b4e4f54;  // "KNOT"

// -- persistence -----------------------------------------------------------

/// Long CSV: iteration,parameter,index,value. Observation-level CDF draws are
/// included as parameter "cdf" when `include_cdf` is set.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws, bool include_cdf);

/**
 * Columnar binary file. Header (16 bytes, little endian):
 *   bytes 0-3   magic "RSTD"
 *   bytes 4-7   uint32 format version (1)
 *   bytes 8-11  uint32 draw count
 *   bytes 12-15 uint32 column count
 * then per column a uint32 name length and the UTF-8 name ("beta[0]",
 * "cdf[17]", ...), then column-major float64 values.
 */
void write_draws_binary(const std::string& path, const PosteriorDraws& draws);

struct BinaryDraws {
  std::vector<std::string> names;
  Matrix values;  // draws x columns
};
BinaryDraws read_draws_binary(const std::string& path);

// -- correctness harness ---------------------------------------------------

struct GewekeConfig {
  int periods = 3;
  int sites_per_period = 4;
  int knot_count = 2;
  int max_trials = 5;
  int cycles = 10000;
  int forward_draws = 10000;
  int batches = 50;
  ModelKind model = ModelKind::BIB;
  Smoother smoother = Smoother::McCausland;
  double kappa_shift = 0.0;
  std::uint64_t seed = 20240611;
};

struct GewekeEntry {
  std::string name;
  double forward_mean = 0.0;
  double gibbs_mean = 0.0;
  double z = 0.0;
};

struct GewekeReport {
  std::vector<GewekeEntry> entries;
  double max_abs_z() const;
};

/// Compares prior moments from forward simulation with moments of a chain
/// that alternates Gibbs sweeps and data regeneration.
GewekeReport geweke_check(const GewekeConfig& config);

}  // namespace rstdr::mcmc
