#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rstdr/random.hpp"

namespace rstdr::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct CholeskyOptions {
  /// Squared pivot j below relative_tolerance * A(j, j) raises NotPositiveDefinite.
  double relative_tolerance = 1e-12;
  /// Added to the diagonal before factorizing; off unless the caller opts in.
  double jitter = 0.0;
};

/// Dense Cholesky factor A = L L^T of a symmetric positive definite matrix.
class Cholesky {
 public:
  Cholesky() = default;
  explicit Cholesky(const Matrix& a, const CholeskyOptions& options = {});

  Eigen::Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  /// Solves A x = b.
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  /// Solves L x = b.
  Vector solve_lower(const Vector& b) const;
  Matrix solve_lower(const Matrix& b) const;
  /// Solves L^T x = b.
  Vector solve_upper(const Vector& b) const;

  /// x^T A^{-1} x.
  double inverse_quadratic_form(const Vector& x) const;
  double log_determinant() const;
  Matrix inverse() const;

 private:
  Matrix lower_;
};

/// Convenience wrapper returning the lower factor only.
Matrix cholesky(const Matrix& a, const CholeskyOptions& options = {});

/// Draw from N(Q^{-1} m, Q^{-1}); with `with_noise` false returns Q^{-1} m.
Vector sample_mvn_from_precision_dense(const Vector& m, const Matrix& q, RngStream& rng,
                                       bool with_noise = true);

/**
 * @brief Symmetric block-tridiagonal matrix of T blocks of size M.
 *
 * `offdiag[t]` holds block (t, t+1); block (t+1, t) is its transpose.
 * The dense MT x MT form is only produced on request by densify().
 */
struct BlockTridiagonalPrecision {
  std::vector<Matrix> diag;
  std::vector<Matrix> offdiag;

  BlockTridiagonalPrecision() = default;
  BlockTridiagonalPrecision(int blocks, int block_dim);

  int blocks() const { return static_cast<int>(diag.size()); }
  int block_dim() const { return diag.empty() ? 0 : static_cast<int>(diag.front().rows()); }
  int dim() const { return blocks() * block_dim(); }

  Matrix densify() const;
  Vector multiply(const Vector& x) const;
  /// Throws DimensionMismatch if the block shapes are inconsistent.
  void validate() const;
};

/**
 * Precision tau * (H^T H kron C^{-1}) of a Gaussian random walk with
 * increment covariance C / tau and fixed start. H is the T x T first
 * difference operator.
 */
BlockTridiagonalPrecision random_walk_precision(const Matrix& cov_inverse, double tau, int blocks);

/// Band-Cholesky sampler: factor Q = L L^T over the full MT band, solve
/// L v = m, then L^T x = v + eps.
Vector sample_rue(const Vector& m, const BlockTridiagonalPrecision& q, RngStream& rng,
                  bool with_noise = true);

struct BlockSample {
  std::vector<Vector> draw;
  /// Forward-pass means; the last entry equals the last block of Q^{-1} m.
  std::vector<Vector> forward_mean;
};

/// Two-pass block sampler: forward Schur-complement recursion on the block
/// Cholesky factors, then backward conditional draws from t = T down to 1.
BlockSample sample_mccausland(const std::vector<Vector>& m_blocks,
                              const BlockTridiagonalPrecision& q, RngStream& rng,
                              bool with_noise = true);

/// T vertically stacked copies of v0: H^{-1} (v0, 0, ..., 0).
Vector h_inverse_stack(const Vector& v0, int blocks);
/// Block first difference H x, with H = I - (subdiagonal shift) acting on M-blocks.
Vector h_apply(const Vector& stacked, int block_dim);

/// Split a stacked vector into `blocks` pieces of equal length.
std::vector<Vector> split_blocks(const Vector& stacked, int blocks);
Vector stack_blocks(const std::vector<Vector>& pieces);

/**
 * Log-density of N_{MT}(x; stack(x0), tau^{-1} (H^T H)^{-1} kron C)
 * evaluated with the trace form: det H = 1 gives log|C_H| = T log|C|.
 * `field` is M x T with column t holding block t.
 */
double random_walk_log_density(const Matrix& field, const Vector& start, const Cholesky& cov,
                               double tau);

/// tr(U^T C^{-1} U H^T H) for U = field - start (broadcast over columns).
double random_walk_trace_form(const Matrix& field, const Vector& start, const Cholesky& cov);

/// log N_d(x; mean, tau^{-1} C).
double mvn_log_density(const Vector& x, const Vector& mean, const Cholesky& cov, double tau = 1.0);

}  // namespace rstdr::linalg
