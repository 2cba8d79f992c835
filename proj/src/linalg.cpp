#include "rstdr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rstdr/errors.hpp"

namespace rstdr::linalg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// A pivot is judged against its own diagonal entry, so the test is unchanged
// by symmetric diagonal rescaling of the matrix.
void check_diagonal(const Matrix& a) {
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    if (!(a(j, j) > 0.0)) {
      throw NotPositiveDefinite("diagonal entry " + std::to_string(j) + " is not positive", j);
    }
  }
}

Vector standard_normal(Eigen::Index n, RngStream& rng) {
  Vector eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng.normal();
  return eps;
}

}  // namespace

Cholesky::Cholesky(const Matrix& a, const CholeskyOptions& options) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix is not square");
  if (a.rows() == 0) return;
  Matrix work = a;
  if (options.jitter > 0.0) work.diagonal().array() += options.jitter;
  check_diagonal(work);

  Eigen::LLT<Matrix> llt(work);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: matrix is not positive definite");
  }
  lower_ = llt.matrixL();
  for (Eigen::Index j = 0; j < lower_.rows(); ++j) {
    const double pivot = lower_(j, j) * lower_(j, j);
    if (!(pivot > options.relative_tolerance * work(j, j))) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) + " below tolerance", j);
    }
  }
}

Vector Cholesky::solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

Matrix Cholesky::solve(const Matrix& b) const {
  Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector Cholesky::solve_lower(const Vector& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Matrix Cholesky::solve_lower(const Matrix& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Vector Cholesky::solve_upper(const Vector& b) const {
  return lower_.transpose().triangularView<Eigen::Upper>().solve(b);
}

double Cholesky::inverse_quadratic_form(const Vector& x) const {
  return solve_lower(x).squaredNorm();
}

double Cholesky::log_determinant() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Matrix Cholesky::inverse() const {
  return solve(Matrix(Matrix::Identity(dim(), dim())));
}

Matrix cholesky(const Matrix& a, const CholeskyOptions& options) {
  return Cholesky(a, options).lower();
}

Vector sample_mvn_from_precision_dense(const Vector& m, const Matrix& q, RngStream& rng,
                                       bool with_noise) {
  if (m.size() != q.rows()) throw DimensionMismatch("sample_mvn_from_precision_dense: size mismatch");
  const Cholesky chol(q);
  Vector v = chol.solve_lower(m);
  if (with_noise) v += standard_normal(m.size(), rng);
  return chol.solve_upper(v);
}

// ---------------------------------------------------------------------------

BlockTridiagonalPrecision::BlockTridiagonalPrecision(int blocks, int block_dim)
    : diag(blocks, Matrix::Zero(block_dim, block_dim)),
      offdiag(blocks > 0 ? blocks - 1 : 0, Matrix::Zero(block_dim, block_dim)) {}

void BlockTridiagonalPrecision::validate() const {
  const int m = block_dim();
  if (diag.empty()) throw DimensionMismatch("block-tridiagonal matrix has no blocks");
  if (offdiag.size() + 1 != diag.size()) throw DimensionMismatch("expected T-1 off-diagonal blocks");
  for (const auto& b : diag) {
    if (b.rows() != m || b.cols() != m) throw DimensionMismatch("diagonal block has wrong shape");
  }
  for (const auto& b : offdiag) {
    if (b.rows() != m || b.cols() != m) throw DimensionMismatch("off-diagonal block has wrong shape");
  }
}

Matrix BlockTridiagonalPrecision::densify() const {
  const int m = block_dim();
  const int t_count = blocks();
  Matrix dense = Matrix::Zero(dim(), dim());
  for (int t = 0; t < t_count; ++t) {
    dense.block(t * m, t * m, m, m) = diag[t];
    if (t + 1 < t_count) {
      dense.block(t * m, (t + 1) * m, m, m) = offdiag[t];
      dense.block((t + 1) * m, t * m, m, m) = offdiag[t].transpose();
    }
  }
  return dense;
}

Vector BlockTridiagonalPrecision::multiply(const Vector& x) const {
  const int m = block_dim();
  const int t_count = blocks();
  if (x.size() != dim()) throw DimensionMismatch("block-tridiagonal multiply: size mismatch");
  Vector y = Vector::Zero(dim());
  for (int t = 0; t < t_count; ++t) {
    y.segment(t * m, m) += diag[t] * x.segment(t * m, m);
    if (t + 1 < t_count) {
      y.segment(t * m, m) += offdiag[t] * x.segment((t + 1) * m, m);
      y.segment((t + 1) * m, m) += offdiag[t].transpose() * x.segment(t * m, m);
    }
  }
  return y;
}

BlockTridiagonalPrecision random_walk_precision(const Matrix& cov_inverse, double tau, int blocks) {
  if (blocks < 1) throw DimensionMismatch("random_walk_precision: need at least one block");
  const Eigen::Index m = cov_inverse.rows();
  BlockTridiagonalPrecision q(blocks, static_cast<int>(m));
  for (int t = 0; t < blocks; ++t) {
    q.diag[t] = (t + 1 < blocks ? 2.0 : 1.0) * tau * cov_inverse;
    if (t + 1 < blocks) q.offdiag[t] = -tau * cov_inverse;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Band Cholesky over the full MT system. Storage: band(d, j) = L(j + d, j).

namespace {

class BandCholesky {
 public:
  explicit BandCholesky(const BlockTridiagonalPrecision& q)
      : m_(q.block_dim()),
        n_(q.dim()),
        bandwidth_(q.blocks() > 1 ? 2 * m_ - 1 : m_ - 1),
        band_(Matrix::Zero(bandwidth_ + 1, n_)) {
    for (int j = 0; j < n_; ++j) {
      const double diag = entry(q, j, j);
      double s = diag;
      for (int k = std::max(0, j - bandwidth_); k < j; ++k) s -= l(j, k) * l(j, k);
      if (!(diag > 0.0) || !(s > 1e-12 * diag)) {
        throw NotPositiveDefinite("band cholesky: pivot " + std::to_string(j) + " below tolerance", j);
      }
      const double pivot = std::sqrt(s);
      band_(0, j) = pivot;
      const int last = std::min(n_ - 1, j + bandwidth_);
      for (int i = j + 1; i <= last; ++i) {
        double v = entry(q, i, j);
        for (int k = std::max(0, i - bandwidth_); k < j; ++k) v -= l(i, k) * l(j, k);
        band_(i - j, j) = v / pivot;
      }
    }
  }

  Vector forward(const Vector& b) const {
    Vector v(n_);
    for (int i = 0; i < n_; ++i) {
      double s = b(i);
      for (int k = std::max(0, i - bandwidth_); k < i; ++k) s -= l(i, k) * v(k);
      v(i) = s / l(i, i);
    }
    return v;
  }

  Vector backward(const Vector& b) const {
    Vector x(n_);
    for (int i = n_ - 1; i >= 0; --i) {
      double s = b(i);
      const int last = std::min(n_ - 1, i + bandwidth_);
      for (int k = i + 1; k <= last; ++k) s -= l(k, i) * x(k);
      x(i) = s / l(i, i);
    }
    return x;
  }

 private:
  double l(int i, int j) const { return band_(i - j, j); }

  // Lower-triangle entry (i >= j) of the implied dense matrix.
  double entry(const BlockTridiagonalPrecision& q, int i, int j) const {
    const int bi = i / m_;
    const int bj = j / m_;
    if (bi == bj) return q.diag[bi](i % m_, j % m_);
    if (bi == bj + 1) return q.offdiag[bj](j % m_, i % m_);
    return 0.0;
  }

  int m_;
  int n_;
  int bandwidth_;
  Matrix band_;
};

}  // namespace

Vector sample_rue(const Vector& m, const BlockTridiagonalPrecision& q, RngStream& rng,
                  bool with_noise) {
  q.validate();
  if (m.size() != q.dim()) throw DimensionMismatch("sample_rue: mean vector has wrong length");
  const BandCholesky chol(q);
  Vector v = chol.forward(m);
  if (with_noise) v += standard_normal(m.size(), rng);
  return chol.backward(v);
}

BlockSample sample_mccausland(const std::vector<Vector>& m_blocks,
                              const BlockTridiagonalPrecision& q, RngStream& rng,
                              bool with_noise) {
  q.validate();
  const int t_count = q.blocks();
  const int m = q.block_dim();
  if (static_cast<int>(m_blocks.size()) != t_count) {
    throw DimensionMismatch("sample_mccausland: need one mean block per time block");
  }
  for (const auto& b : m_blocks) {
    if (b.size() != m) throw DimensionMismatch("sample_mccausland: mean block has wrong length");
  }

  std::vector<Cholesky> factors;
  factors.reserve(t_count);
  // scaled[t] = Lambda_t^{-1} Q_{t,t+1}
  std::vector<Matrix> scaled(t_count > 0 ? t_count - 1 : 0);
  BlockSample out;
  out.forward_mean.resize(t_count);
  out.draw.resize(t_count);

  for (int t = 0; t < t_count; ++t) {
    Matrix schur = q.diag[t];
    Vector rhs = m_blocks[t];
    if (t > 0) {
      schur.noalias() -= scaled[t - 1].transpose() * scaled[t - 1];
      rhs.noalias() -= q.offdiag[t - 1].transpose() * out.forward_mean[t - 1];
    }
    factors.emplace_back(schur);
    if (t + 1 < t_count) scaled[t] = factors[t].solve_lower(q.offdiag[t]);
    out.forward_mean[t] = factors[t].solve(rhs);
  }

  for (int t = t_count - 1; t >= 0; --t) {
    Vector e = with_noise ? standard_normal(m, rng) : Vector::Zero(m);
    if (t + 1 < t_count) e.noalias() -= scaled[t] * out.draw[t + 1];
    out.draw[t] = out.forward_mean[t] + factors[t].solve_upper(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

Vector h_inverse_stack(const Vector& v0, int blocks) {
  if (blocks < 1) throw DimensionMismatch("h_inverse_stack: need at least one block");
  return v0.replicate(blocks, 1);
}

Vector h_apply(const Vector& stacked, int block_dim) {
  if (block_dim < 1 || stacked.size() % block_dim != 0) {
    throw DimensionMismatch("h_apply: length is not a multiple of the block size");
  }
  Vector out = stacked;
  const Eigen::Index t_count = stacked.size() / block_dim;
  for (Eigen::Index t = t_count - 1; t >= 1; --t) {
    out.segment(t * block_dim, block_dim) -= stacked.segment((t - 1) * block_dim, block_dim);
  }
  return out;
}

std::vector<Vector> split_blocks(const Vector& stacked, int blocks) {
  if (blocks < 1 || stacked.size() % blocks != 0) {
    throw DimensionMismatch("split_blocks: length is not a multiple of the block count");
  }
  const Eigen::Index m = stacked.size() / blocks;
  std::vector<Vector> out(blocks);
  for (int t = 0; t < blocks; ++t) out[t] = stacked.segment(t * m, m);
  return out;
}

Vector stack_blocks(const std::vector<Vector>& pieces) {
  Eigen::Index total = 0;
  for (const auto& p : pieces) total += p.size();
  Vector out(total);
  Eigen::Index offset = 0;
  for (const auto& p : pieces) {
    out.segment(offset, p.size()) = p;
    offset += p.size();
  }
  return out;
}

double random_walk_trace_form(const Matrix& field, const Vector& start, const Cholesky& cov) {
  if (field.rows() != start.size() || cov.dim() != start.size()) {
    throw DimensionMismatch("random_walk_trace_form: dimension mismatch");
  }
  const Matrix centered = field.colwise() - start;
  const Matrix whitened = cov.solve_lower(centered);
  const Matrix gram = whitened.transpose() * whitened;  // U^T C^{-1} U
  const Eigen::Index t_count = field.cols();
  double trace = 0.0;
  for (Eigen::Index t = 0; t < t_count; ++t) {
    trace += (t + 1 < t_count ? 2.0 : 1.0) * gram(t, t);
    if (t + 1 < t_count) trace -= 2.0 * gram(t, t + 1);
  }
  return trace;
}

double random_walk_log_density(const Matrix& field, const Vector& start, const Cholesky& cov,
                               double tau) {
  const double m = static_cast<double>(field.rows());
  const double t = static_cast<double>(field.cols());
  const double quad = random_walk_trace_form(field, start, cov);
  return -0.5 * m * t * kLog2Pi - 0.5 * (t * cov.log_determinant() - m * t * std::log(tau)) -
         0.5 * tau * quad;
}

double mvn_log_density(const Vector& x, const Vector& mean, const Cholesky& cov, double tau) {
  const double d = static_cast<double>(x.size());
  return -0.5 * d * kLog2Pi - 0.5 * (cov.log_determinant() - d * std::log(tau)) -
         0.5 * tau * cov.inverse_quadratic_form(x - mean);
}

}  // namespace rstdr::linalg
