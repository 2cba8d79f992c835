#pragma once

#include <vector>

#include "rstdr/linalg.hpp"
#include "rstdr/random.hpp"

namespace rstdr::spatial {

using linalg::Matrix;
using linalg::Vector;

/// Planar location. Distances are Euclidean in these coordinates.
struct Point {
  double s1 = 0.0;
  double s2 = 0.0;
  bool operator==(const Point&) const = default;
};

using SiteSet = std::vector<Point>;
using KnotSet = std::vector<Point>;

double distance(const Point& a, const Point& b);
/// Largest pairwise distance among the points (0 for fewer than two).
double max_pairwise_distance(const std::vector<Point>& points);

/// exp(-d / phi). Throws InvalidRange for phi <= 0 or d < 0.
double exp_correlation(double d, double phi);

/// M x M correlation matrix among knots.
Matrix knot_covariance(const KnotSet& knots, double phi);
/// rows(sites) x M cross-correlation between sites and knots.
Matrix cross_correlation(const SiteSet& sites, const KnotSet& knots, double phi);

struct KMeansOptions {
  int restarts = 50;
  int max_iterations = 300;
};

struct KMeansResult {
  KnotSet centers;
  std::vector<int> assignment;
  double wcss = 0.0;
  /// Within-cluster sum of squares after each Lloyd iteration of the best restart.
  std::vector<double> wcss_trace;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by WCSS.
KMeansResult kmeans(const std::vector<Point>& points, int clusters, RngStream& rng,
                    const KMeansOptions& options = {});

double within_cluster_ss(const std::vector<Point>& points, const KnotSet& centers);

/// Knots as k-means centroids of the pooled sites. Throws TooManyKnots when
/// M exceeds the number of distinct sites.
KnotSet select_knots(const SiteSet& all_sites, int knot_count, RngStream& rng,
                     const KMeansOptions& options = {});

/**
 * @brief Predictive-process projection onto a fixed knot set.
 *
 * Holds C(phi) among knots, its Cholesky factor, and for every period the
 * N_t x M matrix D_t = c_t^T C^{-1}, so a knot field v_t maps to the sites
 * of period t as D_t v_t.
 */
class GppProjector {
 public:
  GppProjector() = default;
  GppProjector(const std::vector<SiteSet>& sites_by_period, const KnotSet& knots, double phi);

  double phi() const { return phi_; }
  int knot_count() const { return static_cast<int>(knots_.size()); }
  int periods() const { return static_cast<int>(projection_.size()); }
  const KnotSet& knots() const { return knots_; }
  const Matrix& knot_covariance() const { return knot_cov_; }
  const linalg::Cholesky& knot_cholesky() const { return knot_chol_; }
  const Matrix& knot_precision() const { return knot_precision_; }
  /// D_t for period t (0-based).
  const Matrix& projection(int t) const { return projection_.at(t); }

  /// D_t v for a single period.
  Vector project(int t, const Vector& knot_values) const;

 private:
  double phi_ = 0.0;
  KnotSet knots_;
  Matrix knot_cov_;
  linalg::Cholesky knot_chol_;
  Matrix knot_precision_;
  std::vector<Matrix> projection_;
};

}  // namespace rstdr::spatial
