#include "rstdr/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rstdr/errors.hpp"

namespace rstdr::spatial {

namespace {

double squared_distance(const Point& a, const Point& b) {
  const double d1 = a.s1 - b.s1;
  const double d2 = a.s2 - b.s2;
  return d1 * d1 + d2 * d2;
}

std::size_t distinct_count(std::vector<Point> points) {
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return a.s1 < b.s1 || (a.s1 == b.s1 && a.s2 < b.s2);
  });
  return static_cast<std::size_t>(std::unique(points.begin(), points.end()) - points.begin());
}

int nearest(const Point& p, const KnotSet& centers, double* best_d2 = nullptr) {
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d2 = squared_distance(p, centers[c]);
    if (d2 < best_value) {
      best_value = d2;
      best = static_cast<int>(c);
    }
  }
  if (best_d2) *best_d2 = best_value;
  return best;
}

KnotSet seed_plus_plus(const std::vector<Point>& points, int clusters, RngStream& rng) {
  KnotSet centers;
  centers.reserve(clusters);
  const std::size_t n = points.size();
  centers.push_back(points[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (static_cast<int>(centers.size()) < clusters) {
    const int pick = draw_categorical(d2, rng);
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
  }
  return centers;
}

KMeansResult lloyd(const std::vector<Point>& points, KnotSet centers, int max_iterations) {
  const std::size_t n = points.size();
  const std::size_t k = centers.size();
  KMeansResult result;
  result.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(points[i], centers);
      if (c != result.assignment[i]) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<double> sum1(k, 0.0), sum2(k, 0.0);
    std::vector<int> size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = result.assignment[i];
      sum1[c] += points[i].s1;
      sum2[c] += points[i].s2;
      ++size[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] > 0) centers[c] = {sum1[c] / size[c], sum2[c] / size[c]};
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += squared_distance(points[i], centers[result.assignment[i]]);
    result.wcss_trace.push_back(wcss);

    // An empty cluster takes over the point farthest from its own center.
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] > 0) continue;
      std::size_t far = 0;
      double far_d2 = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d2 = squared_distance(points[i], centers[result.assignment[i]]);
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      centers[c] = points[far];
    }
  }
  result.centers = std::move(centers);
  result.wcss = within_cluster_ss(points, result.centers);
  for (std::size_t i = 0; i < n; ++i) result.assignment[i] = nearest(points[i], result.centers);
  return result;
}

}  // namespace

double distance(const Point& a, const Point& b) { return std::sqrt(squared_distance(a, b)); }

double max_pairwise_distance(const std::vector<Point>& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, squared_distance(points[i], points[j]));
    }
  }
  return std::sqrt(best);
}

double exp_correlation(double d, double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidRange("exp_correlation: range phi must be positive");
  if (!(d >= 0.0)) throw InvalidRange("exp_correlation: distance must be nonnegative");
  return std::exp(-d / phi);
}

Matrix knot_covariance(const KnotSet& knots, double phi) {
  const Eigen::Index m = static_cast<Eigen::Index>(knots.size());
  Matrix c(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    c(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < m; ++b) {
      c(a, b) = c(b, a) = exp_correlation(distance(knots[a], knots[b]), phi);
    }
  }
  return c;
}

Matrix cross_correlation(const SiteSet& sites, const KnotSet& knots, double phi) {
  Matrix c(static_cast<Eigen::Index>(sites.size()), static_cast<Eigen::Index>(knots.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t m = 0; m < knots.size(); ++m) {
      c(i, m) = exp_correlation(distance(sites[i], knots[m]), phi);
    }
  }
  return c;
}

double within_cluster_ss(const std::vector<Point>& points, const KnotSet& centers) {
  double total = 0.0;
  for (const auto& p : points) {
    double d2;
    nearest(p, centers, &d2);
    total += d2;
  }
  return total;
}

KMeansResult kmeans(const std::vector<Point>& points, int clusters, RngStream& rng,
                    const KMeansOptions& options) {
  if (clusters < 1) throw TooManyKnots("kmeans: need at least one cluster");
  if (static_cast<std::size_t>(clusters) > distinct_count(points)) {
    throw TooManyKnots("kmeans: more clusters than distinct points");
  }
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    KMeansResult run = lloyd(points, seed_plus_plus(points, clusters, rng), options.max_iterations);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best;
}

KnotSet select_knots(const SiteSet& all_sites, int knot_count, RngStream& rng,
                     const KMeansOptions& options) {
  for (const auto& p : all_sites) {
    if (!std::isfinite(p.s1) || !std::isfinite(p.s2)) throw InvalidRange("select_knots: non-finite site");
  }
  return kmeans(all_sites, knot_count, rng, options).centers;
}

GppProjector::GppProjector(const std::vector<SiteSet>& sites_by_period, const KnotSet& knots,
                           double phi)
    : phi_(phi), knots_(knots) {
  if (knots.empty()) throw TooManyKnots("GppProjector: empty knot set");
  knot_cov_ = spatial::knot_covariance(knots, phi);
  knot_chol_ = linalg::Cholesky(knot_cov_);
  knot_precision_ = knot_chol_.inverse();
  projection_.reserve(sites_by_period.size());
  for (const auto& sites : sites_by_period) {
    const Matrix cross = cross_correlation(sites, knots, phi);
    // D_t = c_t^T C^{-1}  <=>  C D_t^T = c_t
    projection_.push_back(knot_chol_.solve(Matrix(cross.transpose())).transpose());
  }
}

Vector GppProjector::project(int t, const Vector& knot_values) const {
  return projection(t) * knot_values;
}

}  // namespace rstdr::spatial
