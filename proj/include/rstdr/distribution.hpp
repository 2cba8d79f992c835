#pragma once

#include <optional>
#include <vector>

#include "rstdr/mcmc.hpp"
#include "rstdr/model.hpp"

namespace rstdr::dr {

/// Strictly increasing thresholds a_1 < ... < a_K.
class ThresholdGrid {
 public:
  ThresholdGrid() = default;
  /// Throws ConfigError unless nonempty, finite and strictly increasing.
  explicit ThresholdGrid(std::vector<double> thresholds);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int k) const { return values_[k]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Continuous responses observed at one site in one period.
struct MicroSample {
  int period = 1;
  int site = 0;
  spatial::Point location;
  std::vector<double> covariates;
  std::vector<double> responses;
};

/// One PanelDataset per threshold with y = #{responses <= a_k}. All share
/// the same row order, trials and covariates.
std::vector<PanelDataset> bin_counts(const std::vector<MicroSample>& samples, const ThresholdGrid& grid,
                                     int periods);

/// Posterior summaries of F_it(a_k); rows follow the dataset order.
struct DistributionSurface {
  std::vector<double> thresholds;
  Matrix mean;   // N x K
  Matrix lower;  // N x K, 2.5% quantile
  Matrix upper;  // N x K, 97.5% quantile
  /// Per threshold, draws x N, when kept.
  std::vector<Matrix> draws;

  int observations() const { return static_cast<int>(mean.rows()); }
  int threshold_count() const { return static_cast<int>(mean.cols()); }
};

/// Sample quantile with linear interpolation between order statistics
/// (h = (n - 1) p, the "type 7" rule). `sorted` must be ascending.
double quantile_type7(const std::vector<double>& sorted, double p);

struct ColumnSummary {
  Vector mean, lower, upper;
};
/// Mean and equal-tailed 95% interval of every column of a draws x N matrix.
ColumnSummary summarize_columns(const Matrix& draws);

struct FitOptions {
  mcmc::SamplerConfig sampler;
  /// Parallel threshold fits (1 = sequential).
  int jobs = 1;
  bool keep_draws = false;
  bool monotone = false;
};

struct FitResult {
  DistributionSurface surface;
  spatial::KnotSet knots;
  /// Per-threshold posterior draws of the scalar parameters and CDF values.
  std::vector<mcmc::PosteriorDraws> chains;
};

/// Stream id of the chain for threshold index k under base stream `stream`.
std::uint64_t threshold_stream(std::uint64_t stream, int k);

/**
 * Fits one chain per threshold. Knots are chosen once by k-means on the
 * pooled sites (from a stream independent of K) and shared by every fit;
 * chain k runs on stream threshold_stream(stream, k). A failing threshold
 * is rethrown as ChainError naming the threshold index.
 */
FitResult fit_rstdr(const std::vector<PanelDataset>& datasets, const std::vector<double>& thresholds,
                    const Priors& priors, const FitOptions& options);

/// Default priors for a dataset: weakly informative normals and gammas and a
/// range prior scaled by the largest pairwise site distance.
Priors default_priors(const PanelDataset& data);

/**
 * Sorts each observation's CDF values across thresholds. With draws, every
 * retained iteration is sorted and the summaries are recomputed; without,
 * means and both bounds are sorted independently.
 */
DistributionSurface monotone_rearrange(const DistributionSurface& surface);

}  // namespace rstdr::dr
