#include "rstdr/distribution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "rstdr/errors.hpp"

namespace rstdr::dr {

ThresholdGrid::ThresholdGrid(std::vector<double> thresholds) : values_(std::move(thresholds)) {
  if (values_.empty()) throw ConfigError("threshold grid is empty");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) throw ConfigError("threshold grid has a non-finite value");
    if (k > 0 && !(values_[k] > values_[k - 1])) throw ConfigError("thresholds must be strictly increasing");
  }
}

std::vector<PanelDataset> bin_counts(const std::vector<MicroSample>& samples, const ThresholdGrid& grid,
                                     int periods) {
  const int K = grid.size();
  std::vector<std::vector<Observation>> per_threshold(K);
  for (auto& obs : per_threshold) obs.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.responses.empty()) throw InvalidShape("micro sample with no responses");
    std::vector<double> sorted = s.responses;
    std::sort(sorted.begin(), sorted.end());
    if (!std::isfinite(sorted.front()) || !std::isfinite(sorted.back())) {
      throw InvalidShape("micro sample with a non-finite response");
    }
    for (int k = 0; k < K; ++k) {
      Observation o;
      o.period = s.period;
      o.site = s.site;
      o.location = s.location;
      o.covariates = s.covariates;
      o.trials = static_cast<int>(sorted.size());
      o.successes = static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), grid[k]) - sorted.begin());
      per_threshold[k].push_back(std::move(o));
    }
  }
  std::vector<PanelDataset> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) out.push_back(PanelDataset::from_observations(per_threshold[k], periods));
  return out;
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidShape("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ColumnSummary summarize_columns(const Matrix& draws) {
  const Eigen::Index n = draws.cols();
  ColumnSummary s{Vector(n), Vector(n), Vector(n)};
  std::vector<double> column(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < draws.rows(); ++d) column[d] = draws(d, i);
    std::sort(column.begin(), column.end());
    s.mean[i] = draws.col(i).mean();
    s.lower[i] = quantile_type7(column, 0.025);
    s.upper[i] = quantile_type7(column, 0.975);
  }
  return s;
}

std::uint64_t threshold_stream(std::uint64_t stream, int k) {
  return mix_keys({stream, 0x54485245ULL, static_cast<std::uint64_t>(k)});  // "THRE"
}

Priors default_priors(const PanelDataset& data) {
  return Priors::defaults(data.covariate_dim, spatial::max_pairwise_distance(data.pooled_sites()));
}

FitResult fit_rstdr(const std::vector<PanelDataset>& datasets, const std::vector<double>& thresholds,
                    const Priors& priors, const FitOptions& options) {
  if (datasets.empty()) throw ConfigError("fit_rstdr: no datasets");
  if (datasets.size() != thresholds.size()) throw DimensionMismatch("fit_rstdr: one threshold per dataset");
  const PanelDataset& first = datasets.front();
  for (const auto& d : datasets) {
    if (d.size() != first.size() || d.periods != first.periods || d.trials != first.trials ||
        d.locations != first.locations) {
      throw DimensionMismatch("fit_rstdr: datasets do not share site/period structure");
    }
  }
  options.sampler.validate();
  const int K = static_cast<int>(datasets.size());
  const int n = first.size();

  FitResult result;
  RngStream knot_rng(options.sampler.seed, mix_keys({options.sampler.stream, mcmc::kKnotStreamKey}));
  result.knots = spatial::select_knots(first.pooled_sites(), options.sampler.knot_count, knot_rng,
                                       options.sampler.kmeans);
  result.chains.resize(K);

  std::vector<std::exception_ptr> errors(K);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next++; k < K; k = next++) {
      try {
        mcmc::SamplerConfig cfg = options.sampler;
        cfg.stream = threshold_stream(options.sampler.stream, k);
        result.chains[k] = mcmc::run_chain(datasets[k], priors, cfg, result.knots);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int jobs = std::clamp(options.jobs, 1, K);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int k = 0; k < K; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const ChainError& e) {
      throw ChainError("threshold " + std::to_string(k) + ": " + e.what(), e.iteration());
    } catch (const std::exception& e) {
      throw ChainError("threshold " + std::to_string(k) + ": " + e.what(), -1);
    }
  }

  DistributionSurface& s = result.surface;
  s.thresholds = thresholds;
  s.mean.resize(n, K);
  s.lower.resize(n, K);
  s.upper.resize(n, K);
  for (int k = 0; k < K; ++k) {
    const ColumnSummary cs = summarize_columns(result.chains[k].cdf);
    s.mean.col(k) = cs.mean;
    s.lower.col(k) = cs.lower;
    s.upper.col(k) = cs.upper;
    if (options.keep_draws || options.monotone) s.draws.push_back(result.chains[k].cdf);
  }
  if (options.monotone) {
    s = monotone_rearrange(s);
    if (!options.keep_draws) s.draws.clear();
  }
  return result;
}

DistributionSurface monotone_rearrange(const DistributionSurface& surface) {
  DistributionSurface out = surface;
  const int n = surface.observations();
  const int K = surface.threshold_count();
  std::vector<double> row(K);
  auto sort_rows = [&](Matrix& m) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) row[k] = m(i, k);
      std::sort(row.begin(), row.end());
      for (int k = 0; k < K; ++k) m(i, k) = row[k];
    }
  };
  sort_rows(out.mean);
  if (surface.draws.empty()) {
    sort_rows(out.lower);
    sort_rows(out.upper);
    return out;
  }
  const Eigen::Index draws = surface.draws.front().rows();
  for (Eigen::Index d = 0; d < draws; ++d) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) row[k] = surface.draws[k](d, i);
      std::sort(row.begin(), row.end());
      for (int k = 0; k < K; ++k) out.draws[k](d, i) = row[k];
    }
  }
  for (int k = 0; k < K; ++k) {
    const ColumnSummary cs = summarize_columns(out.draws[k]);
    // The sorted mean need not lie inside the sorted-draw interval; widen so it does.
    out.lower.col(k) = cs.lower.cwiseMin(out.mean.col(k));
    out.upper.col(k) = cs.upper.cwiseMax(out.mean.col(k));
  }
  return out;
}

}  // namespace rstdr::dr
