#include "rstdr/simstudy.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <numbers>
#include <thread>

#include "rstdr/errors.hpp"

namespace rstdr::sim {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

std::unique_ptr<std::FILE, FileCloser> open_csv(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

}  // namespace

std::string to_string(MixingLevel level) { return level == MixingLevel::PerSite ? "per_site" : "per_response"; }

MixingLevel parse_mixing_level(const std::string& text) {
  if (text == "per_site") return MixingLevel::PerSite;
  if (text == "per_response") return MixingLevel::PerResponse;
  throw ConfigError("unknown mixing level '" + text + "' (expected per_site or per_response)");
}

void ScenarioSpec::validate() const {
  if (scenario != 1 && scenario != 2) throw ConfigError("scenario must be 1 or 2");
  if (periods < 1 || sites_per_period < 1) throw ConfigError("periods and sites_per_period must be >= 1");
  if (!(trials_lower >= 1.0 && trials_upper > trials_lower)) throw ConfigError("need 1 <= trials_lower < trials_upper");
  dr::ThresholdGrid grid(thresholds);
  if (!(thresholds.front() > 0.0)) throw ConfigError("thresholds must be positive (lower uniform lives on (0, a_1))");
  if (!(tail_width > 0.0)) throw ConfigError("tail_width must be positive");
}

ZetaTerms zeta_terms(int scenario, const spatial::Point& s, double indicator_weight) {
  const double bump = std::exp(-2.0 * s.s1 * s.s1 - 2.0 * s.s2 * s.s2);
  ZetaTerms z;
  z.zeta0 = std::sin(s.s1);
  z.zeta1 = std::cos(s.s1);
  if (scenario == 1) {
    z.zeta2 = bump + s.s1 + s.s2;
    return z;
  }
  const double step2 = s.s2 > 0.0 ? 1.0 : 0.0;
  const double step12 = s.s1 + s.s2 > 0.0 ? 1.0 : 0.0;
  z.zeta0 -= indicator_weight * 0.5 * step2;
  z.zeta1 -= indicator_weight * 0.5 * step2;
  z.zeta2 = bump + indicator_weight * (2.0 * step12 - 1.0);
  return z;
}

IotaTerms iota_terms(int t, int periods) {
  const double half_pi_t = std::numbers::pi * t / 2.0;
  return {0.5 * std::sin(half_pi_t), -0.5 * std::cos(half_pi_t), 1.5 * t / periods};
}

SiteParameters site_parameters(const ZetaTerms& z, const IotaTerms& i, double x) {
  const double nu0 = -1.0 + 0.5 * x + z.zeta0 + i.iota0;
  const double nu1 = -1.5 - x + z.zeta1 + i.iota1;
  const auto lambda = multinomial_logit(nu0, nu1);
  SiteParameters p;
  p.lambda0 = lambda[0];
  p.lambda1 = lambda[1];
  p.mu = 1.0 + x + z.zeta2 + i.iota2;
  p.sigma = std::exp(-1.5 + 0.2 * x + 0.5 * z.zeta2 + 0.5 * i.iota2);
  return p;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double truth_cdf(const SiteParameters& p, double a) {
  return p.lambda1 + (1.0 - p.lambda0 - p.lambda1) * normal_cdf((std::log(a) - p.mu) / p.sigma);
}

Replication generate_replication(const ScenarioSpec& spec, RngStream& rng) {
  spec.validate();
  const int K = static_cast<int>(spec.thresholds.size());
  const double a1 = spec.thresholds.front();
  const double aK = spec.thresholds.back();
  Replication rep;
  const int total = spec.periods * spec.sites_per_period;
  rep.samples.reserve(total);
  rep.truth.resize(total, K);

  auto draw_from = [&](int component, const SiteParameters& p) {
    switch (component) {
      case 0: return aK + spec.tail_width * rng.uniform();
      case 1: return a1 * rng.uniform();
      default: return std::exp(p.mu + p.sigma * rng.normal());
    }
  };

  int row = 0;
  for (int t = 1; t <= spec.periods; ++t) {
    const IotaTerms iota = iota_terms(t, spec.periods);
    for (int j = 0; j < spec.sites_per_period; ++j, ++row) {
      dr::MicroSample s;
      s.period = t;
      s.site = j;
      s.location = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
      const double x = 0.5 * rng.normal();
      s.covariates = {1.0, x};
      const int n = static_cast<int>(
          std::floor(spec.trials_lower + (spec.trials_upper - spec.trials_lower) * rng.uniform()));
      const SiteParameters p = site_parameters(zeta_terms(spec.scenario, s.location), iota, x);
      const double probs[3] = {p.lambda0, p.lambda1, 1.0 - p.lambda0 - p.lambda1};
      s.responses.resize(n);
      if (spec.mixing == MixingLevel::PerSite) {
        const int component = draw_categorical(probs, rng);
        for (auto& z : s.responses) z = draw_from(component, p);
        rep.component.push_back(component);
      } else {
        for (auto& z : s.responses) z = draw_from(draw_categorical(probs, rng), p);
        rep.component.push_back(-1);
      }
      for (int k = 0; k < K; ++k) rep.truth(row, k) = truth_cdf(p, spec.thresholds[k]);
      rep.parameters.push_back(p);
      rep.samples.push_back(std::move(s));
    }
  }
  return rep;
}

double compute_mse(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size() || truth.size() == 0) {
    throw DimensionMismatch("compute_mse: estimate and truth differ in length");
  }
  return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

void CoverageAccumulator::add(const Vector& lower, const Vector& upper, const Vector& truth) {
  if (lower.size() != truth.size() || upper.size() != truth.size()) {
    throw DimensionMismatch("coverage: interval and truth lengths differ");
  }
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth[i] >= lower[i] && truth[i] <= upper[i]) ++covered;
    length_sum += upper[i] - lower[i];
  }
  total += truth.size();
}

void CoverageAccumulator::merge(const CoverageAccumulator& other) {
  covered += other.covered;
  total += other.total;
  length_sum += other.length_sum;
}

double CoverageAccumulator::cp_percent() const { return total ? 100.0 * covered / total : 0.0; }
double CoverageAccumulator::average_length() const { return total ? length_sum / total : 0.0; }

CpAl compute_cp_al(const std::vector<dr::DistributionSurface>& surfaces, const std::vector<Matrix>& truths,
                   int k) {
  if (surfaces.size() != truths.size() || surfaces.empty()) {
    throw DimensionMismatch("compute_cp_al: need one truth per surface");
  }
  CoverageAccumulator acc;
  for (std::size_t r = 0; r < surfaces.size(); ++r) {
    if (truths[r].rows() != surfaces[r].observations() || k >= truths[r].cols() ||
        k >= surfaces[r].threshold_count()) {
      throw DimensionMismatch("compute_cp_al: surface and truth shapes differ");
    }
    acc.add(surfaces[r].lower.col(k), surfaces[r].upper.col(k), truths[r].col(k));
  }
  return {acc.cp_percent(), acc.average_length()};
}

void StudyConfig::validate() const {
  spec.validate();
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  sampler.validate();
}

const MethodSummary& StudyResult::find(mcmc::ModelKind method, double threshold) const {
  for (const auto& s : summary) {
    if (s.method == method && s.threshold == threshold) return s;
  }
  throw DimensionMismatch("no summary for " + mcmc::to_string(method) + " at threshold " + std::to_string(threshold));
}

std::uint64_t replication_stream(std::uint64_t seed, int replication) {
  return mix_keys({seed, 0x53494dULL, static_cast<std::uint64_t>(replication)});  // "SIM"
}

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const int K = static_cast<int>(config.spec.thresholds.size());
  const int R = config.replications;
  const int methods = static_cast<int>(config.methods.size());

  struct TaskOutput {
    bool ok = false;
    std::string error;
    std::vector<double> mse;
    std::vector<CoverageAccumulator> coverage;
  };
  std::vector<TaskOutput> outputs(static_cast<std::size_t>(R) * methods);
  std::mutex data_mutex;
  std::vector<std::shared_ptr<const Replication>> replications(R);
  std::vector<std::shared_ptr<const std::vector<PanelDataset>>> binned(R);

  // Data for replication r is generated once and shared by its method tasks.
  auto replication_data = [&](int r) {
    std::lock_guard<std::mutex> lock(data_mutex);
    if (!replications[r]) {
      RngStream rng(config.seed, replication_stream(config.seed, r));
      auto rep = std::make_shared<Replication>(generate_replication(config.spec, rng));
      binned[r] = std::make_shared<std::vector<PanelDataset>>(
          dr::bin_counts(rep->samples, dr::ThresholdGrid(config.spec.thresholds), config.spec.periods));
      replications[r] = rep;
    }
    return std::make_pair(replications[r], binned[r]);
  };

  std::atomic<int> next{0};
  const int tasks = R * methods;
  auto worker = [&]() {
    for (int task = next++; task < tasks; task = next++) {
      const int r = task / methods;
      const int m = task % methods;
      TaskOutput& out = outputs[task];
      try {
        auto [rep, datasets] = replication_data(r);
        dr::FitOptions options;
        options.sampler = config.sampler;
        options.sampler.model = config.methods[m];
        options.sampler.stream = mix_keys({replication_stream(config.seed, r), static_cast<std::uint64_t>(m)});
        options.monotone = config.monotone;
        const Priors priors = dr::default_priors(datasets->front());
        const dr::FitResult fit = dr::fit_rstdr(*datasets, config.spec.thresholds, priors, options);
        for (int k = 0; k < K; ++k) {
          out.mse.push_back(compute_mse(fit.surface.mean.col(k), rep->truth.col(k)));
          CoverageAccumulator acc;
          acc.add(fit.surface.lower.col(k), fit.surface.upper.col(k), rep->truth.col(k));
          out.coverage.push_back(acc);
        }
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = "replication " + std::to_string(r) + " " + mcmc::to_string(config.methods[m]) + ": " + e.what();
      }
      // Release the shared data once every method of this replication is done.
      std::lock_guard<std::mutex> lock(data_mutex);
      bool all_done = true;
      for (int mm = 0; mm < methods; ++mm) {
        const TaskOutput& o = outputs[static_cast<std::size_t>(r) * methods + mm];
        all_done = all_done && (o.ok || !o.error.empty());
      }
      if (all_done) {
        replications[r].reset();
        binned[r].reset();
      }
    }
  };
  const int jobs = std::clamp(config.jobs, 1, tasks);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  StudyResult result;
  for (int m = 0; m < methods; ++m) {
    for (int k = 0; k < K; ++k) {
      std::vector<double> mse;
      CoverageAccumulator acc;
      for (int r = 0; r < R; ++r) {
        const TaskOutput& o = outputs[static_cast<std::size_t>(r) * methods + m];
        if (!o.ok) continue;
        mse.push_back(o.mse[k]);
        acc.merge(o.coverage[k]);
        result.records.push_back({r, config.methods[m], config.spec.thresholds[k], o.mse[k],
                                  o.coverage[k].cp_percent(), o.coverage[k].average_length()});
      }
      MethodSummary s;
      s.method = config.methods[m];
      s.threshold = config.spec.thresholds[k];
      s.replications = static_cast<int>(mse.size());
      if (!mse.empty()) {
        double sum = 0.0;
        for (double v : mse) sum += v;
        s.mse_mean = sum / mse.size();
        std::sort(mse.begin(), mse.end());
        s.mse_lower = dr::quantile_type7(mse, 0.025);
        s.mse_upper = dr::quantile_type7(mse, 0.975);
      }
      s.cp_percent = acc.cp_percent();
      s.average_length = acc.average_length();
      result.summary.push_back(s);
    }
  }
  std::sort(result.records.begin(), result.records.end(), [](const ReplicationRecord& a, const ReplicationRecord& b) {
    if (a.replication != b.replication) return a.replication < b.replication;
    if (a.method != b.method) return a.method < b.method;
    return a.threshold < b.threshold;
  });
  for (const auto& o : outputs) {
    if (o.ok) continue;
    ++result.failures;
    result.failure_messages.push_back(o.error);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_study_tables(const std::string& dir, const StudyResult& result) {
  {
    auto f = open_csv(dir + "/mse_by_threshold.csv");
    std::fputs("method,threshold,mean,lo,hi\n", f.get());
    for (const auto& s : result.summary) {
      std::fprintf(f.get(), "%s,%.17g,%.17g,%.17g,%.17g\n", mcmc::to_string(s.method).c_str(), s.threshold,
                   s.mse_mean, s.mse_lower, s.mse_upper);
    }
  }
  {
    auto f = open_csv(dir + "/coverage.csv");
    std::fputs("method,threshold,cp_percent,al\n", f.get());
    for (const auto& s : result.summary) {
      std::fprintf(f.get(), "%s,%.17g,%.17g,%.17g\n", mcmc::to_string(s.method).c_str(), s.threshold,
                   s.cp_percent, s.average_length);
    }
  }
  {
    auto f = open_csv(dir + "/replication_raw.csv");
    std::fputs("replication,method,threshold,mse,cp_percent,al\n", f.get());
    for (const auto& r : result.records) {
      std::fprintf(f.get(), "%d,%s,%.17g,%.17g,%.17g,%.17g\n", r.replication, mcmc::to_string(r.method).c_str(),
                   r.threshold, r.mse, r.cp_percent, r.average_length);
    }
  }
}

}  // namespace rstdr::sim
