#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "rstdr/checks.hpp"
#include "rstdr/errors.hpp"
#include "table_io.hpp"

#ifndef RSTDR_VERSION
#define RSTDR_VERSION "0.0.0"
#endif
#ifndef RSTDR_BUILD_HASH
#define RSTDR_BUILD_HASH "unknown"
#endif

namespace rstdr::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Output directory plus manifest bookkeeping for one command run.
class Run {
 public:
  Run(std::string command, const RunConfig& config)
      : command_(std::move(command)), config_(config), dir_(resolve_output_dir(config)), started_(utc_timestamp()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_ + "': " + ec.message());
  }

  std::string path(const std::string& name) {
    outputs_.push_back(name);
    return (fs::path(dir_) / name).string();
  }

  Json& extra() { return extra_; }

  /// Timestamps and runtime live only here, never in the CSV payloads.
  void write_manifest() {
    Json m;
    m["command"] = command_;
    m["version"] = RSTDR_VERSION;
    m["build"] = RSTDR_BUILD_HASH;
    m["config"] = config_.to_json();
    m["config"]["output_dir"] = dir_;
    m["outputs"] = outputs_;
    for (const auto& [key, value] : extra_.items()) m[key] = value;
    m["started_at"] = started_;
    m["finished_at"] = utc_timestamp();
    m["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
    const std::string file = (fs::path(dir_) / (command_ + "_manifest.json")).string();
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file + "' for writing");
    out << m.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + file + "'");
  }

 private:
  std::string command_;
  const RunConfig& config_;
  std::string dir_;
  std::string started_;
  std::chrono::steady_clock::time_point clock_ = std::chrono::steady_clock::now();
  std::vector<std::string> outputs_;
  Json extra_ = Json::object();
};

void require_input(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required setting '") + key + "'");
}

std::string base_name(const std::string& path) { return fs::path(path).filename().string(); }

/// Posterior draws of one file as named columns.
mcmc::BinaryDraws read_draws_any(const std::string& path) {
  if (fs::path(path).extension() == ".bin") return mcmc::read_draws_binary(path);
  const CsvTable table = read_csv(path);
  const int cit = table.column("iteration"), cpar = table.column("parameter"), cidx = table.column("index"),
            cval = table.column("value");
  std::vector<std::string> names;
  std::map<std::string, int> column_of;
  std::vector<long> iterations;
  std::map<long, int> row_of;
  std::vector<std::vector<double>> values;  // per column, per draw
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string name = table.rows[r][cpar] + "[" + std::to_string(table.integer(r, cidx)) + "]";
    const long it = table.integer(r, cit);
    auto [cpos, cnew] = column_of.try_emplace(name, static_cast<int>(names.size()));
    if (cnew) {
      names.push_back(name);
      values.emplace_back();
    }
    auto [rpos, rnew] = row_of.try_emplace(it, static_cast<int>(iterations.size()));
    if (rnew) iterations.push_back(it);
    auto& col = values[cpos->second];
    if (static_cast<int>(col.size()) != rpos->second) {
      throw SchemaError("'" + path + "': draws of '" + name + "' are not one per iteration in order");
    }
    col.push_back(table.number(r, cval));
  }
  mcmc::BinaryDraws out;
  out.names = names;
  out.values.resize(static_cast<Eigen::Index>(iterations.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (values[c].size() != iterations.size()) throw SchemaError("'" + path + "': ragged draws for " + names[c]);
    for (std::size_t d = 0; d < iterations.size(); ++d) out.values(d, c) = values[c][d];
  }
  return out;
}

}  // namespace

std::string version_string() { return std::string("rstdr ") + RSTDR_VERSION + " (build " + RSTDR_BUILD_HASH + ")"; }

int cmd_simulate(const RunConfig& config) {
  Run run("simulate", config);
  const sim::ScenarioSpec spec = config.scenario_spec();
  RngStream rng(config.seed, sim::replication_stream(config.seed, config.replication));
  const sim::Replication rep = sim::generate_replication(spec, rng);

  CsvWriter micro(run.path("micro.csv"), {"t", "site", "s1", "s2", "x", "z_star"});
  for (const auto& s : rep.samples) {
    for (double z : s.responses) {
      micro << s.period << s.site << s.location.s1 << s.location.s2 << s.covariates.at(1) << z;
      micro.end_row();
    }
  }
  micro.close();

  CsvWriter truth(run.path("truth.csv"), {"t", "site", "s1", "s2", "x", "threshold", "truth"});
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const auto& s = rep.samples[i];
    for (std::size_t k = 0; k < spec.thresholds.size(); ++k) {
      truth << s.period << s.site << s.location.s1 << s.location.s2 << s.covariates.at(1) << spec.thresholds[k]
            << rep.truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      truth.end_row();
    }
  }
  truth.close();
  run.extra()["sites"] = rep.samples.size();
  run.write_manifest();
  return kExitOk;
}

int cmd_bin(const RunConfig& config) {
  require_input(config.input, "input");
  Run run("bin", config);
  int periods = 0;
  const auto samples = read_micro(read_csv(config.input), &periods);
  const auto datasets = dr::bin_counts(samples, dr::ThresholdGrid(config.thresholds), periods);
  const PanelDataset& first = datasets.front();
  std::vector<std::string> header{"t", "site", "s1", "s2", "x", "n"};
  for (std::size_t k = 0; k < datasets.size(); ++k) header.push_back("y_" + std::to_string(k + 1));
  CsvWriter out(run.path("binned.csv"), header);
  for (int i = 0; i < first.size(); ++i) {
    out << first.period_of(i) + 1 << first.site_ids[i] << first.locations[i].s1 << first.locations[i].s2
        << first.design(i, 1) << first.trials[i];
    for (const auto& d : datasets) out << d.successes[i];
    out.end_row();
  }
  out.close();
  run.extra()["thresholds"] = config.thresholds;
  run.write_manifest();
  return kExitOk;
}

int cmd_fit(const RunConfig& config) {
  require_input(config.input, "input");
  Run run("fit", config);
  const BinnedInput input = read_fit_input(config.input, config.thresholds);
  const PanelDataset& first = input.datasets.front();
  if (first.covariate_dim != 2) throw SchemaError("fit expects covariates intercept + x");
  const Priors priors = config.priors(first);

  dr::FitOptions options;
  options.sampler = config.sampler();
  options.sampler.store_components = true;
  options.jobs = config.jobs;
  options.monotone = config.monotone;
  const dr::FitResult fit = dr::fit_rstdr(input.datasets, input.thresholds, priors, options);
  const bool bib = options.sampler.model == mcmc::ModelKind::BIB;

  std::vector<std::string> header{"t", "site", "s1", "s2", "x", "threshold", "mean", "lo95", "hi95", "pi_mean"};
  if (bib) {
    header.push_back("p0_mean");
    header.push_back("p1_mean");
  }
  const int K = static_cast<int>(input.thresholds.size());
  std::vector<Vector> pi_mean(K), p0_mean(K), p1_mean(K);
  for (int k = 0; k < K; ++k) {
    const mcmc::PosteriorDraws& c = fit.chains[k];
    pi_mean[k] = c.pi->colwise().mean().transpose();
    if (bib) {
      p0_mean[k] = c.p0->colwise().mean().transpose();
      p1_mean[k] = c.p1->colwise().mean().transpose();
    }
  }
  CsvWriter surface(run.path("surface.csv"), header);
  for (int i = 0; i < first.size(); ++i) {
    for (int k = 0; k < K; ++k) {
      surface << first.period_of(i) + 1 << first.site_ids[i] << first.locations[i].s1 << first.locations[i].s2
              << first.design(i, 1) << input.thresholds[k] << fit.surface.mean(i, k) << fit.surface.lower(i, k)
              << fit.surface.upper(i, k) << pi_mean[k][i];
      if (bib) surface << p0_mean[k][i] << p1_mean[k][i];
      surface.end_row();
    }
  }
  surface.close();

  CsvWriter knots(run.path("knots.csv"), {"knot", "s1", "s2"});
  for (std::size_t j = 0; j < fit.knots.size(); ++j) {
    knots << static_cast<long>(j) << fit.knots[j].s1 << fit.knots[j].s2;
    knots.end_row();
  }
  knots.close();

  Json acceptance = Json::array();
  for (int k = 0; k < K; ++k) {
    const std::string stem = "draws_" + std::to_string(k + 1);
    if (config.draws_format == "binary") {
      mcmc::write_draws_binary(run.path(stem + ".bin"), fit.chains[k]);
    } else if (config.draws_format == "csv") {
      mcmc::write_draws_csv(run.path(stem + ".csv"), fit.chains[k], config.include_cdf);
    }
    const auto& a = fit.chains[k].acceptance_rate;
    acceptance.push_back({{"threshold", input.thresholds[k]}, {"phi_u", a[0]}, {"phi_xi0", a[1]}, {"phi_xi1", a[2]}});
  }
  run.extra()["input_layout"] = input.from_micro ? "micro" : "binned";
  run.extra()["observations"] = first.size();
  run.extra()["periods"] = first.periods;
  run.extra()["covariates"] = "intercept + x";
  run.extra()["phi_acceptance"] = acceptance;
  run.write_manifest();
  return kExitOk;
}

int cmd_summarize(const RunConfig& config) {
  if (config.draws.empty()) throw ConfigError("missing required setting 'draws'");
  Run run("summarize", config);
  CsvWriter out(run.path("posterior_summary.csv"),
                {"file", "parameter", "draws", "mean", "sd", "q025", "q50", "q975"});
  std::vector<double> column;
  for (const auto& path : config.draws) {
    const mcmc::BinaryDraws d = read_draws_any(path);
    const Eigen::Index n = d.values.rows();
    if (n == 0) throw SchemaError("'" + path + "' holds no draws");
    for (std::size_t c = 0; c < d.names.size(); ++c) {
      if (!config.include_cdf && d.names[c].rfind("cdf[", 0) == 0) continue;
      const auto v = d.values.col(static_cast<Eigen::Index>(c));
      column.assign(v.data(), v.data() + n);
      std::sort(column.begin(), column.end());
      const double mean = v.mean();
      const double sd = n > 1 ? std::sqrt((v.array() - mean).square().sum() / (n - 1.0)) : 0.0;
      out << base_name(path) << d.names[c] << static_cast<long>(n) << mean << sd
          << dr::quantile_type7(column, 0.025) << dr::quantile_type7(column, 0.5)
          << dr::quantile_type7(column, 0.975);
      out.end_row();
    }
  }
  out.close();
  run.write_manifest();
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config) {
  require_input(config.surface, "surface");
  require_input(config.truth, "truth");
  Run run("evaluate", config);
  const CsvTable truth = read_csv(config.truth);
  const CsvTable surface = read_csv(config.surface);
  using Key = std::tuple<long, long, double>;
  std::map<Key, double> truth_of;
  {
    const int ct = truth.column("t"), cs = truth.column("site"), ca = truth.column("threshold"),
              cv = truth.column("truth");
    for (std::size_t r = 0; r < truth.rows.size(); ++r) {
      truth_of[{truth.integer(r, ct), truth.integer(r, cs), truth.number(r, ca)}] = truth.number(r, cv);
    }
  }
  const int ct = surface.column("t"), cs = surface.column("site"), ca = surface.column("threshold"),
            cm = surface.column("mean"), clo = surface.column("lo95"), chi = surface.column("hi95");
  struct Collected {
    std::vector<double> mean, lower, upper, truth;
  };
  std::map<double, Collected> by_threshold;
  for (std::size_t r = 0; r < surface.rows.size(); ++r) {
    const Key key{surface.integer(r, ct), surface.integer(r, cs), surface.number(r, ca)};
    const auto it = truth_of.find(key);
    if (it == truth_of.end()) {
      throw SchemaError("'" + config.truth + "' has no value for t=" + std::to_string(std::get<0>(key)) +
                        " site=" + std::to_string(std::get<1>(key)) + " threshold=" + surface.rows[r][ca]);
    }
    Collected& c = by_threshold[std::get<2>(key)];
    c.mean.push_back(surface.number(r, cm));
    c.lower.push_back(surface.number(r, clo));
    c.upper.push_back(surface.number(r, chi));
    c.truth.push_back(it->second);
  }
  auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), v.size()); };
  CsvWriter out(run.path("evaluation.csv"), {"threshold", "observations", "mse", "cp_percent", "al"});
  for (const auto& [a, c] : by_threshold) {
    sim::CoverageAccumulator acc;
    acc.add(vec(c.lower), vec(c.upper), vec(c.truth));
    out << a << static_cast<long>(c.truth.size()) << sim::compute_mse(vec(c.mean), vec(c.truth)) << acc.cp_percent()
        << acc.average_length();
    out.end_row();
  }
  out.close();
  run.write_manifest();
  return kExitOk;
}

int cmd_replicate(const RunConfig& config) {
  Run run("replicate", config);
  sim::StudyConfig study;
  study.spec = config.scenario_spec();
  study.methods.clear();
  for (const auto& m : config.methods) study.methods.push_back(mcmc::parse_model_kind(m));
  study.replications = config.replications;
  study.jobs = config.jobs;
  study.seed = config.seed;
  study.sampler = config.sampler();
  study.monotone = config.monotone;
  const sim::StudyResult result = sim::run_study(study);
  for (const auto& msg : result.failure_messages) std::cerr << "warning: fit failed: " << msg << '\n';
  if (result.failures == static_cast<int>(study.methods.size()) * study.replications) {
    throw ChainError("every replication failed", -1);
  }
  for (const char* name : {"mse_by_threshold.csv", "coverage.csv", "replication_raw.csv"}) run.path(name);
  sim::write_study_tables(resolve_output_dir(config), result);

  // study_meta.json carries the study constants; run-specific timing stays in the manifest.
  Json meta;
  meta["seed"] = study.seed;
  meta["replications"] = study.replications;
  meta["scenario"] = study.spec.scenario;
  meta["periods"] = study.spec.periods;
  meta["sites_per_period"] = study.spec.sites_per_period;
  meta["trials"] = {study.spec.trials_lower, study.spec.trials_upper};
  meta["thresholds"] = study.spec.thresholds;
  meta["tail_width"] = study.spec.tail_width;
  meta["mixing"] = sim::to_string(study.spec.mixing);
  meta["methods"] = config.methods;
  meta["iterations"] = study.sampler.iterations;
  meta["burn_in"] = study.sampler.burn_in;
  meta["knots"] = study.sampler.knot_count;
  meta["covariates"] = "intercept + x";
  meta["priors"] = "defaults";
  meta["failures"] = result.failures;
  meta["failure_messages"] = result.failure_messages;
  meta["version"] = RSTDR_VERSION;
  meta["build"] = RSTDR_BUILD_HASH;
  {
    const std::string file = run.path("study_meta.json");
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file + "' for writing");
    out << meta.dump(2) << '\n';
  }
  run.extra()["failures"] = result.failures;
  run.write_manifest();
  return kExitOk;
}

int cmd_check(const RunConfig& config) {
  checks::CheckOptions options;
  options.seed = config.seed;
  bool all = true;
  for (const auto& name : config.suites) {
    const checks::SuiteReport report = checks::run_suite(name, options);
    std::cout << "suite " << name << ": " << (report.passed() ? "PASS" : "FAIL") << '\n';
    for (const auto& c : report.checks) {
      std::cout << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.name << ": " << c.detail << '\n';
      std::cerr << "  (" << c.name << " took " << c.seconds << " s)\n";
    }
    all = all && report.passed();
  }
  std::cout << (all ? "all suites passed" : "some suites FAILED") << std::endl;
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace rstdr::cli
