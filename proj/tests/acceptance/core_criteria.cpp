#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "criteria.hpp"
#include "rstdr/checks.hpp"

namespace acceptance {

namespace fs = std::filesystem;
using rstdr::checks::CheckResult;

namespace {

std::string with_time(const CheckResult& r, double limit) {
  std::ostringstream out;
  out << r.detail << "; " << static_cast<int>(r.seconds + 0.5) << " s (limit " << limit << " s)";
  return out.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  return std::equal(std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>(),
                    std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>());
}

/// Runs every data-producing CLI command into `dir`; returns false on a nonzero exit.
bool run_pipeline(const std::string& cli, const fs::path& dir, std::string* failed) {
  const std::string d = dir.string();
  const std::string chain = " --iterations 150 --burn-in 50 --knots 4 --seed 11";
  const std::vector<std::string> commands{
      "simulate --scenario 2 --seed 7 --periods 3 --sites 12 --output-dir " + d + "/sim",
      "bin --input " + d + "/sim/micro.csv --output-dir " + d + "/bin",
      "fit --input " + d + "/sim/micro.csv" + chain + " --output-dir " + d + "/fit_micro",
      "fit --input " + d + "/bin/binned.csv" + chain + " --jobs 2 --output-dir " + d + "/fit_binned",
      "fit --input " + d + "/bin/binned.csv" + chain + " --model BN --draws-format csv --output-dir " + d + "/fit_bn",
      "summarize " + d + "/fit_micro/draws_1.bin " + d + "/fit_bn/draws_3.csv --output-dir " + d + "/summary",
      "evaluate --surface " + d + "/fit_micro/surface.csv --truth " + d + "/sim/truth.csv --output-dir " + d +
          "/eval",
      "replicate --scenario 1 --replications 2 --periods 2 --sites 10 --iterations 60 --burn-in 20 --knots 4"
      " --jobs 2 --output-dir " + d + "/study",
  };
  for (const auto& c : commands) {
    const std::string line = "\"" + cli + "\" " + c + " > /dev/null 2>&1";
    if (std::system(line.c_str()) != 0) {
      *failed = c;
      return false;
    }
  }
  return true;
}

}  // namespace

int run_core_criteria(const CoreOptions& options, Reporter& report) {
  rstdr::checks::CheckOptions opts;

  const CheckResult pg = rstdr::checks::pg_moment_grid(opts);
  report.line(3, pg.passed && pg.seconds <= 60.0, "PG moments: " + with_time(pg, 60));

  const CheckResult blocks = rstdr::checks::block_sampler_oracle(opts);
  report.line(4, blocks.passed && blocks.seconds <= 300.0, "block samplers vs dense oracle: " + with_time(blocks, 300));

  const CheckResult gauss = rstdr::checks::gaussian_conditional_oracles(opts);
  const CheckResult gamma = rstdr::checks::gamma_conditional_oracles(opts);
  report.line(5, gauss.passed && gamma.passed && gauss.seconds + gamma.seconds <= 10.0,
              "full-conditional oracles: " + gauss.detail + "; " + gamma.detail);

  const CheckResult gew = rstdr::checks::geweke(opts);
  report.line(6, gew.passed && gew.seconds <= 600.0, "Geweke test: " + with_time(gew, 600));

  const CheckResult rw = rstdr::checks::random_walk_density_equivalence(opts);
  report.line(7, rw.passed && rw.seconds <= 10.0, "random-walk joint vs sequential density: " + rw.detail);

  // Criterion 8: two identical runs of every command, compared file by file.
  const fs::path root(options.work_dir);
  fs::remove_all(root);
  std::string failed;
  bool ok = run_pipeline(options.cli_path, root / "run1", &failed) &&
            run_pipeline(options.cli_path, root / "run2", &failed);
  int compared = 0, differing = 0;
  std::string first_diff;
  if (ok) {
    for (const auto& entry : fs::recursive_directory_iterator(root / "run1")) {
      const auto ext = entry.path().extension();
      if (!entry.is_regular_file() || (ext != ".csv" && ext != ".bin")) continue;
      const fs::path rel = fs::relative(entry.path(), root / "run1");
      ++compared;
      if (!same_bytes(entry.path(), root / "run2" / rel)) {
        ++differing;
        if (first_diff.empty()) first_diff = rel.string();
      }
    }
  }
  std::ostringstream detail;
  detail << "CLI reruns (simulate, bin, fit x3, summarize, evaluate, replicate): ";
  if (!ok) {
    detail << "command failed: " << failed;
  } else {
    detail << compared << " data files compared, " << differing << " differ";
    if (differing > 0) detail << " (first: " << first_diff << ")";
  }
  report.line(8, ok && compared > 0 && differing == 0, detail.str());
  return report.failures();
}

}  // namespace acceptance
