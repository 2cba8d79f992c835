#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace rstdr {

/**
 * @brief Reproducible random stream identified by (seed, stream_id).
 *
 * Two streams constructed with the same pair produce identical sequences.
 * Streams with different ids are seeded through a seed_seq over both words,
 * so independent tasks (thresholds, chains, replications) can be given
 * their own stream without sharing state.
 */
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream whose id mixes this stream's id with `key`.
  RngStream split(std::uint64_t key) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Exponential with unit rate.
  double exponential();

  engine_type& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer over a sequence of keys; used to derive stream ids.
std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys);

struct PgOptions {
  /// Integer shapes up to this value are drawn as exact sums of PG(1, c).
  int exact_cutoff = 200;
  /// Above the cutoff, use a moment-matched normal instead of the exact sum.
  bool gaussian_above_cutoff = false;
};

/// Mean of PG(b, c): (b / 2c) tanh(c / 2), with limit b / 4 at c = 0.
double pg_mean(double b, double c);
/// Variance of PG(b, c): b (sinh c - c) sech^2(c/2) / (4 c^3), limit b / 24.
double pg_variance(double b, double c);

/// Exact PG(1, c) draw via the alternating-series accept-reject sampler.
double draw_pg1(double c, RngStream& rng);

/**
 * Pólya-Gamma PG(b, c) draw for integer b >= 1.
 *
 * Only |c| is used, so PG(b, c) and PG(b, -c) consume the stream
 * identically. Throws InvalidShape for b < 1.
 */
double draw_pg(int b, double c, RngStream& rng, const PgOptions& options = {});

/// Gamma draw, shape-rate parametrization (mean shape / rate).
double draw_gamma(double shape, double rate, RngStream& rng);

/// Index drawn with probability proportional to `probs`.
int draw_categorical(std::span<const double> probs, RngStream& rng);

int draw_binomial(int n, double p, RngStream& rng);

}  // namespace rstdr
