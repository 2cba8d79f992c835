#include "rstdr/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rstdr/errors.hpp"

namespace rstdr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x52535444u};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::split(std::uint64_t key) const {
  return RngStream(seed_, mix_keys({stream_id_, key}));
}

double RngStream::uniform() {
  // 53 random bits mapped to the open interval (0, 1).
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

// ---------------------------------------------------------------------------
// Pólya-Gamma

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;
// Truncation point between the left (inverse-Gaussian) and right
// (exponential) proposal pieces of the J*(1, z) sampler.
constexpr double kTrunc = 2.0 / kPi;

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills-ratio asymptote once erfc underflows.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Coefficients a_n(x) of the alternating series for the J*(1, 0) density,
// a_n(x) = pi (n + 1/2) * g(x, n). The x-dependent prefactor is computed once
// per proposal; successive terms differ only through k = n + 1/2.
struct SeriesTerms {
  explicit SeriesTerms(double x) : x_(x), left_(x <= kTrunc) {
    if (left_) {
      const double r = 2.0 / (kPi * x);
      prefactor_ = kPi * r * std::sqrt(r);
      e0_ = std::exp(-0.5 / x);
    } else {
      prefactor_ = kPi;
      e0_ = std::exp(-0.125 * kPi2 * x);
    }
  }
  // The exponential factor of term n is e0^{(2n + 1)^2}.
  double operator()(int n) const {
    const double k = n + 0.5;
    double e;
    if (n == 0) {
      e = e0_;
    } else if (n == 1) {
      const double e2 = e0_ * e0_;
      const double e4 = e2 * e2;
      e = e4 * e4 * e0_;
    } else {
      e = std::exp(left_ ? -2.0 * k * k / x_ : -0.5 * kPi2 * k * k * x_);
    }
    return prefactor_ * k * e;
  }

 private:
  double x_;
  bool left_;
  double prefactor_;
  double e0_;
};

// Inverse-Gaussian IG(mu, 1) draw (Michael, Schucany & Haas).
double draw_inverse_gaussian(double mu, RngStream& rng) {
  const double v = rng.normal();
  const double y = v * v;
  double x = mu + 0.5 * mu * (mu * y - std::sqrt(4.0 * mu * y + mu * mu * y * y));
  if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  return x;
}

// IG(1/z, 1) truncated to (0, kTrunc).
double draw_truncated_inverse_gaussian(double z, RngStream& rng) {
  const double mu = 1.0 / z;
  double x;
  if (mu > kTrunc) {
    // Reciprocal of a truncated gamma(1/2) proposal, then accept on exp(-z^2 x / 2).
    while (true) {
      double e;
      double g;
      do {
        e = rng.exponential() * 2.0 + 0.5 * kPi;
        g = std::sqrt(0.5 * kPi) / std::sqrt(e);
      } while (rng.uniform() > g);
      x = 1.0 / e;
      if (std::log(rng.uniform()) < -0.5 * z * z * x) break;
    }
  } else {
    do {
      x = draw_inverse_gaussian(mu, rng);
    } while (x >= kTrunc);
  }
  return x;
}

}  // namespace

double pg_mean(double b, double c) {
  c = std::fabs(c);
  if (c < 1e-6) return b * (0.25 - c * c / 48.0);
  return b / (2.0 * c) * std::tanh(0.5 * c);
}

double pg_variance(double b, double c) {
  c = std::fabs(c);
  if (c < 1e-3) return b * (1.0 / 24.0 - c * c / 240.0);
  const double sech = 1.0 / std::cosh(0.5 * c);
  return b / (4.0 * c * c * c) * (std::sinh(c) - c) * sech * sech;
}

namespace {

// Exact J*(1, z) / 4 sampler with the z-dependent constants precomputed, so
// a PG(b, c) sum pays for them once.
class Pg1Sampler {
 public:
  explicit Pg1Sampler(double c) : z_(0.5 * std::fabs(c)) {
    rate_ = 0.5 * z_ * z_ + kPi2 / 8.0;
    const double log_a = std::log(4.0) - std::log(kPi) - z_;
    const double w = std::sqrt(0.5 * kPi);
    const double log_p = log_a + log_normal_cdf(w * (kTrunc * z_ - 1.0)) + std::log(rate_) + rate_ * kTrunc;
    const double log_q =
        log_a + 2.0 * z_ + log_normal_cdf(-w * (kTrunc * z_ + 1.0)) + std::log(rate_) + rate_ * kTrunc;
    right_prob_ = 1.0 / (1.0 + std::exp(log_p) + std::exp(log_q));
  }

  double operator()(RngStream& rng) const {
    while (true) {
      double x;
      if (rng.uniform() < right_prob_) {
        x = kTrunc + rng.exponential() / rate_;
      } else {
        x = draw_truncated_inverse_gaussian(z_, rng);
      }
      const SeriesTerms a(x);
      double s = a(0);
      const double u = rng.uniform() * s;
      for (int n = 1;; ++n) {
        if (n % 2 == 1) {
          s -= a(n);
          if (u <= s) return 0.25 * x;
        } else {
          s += a(n);
          if (u > s) break;
        }
      }
    }
  }

 private:
  double z_;
  double rate_;
  double right_prob_;
};

}  // namespace

double draw_pg1(double c, RngStream& rng) {
  // PG(1, c) = J*(1, |c| / 2) / 4.
  return Pg1Sampler(c)(rng);
}

double draw_pg(int b, double c, RngStream& rng, const PgOptions& options) {
  if (b < 1) throw InvalidShape("draw_pg: shape b must be a positive integer");
  if (!std::isfinite(c)) throw InvalidShape("draw_pg: tilt c must be finite");
  if (b > options.exact_cutoff && options.gaussian_above_cutoff) {
    const double mean = pg_mean(b, c);
    const double sd = std::sqrt(pg_variance(b, c));
    double x;
    do {
      x = mean + sd * rng.normal();
    } while (x <= 0.0);
    return x;
  }
  const Pg1Sampler one(c);
  double sum = 0.0;
  for (int j = 0; j < b; ++j) sum += one(rng);
  return sum;
}

// ---------------------------------------------------------------------------

double draw_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw InvalidShape("draw_gamma: shape and rate must be positive and finite");
  }
  // libstdc++ uses Marsaglia-Tsang squeeze with the u^(1/a) boost for a < 1.
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng.engine());
}

int draw_categorical(std::span<const double> probs, RngStream& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidSimplex("draw_categorical: negative or non-finite weight");
    total += p;
  }
  if (!(total > 0.0)) throw InvalidSimplex("draw_categorical: weights sum to zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

int draw_binomial(int n, double p, RngStream& rng) {
  if (n < 0) throw InvalidShape("draw_binomial: negative trial count");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidRange("draw_binomial: probability outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  std::binomial_distribution<int> dist(n, p);
  return dist(rng.engine());
}

}  // namespace rstdr
