#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nss/divergence.hpp"
#include "nss/error.hpp"
#include "nss/quadrature.hpp"
#include "nss/random.hpp"

namespace nss {

/// Location and length scale of a region where a model's densities live.
/// Quadrature places its breakpoints and window from these.
struct SupportHint {
  double centre = 0.0;
  double scale = 1.0;
};

/// A target/proposal pair on the real line with log densities, the log
/// density ratio log g = log p - log q, and a seeded proposal sampler.
template <class M>
concept DensityRatioModel =
    requires(const M& model, double x, Engine& engine, std::span<double> out) {
      { model.log_target(x) } -> std::convertible_to<double>;
      { model.log_proposal(x) } -> std::convertible_to<double>;
      { model.log_ratio(x) } -> std::convertible_to<double>;
      model.sample_proposal(engine, out);
      { model.support_hints() } -> std::convertible_to<std::vector<SupportHint>>;
    };

class Gaussian1D {
 public:
  Gaussian1D(double mean, double variance) : mean_(mean), variance_(variance) {
    detail::require(std::isfinite(mean), "Gaussian1D: mean must be finite");
    detail::require(std::isfinite(variance) && variance > 0.0,
                    "Gaussian1D: variance must be finite and > 0");
  }

  double mean() const { return mean_; }
  double variance() const { return variance_; }
  double sd() const { return std::sqrt(variance_); }

  double log_pdf(double x) const {
    const double z = x - mean_;
    return -0.5 * (z * z / variance_ + std::log(2.0 * std::numbers::pi * variance_));
  }

  double cdf(double x) const {
    return 0.5 * std::erfc(-(x - mean_) / (sd() * std::numbers::sqrt2));
  }

  /// P(x1 < X <= x2) without cancellation in either tail.
  double mass_between(double x1, double x2) const {
    const double z1 = (x1 - mean_) / (sd() * std::numbers::sqrt2);
    const double z2 = (x2 - mean_) / (sd() * std::numbers::sqrt2);
    if (z1 >= 0.0) return 0.5 * (std::erfc(z1) - std::erfc(z2));
    if (z2 <= 0.0) return 0.5 * (std::erfc(-z2) - std::erfc(-z1));
    return 0.5 * (std::erf(z2) - std::erf(z1));
  }

 private:
  double mean_;
  double variance_;
};

/// Gaussian target and Gaussian proposal with the exact quadratic log ratio.
class GaussianModel {
 public:
  GaussianModel(Gaussian1D target, Gaussian1D proposal)
      : target_(target), proposal_(proposal) {}

  const Gaussian1D& target() const { return target_; }
  const Gaussian1D& proposal() const { return proposal_; }

  double log_target(double x) const { return target_.log_pdf(x); }
  double log_proposal(double x) const { return proposal_.log_pdf(x); }

  double log_ratio(double x) const {
    const double dp = x - target_.mean();
    const double dq = x - proposal_.mean();
    return 0.5 * std::log(proposal_.variance() / target_.variance()) -
           dp * dp / (2.0 * target_.variance()) + dq * dq / (2.0 * proposal_.variance());
  }

  void sample_proposal(Engine& engine, std::span<double> out) const {
    std::normal_distribution<double> normal(proposal_.mean(), proposal_.sd());
    for (double& v : out) v = normal(engine);
  }

  std::vector<SupportHint> support_hints() const {
    return {{target_.mean(), target_.sd()}, {proposal_.mean(), proposal_.sd()}};
  }

 private:
  Gaussian1D target_;
  Gaussian1D proposal_;
};

inline GaussianModel make_gaussian_model(Gaussian1D target, Gaussian1D proposal) {
  return GaussianModel(target, proposal);
}

// Closed forms. Each is written to avoid cancellation when P is close to Q.

inline DivergenceValue kl_gaussian(const Gaussian1D& p, const Gaussian1D& q) {
  const double ratm1 = (p.variance() - q.variance()) / q.variance();
  const double dm = p.mean() - q.mean();
  // log1p only near ratio 1; far from it 1 + ratm1 has lost the low digits.
  const double log_ratio = std::abs(ratm1) < 0.5 ? std::log1p(ratm1)
                                                 : std::log(p.variance()) - std::log(q.variance());
  const double value = 0.5 * (ratm1 - log_ratio + dm * dm / q.variance());
  return DivergenceValue::closed_form(std::max(0.0, value));
}

/// Squared Hellinger distance 2 (1 - Bhattacharyya coefficient), in [0, 2].
inline DivergenceValue hellinger2_gaussian(const Gaussian1D& p, const Gaussian1D& q) {
  const double vsum = p.variance() + q.variance();
  const double dsd = p.sd() - q.sd();
  const double dm = p.mean() - q.mean();
  // 1 - dsd^2 / vsum = 2 sd_p sd_q / vsum
  const double x = dsd * dsd / vsum;
  const double log_overlap =
      x < 0.5 ? std::log1p(-x) : std::log(2.0 * p.sd() * q.sd() / vsum);
  const double log_bc = 0.5 * log_overlap - dm * dm / (4.0 * vsum);
  return DivergenceValue::closed_form(std::clamp(-2.0 * std::expm1(log_bc), 0.0, 2.0));
}

/// Q(g^2) - 1 after standardising the proposal to N(0, 1). +inf when the
/// standardised target variance is >= 2.
inline DivergenceValue chi2_gaussian(const Gaussian1D& p, const Gaussian1D& q) {
  const double m = (p.mean() - q.mean()) / q.sd();
  const double s2 = p.variance() / q.variance();
  if (s2 >= 2.0) {
    return DivergenceValue::closed_form(std::numeric_limits<double>::infinity());
  }
  const double d = 1.0 - s2;
  // exp(m^2 / (2 - s^2)) / (s sqrt(2 - s^2)) - 1, with s^2 (2 - s^2) = 1 - d^2
  const double log_s2_2ms2 = d * d < 0.5 ? std::log1p(-d * d) : std::log(s2 * (2.0 - s2));
  const double value = std::expm1(m * m / (2.0 - s2) - 0.5 * log_s2_2ms2);
  return DivergenceValue::closed_form(std::max(0.0, value));
}

/// sup_A |P(A) - Q(A)| from the crossing points of the two densities.
inline DivergenceValue tv_gaussian(const Gaussian1D& p, const Gaussian1D& q) {
  const double dm = p.mean() - q.mean();
  if (p.variance() == q.variance()) {
    return DivergenceValue::closed_form(
        std::erf(std::abs(dm) / (2.0 * p.sd() * std::numbers::sqrt2)));
  }
  // log p - log q = a x^2 + b x + c
  const double a = 0.5 / q.variance() - 0.5 / p.variance();
  const double b = p.mean() / p.variance() - q.mean() / q.variance();
  const double c = 0.5 * q.mean() * q.mean() / q.variance() -
                   0.5 * p.mean() * p.mean() / p.variance() +
                   0.5 * std::log(q.variance() / p.variance());
  const double disc = b * b - 4.0 * a * c;
  if (!(disc > 0.0)) {
    throw numerical_error("tv_gaussian: densities do not cross twice");
  }
  const double root = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double x1 = root / a;
  double x2 = c / root;
  if (x1 > x2) std::swap(x1, x2);
  const double value = std::abs(p.mass_between(x1, x2) - q.mass_between(x1, x2));
  return DivergenceValue::closed_form(std::clamp(value, 0.0, 1.0));
}

/// Tolerances and window for quadrature against a model's proposal.
struct QuadratureSpec {
  double absolute_tolerance = 1e-10;
  double relative_tolerance = 1e-11;
  // Half-width of the integration core in units of the widest scale.
  double integration_window = 40.0;
  std::size_t max_intervals = 10000;
  double overflow_threshold = 1e12;

  void validate() const {
    detail::require(absolute_tolerance > 0.0 && relative_tolerance > 0.0,
                    "QuadratureSpec: tolerances must be > 0");
    detail::require(integration_window >= 10.0, "QuadratureSpec: window must be >= 10");
    detail::require(max_intervals >= 1, "QuadratureSpec: max_intervals must be >= 1");
  }

  QuadratureOptions options() const {
    return {absolute_tolerance, relative_tolerance, max_intervals, overflow_threshold};
  }
};

namespace detail {

inline std::vector<double> model_breakpoints(const std::vector<SupportHint>& hints,
                                             double window, double& widest) {
  widest = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& h : hints) {
    widest = std::max(widest, h.scale);
    lo = std::min(lo, h.centre);
    hi = std::max(hi, h.centre);
  }
  lo -= window * widest;
  hi += window * widest;
  std::vector<double> points{lo, hi};
  constexpr double kOffsets[] = {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0,
                                 8.0, 12.0, 16.0, 24.0, 32.0};
  for (const auto& h : hints) {
    for (double k : kOffsets) {
      for (double x : {h.centre - k * h.scale, h.centre + k * h.scale}) {
        if (x > lo && x < hi) points.push_back(x);
      }
    }
  }
  return points;
}

}  // namespace detail

/// Integral over the real line of a function of x, laid out around the
/// model's support hints.
template <DensityRatioModel Model, class Integrand>
QuadratureResult integrate_over_model(const Model& model, Integrand&& integrand,
                                      const QuadratureSpec& spec = {}) {
  spec.validate();
  double widest = 0.0;
  auto points = detail::model_breakpoints(model.support_hints(), spec.integration_window,
                                          widest);
  return integrate_real_line(integrand, std::move(points), widest, spec.options());
}

/// D_f(P || Q) = int f(g(x)) q(x) dx by adaptive quadrature. Divergent
/// integrals come back as +inf; failure to converge throws numerical_error.
template <DensityRatioModel Model>
DivergenceValue quadrature_divergence(const Model& model, const ConvexGenerator& f,
                                      const QuadratureSpec& spec = {}) {
  auto integrand = [&](double x) {
    return f.perspective(model.log_target(x), model.log_proposal(x));
  };
  const QuadratureResult r = integrate_over_model(model, integrand, spec);
  switch (r.status) {
    case QuadratureStatus::converged:
      return DivergenceValue::quadrature(std::max(0.0, r.value));
    case QuadratureStatus::diagnosed_infinite:
      return DivergenceValue::quadrature(std::numeric_limits<double>::infinity());
    case QuadratureStatus::not_converged:
      break;
  }
  throw numerical_error("quadrature_divergence(" + std::string(f.name()) +
                        "): no convergence within " + std::to_string(r.intervals) +
                        " intervals, estimate " + std::to_string(r.value) + " +- " +
                        std::to_string(r.abs_error));
}

namespace detail {

struct RunningMoments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t non_finite = 0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  // Chan et al. pairwise combination.
  void merge(const RunningMoments& other) {
    non_finite += other.non_finite;
    if (other.count == 0) return;
    if (count == 0) {
      const auto nf = non_finite;
      *this = other;
      non_finite = nf;
      return;
    }
    const double n1 = static_cast<double>(count);
    const double n2 = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double n = n1 + n2;
    mean += delta * n2 / n;
    m2 += other.m2 + delta * delta * n1 * n2 / n;
    count += other.count;
  }
};

/// Runs body(chunk_index) for chunk_index in [0, chunks) on `workers` threads.
/// Work is keyed by chunk, so callers that seed per chunk get results that do
/// not depend on the worker count.
template <class Body>
void parallel_chunks(std::size_t chunks, unsigned workers, Body&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(
                                                         std::max<std::size_t>(chunks, 1))));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          const std::size_t c = next.fetch_add(1);
          if (c >= chunks) return;
          try {
            body(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(chunks);
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline constexpr std::uint64_t kMonteCarloChunk = 1u << 16;

/// (1/M) sum_i f(g(v_i)) over M proposal draws, with standard error
/// sd / sqrt(M). Chunk k of kMonteCarloChunk draws uses stream k of `seed`.
/// Draws with non-finite f(g(v)) are counted; if any occur the value and
/// standard error are +inf.
template <DensityRatioModel Model>
DivergenceValue mc_divergence(const Model& model, const ConvexGenerator& f,
                              std::uint64_t sample_count, std::uint64_t seed,
                              unsigned workers = 1) {
  detail::require(sample_count >= 2, "mc_divergence: sample_count must be >= 2");
  const std::size_t chunks =
      static_cast<std::size_t>((sample_count + kMonteCarloChunk - 1) / kMonteCarloChunk);
  std::vector<detail::RunningMoments> partial(chunks);

  detail::parallel_chunks(chunks, workers, [&](std::size_t c) {
    const std::uint64_t begin = c * kMonteCarloChunk;
    const std::uint64_t n = std::min(kMonteCarloChunk, sample_count - begin);
    std::vector<double> draws(n);
    Engine engine = make_engine(seed, c);
    model.sample_proposal(engine, draws);
    detail::RunningMoments& m = partial[c];
    for (double v : draws) {
      const double g = std::exp(model.log_ratio(v));
      const double fg = std::isfinite(g) ? f(g) : g;
      if (std::isfinite(fg)) {
        m.push(fg);
      } else {
        ++m.non_finite;
      }
    }
  });

  detail::RunningMoments total;
  for (const auto& m : partial) total.merge(m);
  if (total.non_finite > 0) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return DivergenceValue::monte_carlo(inf, inf, sample_count, total.non_finite);
  }
  const double n = static_cast<double>(total.count);
  const double sd = std::sqrt(total.m2 / (n - 1.0));
  return DivergenceValue::monte_carlo(total.mean, sd / std::sqrt(n), sample_count);
}

/// Whether g = dN(0, sigma2)/dN(0, 1) has a finite proposal moment of order
/// alpha. At sigma2 = alpha / (alpha - 1) the integrand is constant in the
/// tails, so the boundary is excluded.
inline bool moment_finiteness(double alpha, double sigma2) {
  detail::require(alpha > 0.0 && sigma2 > 0.0,
                  "moment_finiteness: alpha and sigma2 must be > 0");
  if (alpha <= 1.0) return true;
  return sigma2 < alpha / (alpha - 1.0);
}

}  // namespace nss
