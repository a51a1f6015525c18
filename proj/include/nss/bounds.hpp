#pragma once

// Upper bounds on the discrete f-divergence against uniform weights, and the
// sample sizes below which importance sampling must fail for a given
// divergence between target and proposal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "nss/divergence.hpp"
#include "nss/error.hpp"

namespace nss {

/// epsilon bounds the excess mass of the weights, delta the error of the
/// Monte Carlo estimate of Q(f o g).
struct ToleranceBudget {
  double epsilon = 0.1;
  double delta = 0.1;

  ToleranceBudget(double eps, double del) : epsilon(eps), delta(del) {
    detail::require(std::isfinite(epsilon) && epsilon > 0.0,
                    "ToleranceBudget: epsilon must be > 0");
    detail::require(std::isfinite(delta) && delta > 0.0,
                    "ToleranceBudget: delta must be > 0");
  }

  /// Relative-error form: delta = delta_star * D_f.
  static ToleranceBudget relative(double epsilon, double delta_star, double divergence) {
    detail::require(delta_star > 0.0 && delta_star < 1.0,
                    "ToleranceBudget::relative: delta_star must be in (0, 1)");
    detail::require(std::isfinite(divergence) && divergence > 0.0,
                    "ToleranceBudget::relative: divergence must be finite and > 0");
    return {epsilon, delta_star * divergence};
  }
};

inline double u_f_eps(std::uint64_t n, double epsilon, const ConvexGenerator& f) {
  detail::require(n >= 1, "u_f_eps: N must be >= 1");
  detail::require(std::isfinite(epsilon) && epsilon >= 0.0, "u_f_eps: epsilon must be >= 0");
  const double nd = static_cast<double>(n);
  return (f((1.0 + epsilon) * nd) + (nd - 1.0) * f.value_at_zero()) / nd;
}

/// (f(N) + (N - 1) f(0)) / N, the largest D_f(p || u) over the simplex.
inline double u_f(std::uint64_t n, const ConvexGenerator& f) {
  detail::require(n >= 1, "u_f: N must be >= 1");
  return u_f_eps(n, 0.0, f);
}

/// Symbolic forms of u_f_eps for the built-in generators.
inline double u_f_eps_symbolic(DivergenceKind kind, std::uint64_t n, double epsilon) {
  detail::require(n >= 1, "u_f_eps_symbolic: N must be >= 1");
  const double nd = static_cast<double>(n);
  const double e1 = 1.0 + epsilon;
  switch (kind) {
    case DivergenceKind::kullback_leibler: return e1 * std::log(nd * e1);
    case DivergenceKind::chi_squared: return nd * e1 * e1 - (1.0 + 2.0 * epsilon);
    case DivergenceKind::total_variation: return 1.0 - 1.0 / nd + epsilon / 2.0;
    case DivergenceKind::squared_hellinger:
      return 2.0 * (1.0 - std::sqrt(e1 / nd) + epsilon / 2.0);
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("u_f_eps_symbolic: no closed form for custom generators");
}

inline double u_f_symbolic(DivergenceKind kind, std::uint64_t n) {
  const double nd = static_cast<double>(n);
  switch (kind) {
    case DivergenceKind::kullback_leibler: return std::log(nd);
    case DivergenceKind::chi_squared: return nd - 1.0;
    case DivergenceKind::total_variation: return 1.0 - 1.0 / nd;
    case DivergenceKind::squared_hellinger: return 2.0 * (1.0 - 1.0 / std::sqrt(nd));
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("u_f_symbolic: no closed form for custom generators");
}

namespace detail {

inline void require_metric_range(double d, DivergenceKind kind) {
  require(!std::isnan(d) && d >= 0.0, "divergence must be >= 0");
  if (kind == DivergenceKind::total_variation) {
    require(d <= 1.0, "total variation must be <= 1");
  } else if (kind == DivergenceKind::squared_hellinger) {
    require(d <= 2.0, "squared Hellinger distance must be <= 2");
  }
}

}  // namespace detail

/// Smallest N compatible with MSE(pi^N(1)) <= C. Hellinger input is squared.
inline double mse_necessary_n(double c, double d, DivergenceKind kind) {
  detail::require(std::isfinite(c) && c > 0.0, "mse_necessary_n: C must be > 0");
  detail::require_metric_range(d, kind);
  switch (kind) {
    case DivergenceKind::chi_squared: return d / c;
    case DivergenceKind::kullback_leibler: return std::expm1(d) / c;
    case DivergenceKind::total_variation: return 4.0 * d * d / c;
    case DivergenceKind::squared_hellinger: return d / c;
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("mse_necessary_n: unsupported metric");
}

inline double mse_necessary_n(double c, const DivergenceValue& d, DivergenceKind kind) {
  return mse_necessary_n(c, d.value, kind);
}

/// D_f <= U_f(N, epsilon) + delta: the conclusion that must hold whenever the
/// mass and estimation conditions can hold together with positive probability.
inline bool theorem1_holds(double d_f, std::uint64_t n, const ToleranceBudget& budget,
                           const ConvexGenerator& f) {
  detail::require(!std::isnan(d_f), "theorem1_holds: divergence is NaN");
  if (std::isinf(d_f)) return d_f < 0.0;
  return d_f <= u_f_eps(n, budget.epsilon, f) + budget.delta;
}

inline bool theorem1_holds(const DivergenceValue& d_f, std::uint64_t n,
                           const ToleranceBudget& budget, const ConvexGenerator& f) {
  return theorem1_holds(d_f.value, n, budget, f);
}

struct SampleSizeReport {
  DivergenceKind metric = DivergenceKind::kullback_leibler;
  DivergenceValue divergence;
  // Below this many samples failure has probability at least failure_probability.
  double threshold = 0.0;
  ToleranceBudget budget{0.1, 0.1};
  double failure_probability = 0.5;

  bool is_infinite() const { return std::isinf(threshold); }

  /// ceiling(threshold), at least 1; empty when the threshold is infinite.
  std::optional<std::uint64_t> necessary_n() const {
    if (is_infinite()) return std::nullopt;
    const double c = std::ceil(threshold);
    if (c >= 9.2e18) return std::nullopt;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(c));
  }

  /// Whether n samples fall strictly below the threshold.
  bool guarantees_failure(std::uint64_t n) const {
    return static_cast<double>(n) < threshold;
  }
};

/// Closed-form necessary sample size for one of the four built-in metrics.
/// A chi-square threshold that would be negative (delta > 1 + 2 eps + D) is
/// reported as 0.
inline SampleSizeReport necessary_n(const DivergenceValue& d, DivergenceKind metric,
                                    const ToleranceBudget& budget) {
  detail::require_metric_range(d.value, metric);
  const double eps = budget.epsilon;
  const double delta = budget.delta;
  constexpr double inf = std::numeric_limits<double>::infinity();
  SampleSizeReport report{metric, d, 0.0, budget, 0.5};
  switch (metric) {
    case DivergenceKind::kullback_leibler:
      report.threshold =
          d.is_infinite() ? inf : std::exp((d.value - delta) / (1.0 + eps)) / (1.0 + eps);
      return report;
    case DivergenceKind::chi_squared:
      report.threshold = d.is_infinite()
                             ? inf
                             : std::max(0.0, 1.0 + 2.0 * eps + d.value - delta) /
                                   ((1.0 + eps) * (1.0 + eps));
      return report;
    case DivergenceKind::total_variation:
      report.threshold = 1.0 / (1.0 + eps / 2.0 + delta - d.value);
      return report;
    case DivergenceKind::squared_hellinger: {
      const double gap = 2.0 + eps + delta - d.value;
      report.threshold = 4.0 * (1.0 + eps) / (gap * gap);
      return report;
    }
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("necessary_n: use generic_necessary_n for custom generators");
}

inline SampleSizeReport necessary_n(double d, DivergenceKind metric,
                                    const ToleranceBudget& budget) {
  return necessary_n(DivergenceValue::closed_form(d), metric, budget);
}

/// Smallest N with U_f(N, eps) + delta >= d_f, by exponential search and
/// bisection. Empty when d_f is infinite or no N <= 2^63 qualifies. Throws
/// numerical_error if U_f(., eps) is found decreasing on [1, 2 N].
inline std::optional<std::uint64_t> generic_necessary_n(double d_f, const ConvexGenerator& f,
                                                        const ToleranceBudget& budget) {
  detail::require(!std::isnan(d_f), "generic_necessary_n: divergence is NaN");
  if (std::isinf(d_f)) return std::nullopt;
  auto holds = [&](std::uint64_t n) { return theorem1_holds(d_f, n, budget, f); };

  constexpr std::uint64_t kLimit = std::uint64_t{1} << 63;
  std::uint64_t hi = 1;
  while (!holds(hi)) {
    if (hi == kLimit) return std::nullopt;
    hi *= 2;
  }
  std::uint64_t lo = hi / 2;  // fails, or 0 when hi == 1
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (holds(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }

  // Bisection assumes U_f(., eps) is nondecreasing; spot-check it.
  const double top = 2.0 * static_cast<double>(hi);
  double previous = -std::numeric_limits<double>::infinity();
  constexpr int kProbes = 64;
  for (int i = 0; i <= kProbes; ++i) {
    const auto n = static_cast<std::uint64_t>(
        std::max(1.0, std::floor(std::pow(top, static_cast<double>(i) / kProbes))));
    const double u = u_f_eps(n, budget.epsilon, f);
    if (u < previous - 1e-12 * std::max(1.0, std::abs(previous))) {
      throw numerical_error("generic_necessary_n: U_f(N, eps) decreases in N for " +
                            std::string(f.name()));
    }
    previous = u;
  }
  return hi;
}

inline std::optional<std::uint64_t> generic_necessary_n(const DivergenceValue& d_f,
                                                        const ConvexGenerator& f,
                                                        const ToleranceBudget& budget) {
  return generic_necessary_n(d_f.value, f, budget);
}

/// Largest threshold a bounded metric can ever produce (its divergence at
/// the top of its range); +inf for KL and chi-square.
inline double max_informative_n(DivergenceKind metric, const ToleranceBudget& budget) {
  const double eps = budget.epsilon;
  const double delta = budget.delta;
  switch (metric) {
    case DivergenceKind::total_variation: return 1.0 / (eps / 2.0 + delta);
    case DivergenceKind::squared_hellinger:
      return 4.0 * (1.0 + eps) / ((eps + delta) * (eps + delta));
    case DivergenceKind::kullback_leibler:
    case DivergenceKind::chi_squared: return std::numeric_limits<double>::infinity();
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("max_informative_n: unsupported metric");
}

}  // namespace nss
