#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nss/error.hpp"

namespace nss {

enum class DivergenceKind {
  kullback_leibler,
  chi_squared,
  total_variation,
  squared_hellinger,
  custom
};

inline std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kullback_leibler: return "kl";
    case DivergenceKind::chi_squared: return "chi2";
    case DivergenceKind::total_variation: return "tv";
    case DivergenceKind::squared_hellinger: return "hellinger";
    case DivergenceKind::custom: return "custom";
  }
  return "custom";
}

inline constexpr DivergenceKind kBuiltinKinds[] = {
    DivergenceKind::kullback_leibler, DivergenceKind::chi_squared,
    DivergenceKind::total_variation, DivergenceKind::squared_hellinger};

namespace detail {

// Neumaier summation; the sums here mix terms of very different magnitude.
template <class Range>
double compensated_sum(const Range& values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

}  // namespace detail

/// Convex function f with f(1) = 0 that defines an f-divergence.
///
/// The limit f(0+) is stored rather than evaluated so that zero masses
/// contribute q_i * f(0) without producing 0 * log 0.
class ConvexGenerator {
 public:
  static ConvexGenerator kullback_leibler() {
    return ConvexGenerator(DivergenceKind::kullback_leibler, "kl", 0.0, {});
  }
  static ConvexGenerator chi_squared() {
    return ConvexGenerator(DivergenceKind::chi_squared, "chi2", 1.0, {});
  }
  static ConvexGenerator total_variation() {
    return ConvexGenerator(DivergenceKind::total_variation, "tv", 0.5, {});
  }
  static ConvexGenerator squared_hellinger() {
    return ConvexGenerator(DivergenceKind::squared_hellinger, "hellinger", 1.0,
                           {});
  }

  static ConvexGenerator builtin(DivergenceKind kind) {
    switch (kind) {
      case DivergenceKind::kullback_leibler: return kullback_leibler();
      case DivergenceKind::chi_squared: return chi_squared();
      case DivergenceKind::total_variation: return total_variation();
      case DivergenceKind::squared_hellinger: return squared_hellinger();
      case DivergenceKind::custom: break;
    }
    throw std::invalid_argument("builtin: custom is not a built-in generator");
  }

  /// User-supplied generator. Rejects f(1) != 0 and functions that fail
  /// the sampled midpoint-convexity check.
  static ConvexGenerator custom(std::string name, std::function<double(double)> f,
                                double value_at_zero);

  DivergenceKind kind() const { return kind_; }
  std::string_view name() const { return name_; }
  double value_at_zero() const { return value_at_zero_; }

  /// f(x) for x >= 0; f(0) is the stored right limit.
  double operator()(double x) const {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument("generator_eval: argument must be finite and >= 0");
    }
    if (x == 0.0) return value_at_zero_;
    return raw(x);
  }

  /// q * f(p / q) from log p and log q, evaluated without forming p / q when
  /// that would overflow. Returns +inf when the true value overflows.
  double perspective(double log_p, double log_q) const;

 private:
  ConvexGenerator(DivergenceKind kind, std::string name, double f0,
                  std::function<double(double)> fn)
      : kind_(kind), name_(std::move(name)), value_at_zero_(f0), fn_(std::move(fn)) {}

  double raw(double x) const {
    switch (kind_) {
      case DivergenceKind::kullback_leibler: return x * std::log(x);
      case DivergenceKind::chi_squared: return (x - 1.0) * (x - 1.0);
      case DivergenceKind::total_variation: return std::abs(x - 1.0) / 2.0;
      case DivergenceKind::squared_hellinger: {
        const double r = std::sqrt(x) - 1.0;
        return r * r;
      }
      case DivergenceKind::custom: return fn_(x);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  DivergenceKind kind_;
  std::string name_;
  double value_at_zero_;
  std::function<double(double)> fn_;
};

inline double generator_eval(const ConvexGenerator& f, double x) { return f(x); }

inline double ConvexGenerator::perspective(double log_p, double log_q) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (log_q == -inf) return log_p == -inf ? 0.0 : inf;
  if (log_p == -inf) return std::exp(log_q) * value_at_zero_;
  const double log_ratio = log_p - log_q;
  switch (kind_) {
    case DivergenceKind::kullback_leibler:
      return std::exp(log_p) * log_ratio;
    case DivergenceKind::chi_squared: {
      if (log_ratio <= 0.0) {
        const double d = std::expm1(log_ratio);
        return std::exp(log_q) * d * d;
      }
      // q (g - 1)^2 = exp(2 log p - log q) (1 - 1/g)^2
      return std::exp(2.0 * log_p - log_q +
                      2.0 * std::log1p(-std::exp(-log_ratio)));
    }
    case DivergenceKind::total_variation: {
      const double hi = std::max(log_p, log_q);
      const double lo = std::min(log_p, log_q);
      return -0.5 * std::exp(hi) * std::expm1(lo - hi);
    }
    case DivergenceKind::squared_hellinger: {
      const double hi = std::max(log_p, log_q);
      const double lo = std::min(log_p, log_q);
      const double d = std::expm1(0.5 * (lo - hi));
      return std::exp(hi) * d * d;
    }
    case DivergenceKind::custom: {
      const double g = std::exp(log_ratio);
      if (std::isinf(g)) return inf;
      return std::exp(log_q) * raw(g);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Sampled check of f((a+b)/2) <= (f(a)+f(b))/2 + slack over all grid pairs.
inline bool midpoint_convex(const ConvexGenerator& f, std::span<const double> grid,
                            double slack = 1e-12) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double a = grid[i];
      const double b = grid[j];
      if (f(0.5 * (a + b)) > 0.5 * (f(a) + f(b)) + slack) return false;
    }
  }
  return true;
}

/// Log-spaced points in (0, 1000] used to screen custom generators.
inline std::vector<double> convexity_grid(std::size_t count = 64) {
  std::vector<double> grid(count);
  const double lo = std::log(1e-6);
  const double hi = std::log(1e3);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(count - 1));
  }
  grid.back() = 1e3;
  return grid;
}

inline ConvexGenerator ConvexGenerator::custom(std::string name,
                                               std::function<double(double)> f,
                                               double value_at_zero) {
  detail::require(static_cast<bool>(f), "custom generator: empty function");
  detail::require(std::isfinite(value_at_zero),
                  "custom generator: value_at_zero must be finite");
  ConvexGenerator gen(DivergenceKind::custom, std::move(name), value_at_zero,
                      std::move(f));
  detail::require(std::abs(gen.raw(1.0)) <= 1e-12, "custom generator: f(1) must be 0");
  const auto grid = convexity_grid();
  detail::require(midpoint_convex(gen, grid),
                  "custom generator: midpoint convexity check failed");
  return gen;
}

/// Nonnegative entries with arbitrary total mass.
class MassVector {
 public:
  explicit MassVector(std::vector<double> entries) : entries_(std::move(entries)) {
    for (double e : entries_) {
      detail::require(std::isfinite(e) && e >= 0.0,
                      "MassVector: entries must be finite and nonnegative");
    }
    total_mass_ = detail::compensated_sum(entries_);
  }

  std::span<const double> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double total_mass() const { return total_mass_; }
  double operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<double> entries_;
  double total_mass_ = 0.0;
};

/// Nonnegative entries summing to one within 1e-12.
class ProbabilityVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ProbabilityVector(std::vector<double> entries) : entries_(std::move(entries)) {
    detail::require(!entries_.empty(), "ProbabilityVector: empty");
    for (double e : entries_) {
      detail::require(std::isfinite(e) && e >= 0.0,
                      "ProbabilityVector: entries must be finite and nonnegative");
    }
    detail::require(std::abs(detail::compensated_sum(entries_) - 1.0) <= kSumTolerance,
                    "ProbabilityVector: entries must sum to 1");
  }

  static ProbabilityVector uniform(std::size_t n) {
    detail::require(n >= 1, "ProbabilityVector::uniform: n must be >= 1");
    return ProbabilityVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static ProbabilityVector vertex(std::size_t n, std::size_t index) {
    detail::require(index < n, "ProbabilityVector::vertex: index out of range");
    std::vector<double> e(n, 0.0);
    e[index] = 1.0;
    return ProbabilityVector(std::move(e));
  }

  std::span<const double> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }

  MassVector as_mass() const { return MassVector(entries_); }

 private:
  std::vector<double> entries_;
};

enum class Method { closed_form, quadrature, monte_carlo };

inline std::string_view to_string(Method method) {
  switch (method) {
    case Method::closed_form: return "closed_form";
    case Method::quadrature: return "quadrature";
    case Method::monte_carlo: return "monte_carlo";
  }
  return "closed_form";
}

/// A divergence between two measures, possibly +inf, tagged with how it was
/// obtained. std_error and sample_count are set only for Monte Carlo values.
struct DivergenceValue {
  double value = 0.0;
  Method method = Method::closed_form;
  std::optional<double> std_error;
  std::optional<std::uint64_t> sample_count;
  // Monte Carlo draws whose f(g(v)) was not finite.
  std::uint64_t non_finite_samples = 0;

  bool is_infinite() const { return std::isinf(value) && value > 0.0; }

  static DivergenceValue closed_form(double v) { return {v, Method::closed_form, {}, {}, 0}; }
  static DivergenceValue quadrature(double v) { return {v, Method::quadrature, {}, {}, 0}; }
  static DivergenceValue monte_carlo(double v, double std_error, std::uint64_t samples,
                                     std::uint64_t non_finite = 0) {
    return {v, Method::monte_carlo, std_error, samples, non_finite};
  }
};

/// sum_i q_i f(p_i / q_i). p need not sum to one, so the result may be negative.
inline double discrete_divergence(std::span<const double> p, std::span<const double> q,
                                  const ConvexGenerator& f) {
  detail::require(p.size() == q.size(), "discrete_divergence: length mismatch");
  std::vector<double> terms;
  terms.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    detail::require(q[i] > 0.0, "discrete_divergence: q entries must be > 0");
    detail::require(std::isfinite(p[i]) && p[i] >= 0.0,
                    "discrete_divergence: p entries must be finite and >= 0");
    terms.push_back(p[i] == 0.0 ? q[i] * f.value_at_zero() : q[i] * f(p[i] / q[i]));
  }
  return detail::compensated_sum(terms);
}

inline double discrete_divergence(const MassVector& p, const ProbabilityVector& q,
                                  const ConvexGenerator& f) {
  return discrete_divergence(p.entries(), q.entries(), f);
}

/// D_f(p || u) against the uniform vector of the same length.
inline double divergence_vs_uniform(std::span<const double> p, const ConvexGenerator& f) {
  detail::require(!p.empty(), "divergence_vs_uniform: p is empty");
  const std::vector<double> u(p.size(), 1.0 / static_cast<double>(p.size()));
  return discrete_divergence(p, u, f);
}

inline double divergence_vs_uniform(const MassVector& p, const ConvexGenerator& f) {
  return divergence_vs_uniform(p.entries(), f);
}

struct InequalityReport {
  bool kl_below_log_chi2 = false;        // D_KL <= log(1 + D_chi2)
  bool tv_below_half_root_chi2 = false;  // D_TV <= sqrt(D_chi2) / 2
  bool hellinger_below_root_chi2 = false;  // D_Hell <= sqrt(D_chi2)

  bool all() const {
    return kl_below_log_chi2 && tv_below_half_root_chi2 && hellinger_below_root_chi2;
  }
};

/// Checks the standard chi-square domination bounds for one ordered pair.
/// hellinger2 is the squared Hellinger distance.
inline InequalityReport divergence_inequality_report(double kl, double chi2, double tv,
                                                     double hellinger2,
                                                     double tolerance = 1e-9) {
  for (double v : {kl, chi2, tv, hellinger2}) {
    detail::require(!std::isnan(v) && v >= 0.0,
                    "divergence_inequality_report: inputs must be >= 0");
  }
  if (std::isinf(chi2)) return {true, true, true};
  return {kl <= std::log1p(chi2) + tolerance,
          tv <= std::sqrt(chi2) / 2.0 + tolerance,
          std::sqrt(hellinger2) <= std::sqrt(chi2) + tolerance};
}

inline InequalityReport divergence_inequality_report(const DivergenceValue& kl,
                                                     const DivergenceValue& chi2,
                                                     const DivergenceValue& tv,
                                                     const DivergenceValue& hellinger2) {
  return divergence_inequality_report(kl.value, chi2.value, tv.value, hellinger2.value);
}

}  // namespace nss
