#pragma once

// Globally adaptive 7/15-point Gauss-Kronrod quadrature on finite intervals
// and on the whole real line (tails mapped through x = c +- s t / (1 - t)).
//
// The interval budget is global. When it is exhausted the running integral
// decides the outcome: above overflow_threshold the integral is reported as
// divergent, otherwise as not converged.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "nss/divergence.hpp"
#include "nss/error.hpp"

namespace nss {

struct QuadratureOptions {
  double absolute_tolerance = 1e-10;
  double relative_tolerance = 1e-11;
  std::size_t max_intervals = 10000;
  double overflow_threshold = 1e12;
};

enum class QuadratureStatus { converged, diagnosed_infinite, not_converged };

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t intervals = 0;
  QuadratureStatus status = QuadratureStatus::converged;

  bool converged() const { return status == QuadratureStatus::converged; }
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

enum class Mapping { identity, upper_tail, lower_tail };

struct Segment {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  Mapping mapping = Mapping::identity;
};

struct ByError {
  bool operator()(const Segment& x, const Segment& y) const { return x.error < y.error; }
};

template <class F>
struct MappedIntegrand {
  F& f;
  double anchor = 0.0;
  double scale = 1.0;

  double operator()(Mapping mapping, double t) const {
    if (mapping == Mapping::identity) return f(t);
    const double one_minus = 1.0 - t;
    if (one_minus <= 0.0) return 0.0;
    const double u = t / one_minus;
    const double jacobian = scale / (one_minus * one_minus);
    const double x = mapping == Mapping::upper_tail ? anchor + scale * u
                                                    : anchor - scale * u;
    const double fx = f(x);
    return fx == 0.0 ? 0.0 : fx * jacobian;
  }
};

template <class G>
Segment gauss_kronrod15(const G& g, Mapping mapping, double a, double b) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  std::array<double, 15> values{};
  values[0] = g(mapping, centre);
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    values[1 + 2 * j] = g(mapping, centre - dx);
    values[2 + 2 * j] = g(mapping, centre + dx);
  }

  double kronrod = kKronrodWeights[7] * values[0];
  double gauss = kGaussWeights[3] * values[0];
  double abs_sum = kKronrodWeights[7] * std::abs(values[0]);
  for (std::size_t j = 0; j < 7; ++j) {
    const double pair = values[1 + 2 * j] + values[2 + 2 * j];
    kronrod += kKronrodWeights[j] * pair;
    abs_sum += kKronrodWeights[j] *
               (std::abs(values[1 + 2 * j]) + std::abs(values[2 + 2 * j]));
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  const double mean = 0.5 * kronrod;
  double asc = kKronrodWeights[7] * std::abs(values[0] - mean);
  for (std::size_t j = 0; j < 7; ++j) {
    asc += kKronrodWeights[j] *
           (std::abs(values[1 + 2 * j] - mean) + std::abs(values[2 + 2 * j] - mean));
  }

  Segment s{a, b, kronrod * half, std::abs((kronrod - gauss) * half), mapping};
  const double res_abs = abs_sum * std::abs(half);
  const double res_asc = asc * std::abs(half);
  // QUADPACK's error scaling for the 15-point rule.
  if (res_asc != 0.0 && s.error != 0.0) {
    s.error = res_asc * std::min(1.0, std::pow(200.0 * s.error / res_asc, 1.5));
  }
  if (res_abs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    s.error = std::max(50.0 * eps * res_abs, s.error);
  }
  if (!std::isfinite(s.value)) s.error = std::numeric_limits<double>::infinity();
  return s;
}

inline bool splittable(const Segment& s) {
  const double mid = 0.5 * (s.a + s.b);
  const double width = s.b - s.a;
  const double scale = std::max(std::abs(s.a), std::abs(s.b));
  return mid > s.a && mid < s.b &&
         width > 16.0 * std::numeric_limits<double>::epsilon() * scale;
}

struct InitialSegment {
  double a;
  double b;
  Mapping mapping;
};

template <class G>
QuadratureResult adaptive(const G& g, const std::vector<InitialSegment>& initial,
                          const QuadratureOptions& options) {
  std::priority_queue<Segment, std::vector<Segment>, ByError> active;
  std::vector<Segment> frozen;
  double total = 0.0;
  double total_error = 0.0;

  auto finish = [&](QuadratureStatus status) {
    std::vector<double> values;
    std::vector<double> errors;
    values.reserve(active.size() + frozen.size());
    errors.reserve(active.size() + frozen.size());
    while (!active.empty()) {
      values.push_back(active.top().value);
      errors.push_back(active.top().error);
      active.pop();
    }
    for (const auto& s : frozen) {
      values.push_back(s.value);
      errors.push_back(s.error);
    }
    QuadratureResult r;
    r.value = compensated_sum(values);
    r.abs_error = compensated_sum(errors);
    r.intervals = values.size();
    r.status = status;
    if (status == QuadratureStatus::diagnosed_infinite) {
      r.value = std::numeric_limits<double>::infinity();
    }
    return r;
  };

  for (const auto& init : initial) {
    Segment s = gauss_kronrod15(g, init.mapping, init.a, init.b);
    if (std::isnan(s.value)) return finish(QuadratureStatus::not_converged);
    if (std::isinf(s.value)) return finish(QuadratureStatus::diagnosed_infinite);
    total += s.value;
    total_error += s.error;
    active.push(s);
  }

  std::size_t count = initial.size();
  for (;;) {
    const double tolerance =
        std::max(options.absolute_tolerance, options.relative_tolerance * std::abs(total));
    if (total_error <= tolerance) return finish(QuadratureStatus::converged);

    const bool exhausted = count >= options.max_intervals || active.empty();
    if (exhausted) {
      return finish(std::abs(total) > options.overflow_threshold
                        ? QuadratureStatus::diagnosed_infinite
                        : QuadratureStatus::not_converged);
    }

    Segment worst = active.top();
    active.pop();
    if (!splittable(worst)) {
      frozen.push_back(worst);
      continue;
    }
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gauss_kronrod15(g, worst.mapping, worst.a, mid);
    const Segment right = gauss_kronrod15(g, worst.mapping, mid, worst.b);
    if (std::isnan(left.value) || std::isnan(right.value)) {
      active.push(worst);
      return finish(QuadratureStatus::not_converged);
    }
    if (std::isinf(left.value) || std::isinf(right.value)) {
      return finish(QuadratureStatus::diagnosed_infinite);
    }
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    active.push(left);
    active.push(right);
    ++count;
  }
}

}  // namespace detail

/// Integral of f over [a, b].
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& options = {}) {
  detail::require(std::isfinite(a) && std::isfinite(b) && a < b,
                  "integrate: need finite a < b");
  detail::MappedIntegrand<F> g{f, 0.0, 1.0};
  return detail::adaptive(g, {{a, b, detail::Mapping::identity}}, options);
}

/// Integral of f over the real line. Finite breakpoints split the core; the
/// two tails beyond the outermost breakpoints are mapped onto [0, 1) with
/// length scale tail_scale and pre-split towards t = 1.
template <class F>
QuadratureResult integrate_real_line(F&& f, std::vector<double> breakpoints,
                                     double tail_scale,
                                     const QuadratureOptions& options = {}) {
  detail::require(!breakpoints.empty(), "integrate_real_line: need a breakpoint");
  detail::require(std::isfinite(tail_scale) && tail_scale > 0.0,
                  "integrate_real_line: tail_scale must be > 0");
  for (double b : breakpoints) {
    detail::require(std::isfinite(b), "integrate_real_line: breakpoints must be finite");
  }
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

  std::vector<detail::InitialSegment> initial;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    initial.push_back({breakpoints[i], breakpoints[i + 1], detail::Mapping::identity});
  }

  constexpr int kTailSplits = 12;
  auto add_tail = [&](detail::Mapping mapping) {
    double t0 = 0.0;
    for (int j = 1; j <= kTailSplits; ++j) {
      const double t1 = 1.0 - std::ldexp(1.0, -j);
      initial.push_back({t0, t1, mapping});
      t0 = t1;
    }
    initial.push_back({t0, 1.0, mapping});
  };

  detail::MappedIntegrand<F> core{f, 0.0, 1.0};
  detail::MappedIntegrand<F> upper{f, breakpoints.back(), tail_scale};
  detail::MappedIntegrand<F> lower{f, breakpoints.front(), tail_scale};
  auto dispatch = [&](detail::Mapping mapping, double t) {
    switch (mapping) {
      case detail::Mapping::identity: return core(mapping, t);
      case detail::Mapping::upper_tail: return upper(mapping, t);
      case detail::Mapping::lower_tail: return lower(mapping, t);
    }
    return 0.0;
  };
  add_tail(detail::Mapping::upper_tail);
  add_tail(detail::Mapping::lower_tail);
  return detail::adaptive(dispatch, initial, options);
}

}  // namespace nss
