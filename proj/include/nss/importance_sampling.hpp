#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nss/bounds.hpp"
#include "nss/divergence.hpp"
#include "nss/error.hpp"
#include "nss/gaussian.hpp"
#include "nss/random.hpp"

namespace nss {

/// First particle whose weight g(v)/N overflowed a double.
struct WeightOverflow {
  std::size_t index = 0;
  double particle = 0.0;
  double log_weight = 0.0;
};

/// pi^N = sum_n w^n delta_{v^n}. The total mass is not normalised; it is one
/// of the quantities under test.
class WeightedEmpiricalMeasure {
 public:
  WeightedEmpiricalMeasure(std::vector<double> particles, std::vector<double> weights,
                           std::uint64_t seed = 0,
                           std::optional<WeightOverflow> overflow = std::nullopt)
      : particles_(std::move(particles)),
        weights_(std::move(weights)),
        seed_(seed),
        overflow_(overflow) {
    detail::require(!particles_.empty(), "WeightedEmpiricalMeasure: no particles");
    detail::require(particles_.size() == weights_.size(),
                    "WeightedEmpiricalMeasure: particles and weights differ in length");
    for (double w : weights_) {
      detail::require(!std::isnan(w) && w >= 0.0,
                      "WeightedEmpiricalMeasure: weights must be >= 0");
      detail::require(std::isfinite(w) || overflow_.has_value(),
                      "WeightedEmpiricalMeasure: infinite weight without overflow record");
    }
    total_mass_ = detail::compensated_sum(weights_);
  }

  std::span<const double> particles() const { return particles_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return particles_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::optional<WeightOverflow>& overflow() const { return overflow_; }

  /// pi^N(1)
  double total_mass() const { return total_mass_; }

 private:
  std::vector<double> particles_;
  std::vector<double> weights_;
  std::uint64_t seed_;
  std::optional<WeightOverflow> overflow_;
  double total_mass_ = 0.0;
};

struct TestFunction {
  std::function<double(double)> eval;
  std::string label;

  double operator()(double x) const { return eval(x); }

  static TestFunction constant(double c) {
    return {[c](double) { return c; }, "const"};
  }
  static TestFunction identity() {
    return {[](double x) { return x; }, "x"};
  }
};

/// N i.i.d. proposal draws with weights w^n = g(v^n) / N.
template <DensityRatioModel Model>
WeightedEmpiricalMeasure sample_particles(const Model& model, std::uint64_t n,
                                          std::uint64_t seed) {
  detail::require(n >= 1, "sample_particles: N must be >= 1");
  std::vector<double> particles(n);
  Engine engine = make_engine(seed);
  model.sample_proposal(engine, particles);

  const double nd = static_cast<double>(n);
  const double log_n = std::log(nd);
  std::vector<double> weights(n);
  std::optional<WeightOverflow> overflow;
  for (std::size_t i = 0; i < n; ++i) {
    const double log_g = model.log_ratio(particles[i]);
    const double log_w = log_g - log_n;
    const double g = std::exp(log_g);
    const double w = std::isfinite(g) ? g / nd : std::exp(log_w);
    if (std::isfinite(w)) {
      weights[i] = w;
    } else {
      weights[i] = std::numeric_limits<double>::infinity();
      if (!overflow) overflow = WeightOverflow{i, particles[i], log_w};
    }
  }
  return WeightedEmpiricalMeasure(std::move(particles), std::move(weights), seed, overflow);
}

/// Largest |w^n - g(v^n)/N| after recomputing the weights from the model.
template <DensityRatioModel Model>
double weight_recomputation_error(const WeightedEmpiricalMeasure& measure,
                                  const Model& model) {
  const double n = static_cast<double>(measure.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double expected = std::exp(model.log_ratio(measure.particles()[i])) / n;
    worst = std::max(worst, std::abs(measure.weights()[i] - expected));
  }
  return worst;
}

/// pi^N(phi) = sum_n w^n phi(v^n).
inline double estimate(const WeightedEmpiricalMeasure& measure, const TestFunction& phi) {
  if (const auto& o = measure.overflow()) {
    throw numerical_error("estimate: weight overflow at particle " + std::to_string(o->index));
  }
  std::vector<double> terms(measure.size());
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double value = phi(measure.particles()[i]);
    if (!std::isfinite(value)) {
      throw numerical_error("estimate: test function '" + phi.label +
                            "' is not finite at particle " + std::to_string(i));
    }
    terms[i] = measure.weights()[i] * value;
  }
  return detail::compensated_sum(terms);
}

/// Var_Q(g phi) / N by quadrature. +inf when Q((g phi)^2) diverges.
template <DensityRatioModel Model>
double exact_mse(const Model& model, const TestFunction& phi, std::uint64_t n,
                 const QuadratureSpec& spec = {}) {
  detail::require(n >= 1, "exact_mse: N must be >= 1");
  // Q((g phi)^2) = int p^2 / q phi^2
  auto second = [&](double x) {
    const double v = phi(x);
    if (v == 0.0) return 0.0;
    return std::exp(2.0 * model.log_target(x) - model.log_proposal(x)) * v * v;
  };
  auto first = [&](double x) {
    const double v = phi(x);
    if (v == 0.0) return 0.0;
    return std::exp(model.log_target(x)) * v;
  };
  const QuadratureResult m2 = integrate_over_model(model, second, spec);
  if (m2.status == QuadratureStatus::diagnosed_infinite) {
    return std::numeric_limits<double>::infinity();
  }
  const QuadratureResult m1 = integrate_over_model(model, first, spec);
  if (!m2.converged() || !m1.converged()) {
    throw numerical_error("exact_mse: quadrature did not converge");
  }
  return std::max(0.0, m2.value - m1.value * m1.value) / static_cast<double>(n);
}

inline ProbabilityVector normalized_weights(const WeightedEmpiricalMeasure& measure) {
  if (measure.overflow()) {
    throw numerical_error("normalized_weights: weight overflow at particle " +
                          std::to_string(measure.overflow()->index));
  }
  const double total = measure.total_mass();
  detail::require(total > 0.0, "normalized_weights: all weights are zero");
  std::vector<double> w(measure.weights().begin(), measure.weights().end());
  for (double& x : w) x /= total;
  return ProbabilityVector(std::move(w));
}

/// N / (1 + D_chi2(w_hat || u)) = 1 / sum (w_hat^n)^2, in [1, N].
inline double ess_chi2(const ProbabilityVector& w_hat) {
  std::vector<double> squares(w_hat.size());
  for (std::size_t i = 0; i < w_hat.size(); ++i) squares[i] = w_hat[i] * w_hat[i];
  const double n = static_cast<double>(w_hat.size());
  return std::clamp(1.0 / detail::compensated_sum(squares), 1.0, n);
}

/// N / exp(D_KL(w_hat || u)), D_KL(w_hat || u) = sum w_hat^n log(N w_hat^n), in [1, N].
inline double ess_kl(const ProbabilityVector& w_hat) {
  const double n = static_cast<double>(w_hat.size());
  std::vector<double> terms;
  terms.reserve(w_hat.size());
  for (double w : w_hat.entries()) {
    if (w > 0.0) terms.push_back(w * std::log(n * w));
  }
  return std::clamp(n / std::exp(detail::compensated_sum(terms)), 1.0, n);
}

/// One particle set checked against the two conditions whose joint success
/// forces D_f <= U_f(N, eps) + delta:
///   mass:     pi^N(1) - 1 <= epsilon
///   estimate: |Q(f o g) - (1/N) sum f(g(v^n))| <= delta
struct TrialOutcome {
  bool mass_ok = false;
  bool estimate_ok = false;
  bool weight_overflow = false;
  double mass = 0.0;
  double estimate = 0.0;

  bool failed() const { return !(mass_ok && estimate_ok); }
};

template <DensityRatioModel Model>
TrialOutcome breakdown_trial(const Model& model, const ConvexGenerator& f, double exact_d_f,
                             std::uint64_t n, const ToleranceBudget& budget,
                             std::uint64_t seed) {
  detail::require(std::isfinite(exact_d_f), "breakdown_trial: exact divergence must be finite");
  const WeightedEmpiricalMeasure measure = sample_particles(model, n, seed);

  TrialOutcome out;
  out.weight_overflow = measure.overflow().has_value();
  out.mass = measure.total_mass();
  out.mass_ok = !out.weight_overflow && out.mass - 1.0 <= budget.epsilon;

  std::vector<double> values(measure.size());
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double g = std::exp(model.log_ratio(measure.particles()[i]));
    values[i] = std::isfinite(g) ? f(g) : g;
  }
  out.estimate = detail::compensated_sum(values) / static_cast<double>(n);
  out.estimate_ok =
      std::isfinite(out.estimate) && std::abs(exact_d_f - out.estimate) <= budget.delta;
  return out;
}

struct BreakdownReport {
  std::uint64_t replicates = 0;
  std::uint64_t n_particles = 0;
  ToleranceBudget budget{0.1, 0.1};
  std::uint64_t failure_count = 0;
  double failure_frequency = 0.0;
  std::uint64_t condition_i_violations = 0;
  std::uint64_t condition_ii_violations = 0;
  std::uint64_t overflow_count = 0;

  bool operator==(const BreakdownReport& other) const {
    return replicates == other.replicates && n_particles == other.n_particles &&
           budget.epsilon == other.budget.epsilon && budget.delta == other.budget.delta &&
           failure_count == other.failure_count &&
           failure_frequency == other.failure_frequency &&
           condition_i_violations == other.condition_i_violations &&
           condition_ii_violations == other.condition_ii_violations &&
           overflow_count == other.overflow_count;
  }
};

/// Replicate r uses seed derive_seed(seed, r), so the report is independent
/// of the worker count.
template <DensityRatioModel Model>
BreakdownReport breakdown_probability(const Model& model, const ConvexGenerator& f,
                                      double exact_d_f, std::uint64_t n,
                                      const ToleranceBudget& budget,
                                      std::uint64_t replicates, std::uint64_t seed,
                                      unsigned workers = 1) {
  detail::require(replicates >= 1, "breakdown_probability: replicates must be >= 1");
  std::vector<TrialOutcome> outcomes(replicates);
  detail::parallel_chunks(static_cast<std::size_t>(replicates), workers, [&](std::size_t r) {
    outcomes[r] = breakdown_trial(model, f, exact_d_f, n, budget, derive_seed(seed, r));
  });

  BreakdownReport report;
  report.replicates = replicates;
  report.n_particles = n;
  report.budget = budget;
  for (const auto& o : outcomes) {
    report.failure_count += o.failed() ? 1 : 0;
    report.condition_i_violations += o.mass_ok ? 0 : 1;
    report.condition_ii_violations += o.estimate_ok ? 0 : 1;
    report.overflow_count += o.weight_overflow ? 1 : 0;
  }
  report.failure_frequency =
      static_cast<double>(report.failure_count) / static_cast<double>(replicates);
  return report;
}

}  // namespace nss
