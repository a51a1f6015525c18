#pragma once

// Experiment drivers behind the command-line tool: the Gaussian necessary
// sample size tables, bound checks for one pair, breakdown replication and
// ESS diagnostics. Also the CSV rendering shared by the tool and the tests.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nss/bounds.hpp"
#include "nss/divergence.hpp"
#include "nss/error.hpp"
#include "nss/gaussian.hpp"
#include "nss/importance_sampling.hpp"
#include "nss/random.hpp"

namespace nss {

enum class Command { table1, table2, table3, bounds, breakdown, ess };

struct ExperimentConfig {
  Command command = Command::table2;
  double target_mean = 0.0;
  double target_variance = 1.0;
  double proposal_mean = 0.0;
  double proposal_variance = 1.0;
  double epsilon = 0.1;
  double delta = 0.1;
  std::optional<DivergenceKind> metric;  // empty means all four
  std::uint64_t mc_samples = 1000000;
  std::uint64_t n_particles = 100;
  std::uint64_t replicates = 1000;
  std::uint64_t seed = kDefaultSeed;
  Method method = Method::closed_form;
  unsigned workers = 1;
  std::vector<std::uint64_t> n_list{1, 2, 4, 10, 100, 1000, 10000};
  std::vector<double> epsilon_list{0.0, 0.1, 1.0};

  ToleranceBudget budget() const { return {epsilon, delta}; }

  void validate() const {
    detail::require(std::isfinite(target_variance) && target_variance > 0.0,
                    "target variance must be > 0");
    detail::require(std::isfinite(proposal_variance) && proposal_variance > 0.0,
                    "proposal variance must be > 0");
    detail::require(std::isfinite(target_mean) && std::isfinite(proposal_mean),
                    "means must be finite");
    (void)budget();
    detail::require(mc_samples >= 2, "mc-samples must be >= 2");
    detail::require(n_particles >= 1, "particles must be >= 1");
    detail::require(replicates >= 1, "replicates must be >= 1");
    detail::require(workers >= 1, "workers must be >= 1");
    for (auto n : n_list) detail::require(n >= 1, "N list entries must be >= 1");
    for (double e : epsilon_list) {
      detail::require(std::isfinite(e) && e >= 0.0, "epsilon list entries must be >= 0");
    }
  }

  std::vector<DivergenceKind> metrics() const {
    if (metric) return {*metric};
    return {std::begin(kBuiltinKinds), std::end(kBuiltinKinds)};
  }
};

inline std::optional<DivergenceKind> parse_metric(std::string_view s) {
  if (s == "kl") return DivergenceKind::kullback_leibler;
  if (s == "chi2") return DivergenceKind::chi_squared;
  if (s == "tv") return DivergenceKind::total_variation;
  if (s == "hellinger") return DivergenceKind::squared_hellinger;
  if (s == "all") return std::nullopt;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

inline Method parse_method(std::string_view s) {
  if (s == "closed" || s == "closed_form" || s == "closed-form") return Method::closed_form;
  if (s == "quadrature") return Method::quadrature;
  if (s == "mc" || s == "monte-carlo" || s == "monte_carlo") return Method::monte_carlo;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

inline DivergenceValue closed_form_divergence(const Gaussian1D& p, const Gaussian1D& q,
                                              DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kullback_leibler: return kl_gaussian(p, q);
    case DivergenceKind::chi_squared: return chi2_gaussian(p, q);
    case DivergenceKind::total_variation: return tv_gaussian(p, q);
    case DivergenceKind::squared_hellinger: return hellinger2_gaussian(p, q);
    case DivergenceKind::custom: break;
  }
  throw std::invalid_argument("closed_form_divergence: no closed form for custom");
}

/// One divergence by the requested method. A chi-square that is infinite in
/// closed form stays infinite under every method: sample means of an
/// infinite expectation carry no information.
inline DivergenceValue gaussian_divergence(const Gaussian1D& p, const Gaussian1D& q,
                                           DivergenceKind kind, const ExperimentConfig& cfg) {
  const DivergenceValue exact = closed_form_divergence(p, q, kind);
  if (exact.is_infinite()) return exact;
  const GaussianModel model = make_gaussian_model(p, q);
  const ConvexGenerator f = ConvexGenerator::builtin(kind);
  switch (cfg.method) {
    case Method::closed_form: return exact;
    case Method::quadrature: return quadrature_divergence(model, f);
    case Method::monte_carlo:
      return mc_divergence(model, f, cfg.mc_samples, cfg.seed, cfg.workers);
  }
  return exact;
}

struct TableRow {
  std::string row_label;
  DivergenceKind metric = DivergenceKind::kullback_leibler;
  SampleSizeReport report;
};

inline std::vector<TableRow> run_pair(const std::string& label, const Gaussian1D& p,
                                      const Gaussian1D& q, const ExperimentConfig& cfg) {
  std::vector<TableRow> rows;
  for (DivergenceKind kind : cfg.metrics()) {
    DivergenceValue d = gaussian_divergence(p, q, kind, cfg);
    // Monte Carlo noise can push a bounded metric past its range.
    if (kind == DivergenceKind::total_variation) d.value = std::min(d.value, 1.0);
    if (kind == DivergenceKind::squared_hellinger) d.value = std::min(d.value, 2.0);
    rows.push_back({label, kind, necessary_n(d, kind, cfg.budget())});
  }
  return rows;
}

namespace detail {

inline std::string shortest(double x) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), r.ptr);
}

}  // namespace detail

inline std::vector<TableRow> run_table2(const ExperimentConfig& cfg) {
  std::vector<TableRow> rows;
  const Gaussian1D q(0.0, 1.0);
  for (double m : {2.0, 2.5, 3.0, 3.5}) {
    auto part = run_pair("m=" + detail::shortest(m), Gaussian1D(m, 1.0), q, cfg);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

inline std::vector<TableRow> run_table3(const ExperimentConfig& cfg) {
  std::vector<TableRow> rows;
  const Gaussian1D q(0.0, 1.0);
  for (double s2 : {1e-9, 1e-4, 16.0, 25.0}) {
    auto part = run_pair("sigma2=" + detail::shortest(s2), Gaussian1D(0.0, s2), q, cfg);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

inline std::vector<TableRow> run_bounds(const ExperimentConfig& cfg) {
  return run_pair("pair", Gaussian1D(cfg.target_mean, cfg.target_variance),
                  Gaussian1D(cfg.proposal_mean, cfg.proposal_variance), cfg);
}

struct Table1Row {
  std::uint64_t n = 1;
  double epsilon = 0.0;
  DivergenceKind metric = DivergenceKind::kullback_leibler;
  double generic = 0.0;
  double symbolic = 0.0;

  double abs_deviation() const { return std::abs(generic - symbolic); }
};

inline std::vector<Table1Row> run_table1(const std::vector<std::uint64_t>& n_list,
                                         const std::vector<double>& epsilon_list,
                                         const std::vector<DivergenceKind>& metrics) {
  std::vector<Table1Row> rows;
  for (DivergenceKind kind : metrics) {
    const ConvexGenerator f = ConvexGenerator::builtin(kind);
    for (double eps : epsilon_list) {
      for (auto n : n_list) {
        const double symbolic =
            eps == 0.0 ? u_f_symbolic(kind, n) : u_f_eps_symbolic(kind, n, eps);
        rows.push_back({n, eps, kind, u_f_eps(n, eps, f), symbolic});
      }
    }
  }
  return rows;
}

struct BreakdownSummary {
  DivergenceKind metric = DivergenceKind::kullback_leibler;
  DivergenceValue divergence;
  double threshold = 0.0;
  BreakdownReport report;

  bool below_threshold() const { return static_cast<double>(report.n_particles) < threshold; }
};

/// Breakdown replication for each selected metric. The exact divergence comes
/// from the closed form or quadrature; an infinite divergence is refused.
inline std::vector<BreakdownSummary> run_breakdown(const ExperimentConfig& cfg) {
  detail::require(cfg.method != Method::monte_carlo,
                  "breakdown needs an exact divergence: use --method closed or quadrature");
  const Gaussian1D p(cfg.target_mean, cfg.target_variance);
  const Gaussian1D q(cfg.proposal_mean, cfg.proposal_variance);
  const GaussianModel model = make_gaussian_model(p, q);
  std::vector<BreakdownSummary> out;
  for (DivergenceKind kind : cfg.metrics()) {
    const DivergenceValue d = gaussian_divergence(p, q, kind, cfg);
    if (d.is_infinite()) {
      if (cfg.metric) {
        throw std::invalid_argument("breakdown: " + std::string(to_string(kind)) +
                                    " divergence is infinite for this pair");
      }
      continue;
    }
    const SampleSizeReport threshold = necessary_n(d, kind, cfg.budget());
    out.push_back({kind, d, threshold.threshold,
                   breakdown_probability(model, ConvexGenerator::builtin(kind), d.value,
                                         cfg.n_particles, cfg.budget(), cfg.replicates,
                                         cfg.seed, cfg.workers)});
  }
  return out;
}

struct EssDiagnostics {
  std::uint64_t n = 0;
  double total_mass = 0.0;
  double ess_kl = 0.0;
  double ess_chi2 = 0.0;
};

inline EssDiagnostics run_ess(const ExperimentConfig& cfg) {
  const GaussianModel model = make_gaussian_model(
      Gaussian1D(cfg.target_mean, cfg.target_variance),
      Gaussian1D(cfg.proposal_mean, cfg.proposal_variance));
  const WeightedEmpiricalMeasure measure = sample_particles(model, cfg.n_particles, cfg.seed);
  if (measure.total_mass() == 0.0) {
    throw numerical_error("ess: every importance weight underflowed to zero");
  }
  const ProbabilityVector w_hat = normalized_weights(measure);
  return {measure.size(), measure.total_mass(), ess_kl(w_hat), ess_chi2(w_hat)};
}

// CSV rendering. Infinite values print as "---".

inline constexpr std::string_view kTableCsvHeader =
    "row_label,metric,divergence,divergence_method,divergence_stderr,threshold,"
    "necessary_n_integer,epsilon,delta,seed,threshold_full";

inline std::string format_two_decimals(double x) {
  if (std::isinf(x)) return "---";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string format_full(double x) {
  if (std::isinf(x)) return "---";
  return detail::shortest(x);
}

inline std::string table_csv(const std::vector<TableRow>& rows, const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << kTableCsvHeader << '\n';
  for (const auto& row : rows) {
    const auto& r = row.report;
    const auto n = r.necessary_n();
    out << row.row_label << ',' << to_string(row.metric) << ','
        << format_full(r.divergence.value) << ',' << to_string(r.divergence.method) << ','
        << (r.divergence.std_error ? format_full(*r.divergence.std_error) : std::string())
        << ',' << format_two_decimals(r.threshold) << ','
        << (n ? std::to_string(*n) : std::string("---")) << ','
        << detail::shortest(cfg.epsilon) << ',' << detail::shortest(cfg.delta) << ','
        << cfg.seed << ',' << format_full(r.threshold) << '\n';
  }
  return out.str();
}

inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::ostringstream out;
  out << "N,epsilon,metric,u_generic,u_symbolic,abs_deviation\n";
  for (const auto& r : rows) {
    out << r.n << ',' << detail::shortest(r.epsilon) << ',' << to_string(r.metric) << ','
        << detail::shortest(r.generic) << ',' << detail::shortest(r.symbolic) << ','
        << detail::shortest(r.abs_deviation()) << '\n';
  }
  return out.str();
}

inline std::string breakdown_csv(const std::vector<BreakdownSummary>& rows,
                                 const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "metric,divergence,threshold,n_particles,below_threshold,replicates,failure_count,"
         "failure_frequency,condition_i_violations,condition_ii_violations,overflow_count,"
         "epsilon,delta,seed\n";
  for (const auto& s : rows) {
    const auto& r = s.report;
    out << to_string(s.metric) << ',' << format_full(s.divergence.value) << ','
        << format_two_decimals(s.threshold) << ',' << r.n_particles << ','
        << (s.below_threshold() ? "true" : "false") << ',' << r.replicates << ','
        << r.failure_count << ',' << detail::shortest(r.failure_frequency) << ','
        << r.condition_i_violations << ',' << r.condition_ii_violations << ','
        << r.overflow_count << ',' << detail::shortest(cfg.epsilon) << ','
        << detail::shortest(cfg.delta) << ',' << cfg.seed << '\n';
  }
  return out.str();
}

inline std::string ess_csv(const EssDiagnostics& d, const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "n_particles,total_mass,ess_kl,ess_chi2,seed\n";
  out << d.n << ',' << detail::shortest(d.total_mass) << ',' << detail::shortest(d.ess_kl)
      << ',' << detail::shortest(d.ess_chi2) << ',' << cfg.seed << '\n';
  return out.str();
}

}  // namespace nss
