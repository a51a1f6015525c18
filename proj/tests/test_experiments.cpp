#include <cmath>
#include <string>
#include <vector>

#include "catch_amalgamated.hpp"
#include "nss/experiments.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using nss::DivergenceKind;

namespace {

double threshold_of(const std::vector<nss::TableRow>& rows, const std::string& label,
                    DivergenceKind kind) {
  for (const auto& r : rows) {
    if (r.row_label == label && r.metric == kind) return r.report.threshold;
  }
  FAIL("row not found: " << label);
  return NAN;
}

}  // namespace

TEST_CASE("config validation and parsing", "[experiments]") {
  nss::ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.target_variance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.delta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.replicates = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  CHECK(nss::parse_metric("kl") == DivergenceKind::kullback_leibler);
  CHECK_FALSE(nss::parse_metric("all").has_value());
  CHECK_THROWS_AS(nss::parse_metric("js"), std::invalid_argument);
  CHECK(nss::parse_method("mc") == nss::Method::monte_carlo);
  CHECK_THROWS_AS(nss::parse_method("exact"), std::invalid_argument);
}

TEST_CASE("table 2 thresholds", "[experiments]") {
  const nss::ExperimentConfig cfg;
  const auto rows = nss::run_table2(cfg);
  REQUIRE(rows.size() == 16);
  const char* labels[] = {"m=2", "m=2.5", "m=3", "m=3.5"};
  const double kl[] = {5.11, 14.22, 49.63, 217.45};
  const double hell[] = {2.20, 3.53, 6.10, 11.00};
  for (int i = 0; i < 4; ++i) {
    CHECK_THAT(threshold_of(rows, labels[i], DivergenceKind::kullback_leibler), WithinAbs(kl[i], 0.005));
    CHECK_THAT(threshold_of(rows, labels[i], DivergenceKind::squared_hellinger), WithinAbs(hell[i], 0.005));
  }
  CHECK_THAT(threshold_of(rows, "m=2", DivergenceKind::chi_squared), WithinAbs(45.21, 0.005));
  CHECK_THAT(threshold_of(rows, "m=2", DivergenceKind::total_variation), WithinAbs(2.14, 0.005));
  for (const auto& r : rows) CHECK(r.report.divergence.method == nss::Method::closed_form);
}

TEST_CASE("table 3 thresholds", "[experiments]") {
  const nss::ExperimentConfig cfg;
  const auto rows = nss::run_table3(cfg);
  REQUIRE(rows.size() == 16);
  CHECK_THAT(threshold_of(rows, "sigma2=1e-09", DivergenceKind::kullback_leibler),
             Catch::Matchers::WithinRel(6.50e3, 0.01));
  CHECK_THAT(threshold_of(rows, "sigma2=1e-04", DivergenceKind::kullback_leibler), WithinAbs(34.67, 0.005));
  CHECK_THAT(threshold_of(rows, "sigma2=16", DivergenceKind::kullback_leibler), WithinAbs(215.23, 0.005));
  CHECK_THAT(threshold_of(rows, "sigma2=1e-09", DivergenceKind::squared_hellinger), WithinAbs(94.39, 0.005));
  CHECK(std::isinf(threshold_of(rows, "sigma2=16", DivergenceKind::chi_squared)));
  CHECK(std::isinf(threshold_of(rows, "sigma2=25", DivergenceKind::chi_squared)));

  const std::string csv = nss::table_csv(rows, cfg);
  CHECK_THAT(csv, ContainsSubstring("sigma2=16,chi2,---,closed_form,,---,---,0.1,0.1,"));
  CHECK(csv.rfind(std::string(nss::kTableCsvHeader) + "\n", 0) == 0);
}

TEST_CASE("quadrature method reproduces the closed-form tables", "[experiments]") {
  nss::ExperimentConfig closed;
  nss::ExperimentConfig quad;
  quad.method = nss::Method::quadrature;
  const auto a = nss::run_table2(closed);
  const auto b = nss::run_table2(quad);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].report.divergence.method == nss::Method::quadrature);
    CHECK_THAT(b[i].report.threshold, Catch::Matchers::WithinRel(a[i].report.threshold, 1e-7));
  }
}

TEST_CASE("table 1 rows", "[experiments]") {
  const std::vector<DivergenceKind> all(std::begin(nss::kBuiltinKinds),
                                         std::end(nss::kBuiltinKinds));
  const auto rows = nss::run_table1({1, 4, 10}, {0.0, 0.1}, all);
  REQUIRE(rows.size() == 4 * 2 * 3);
  for (const auto& r : rows) {
    CHECK(r.abs_deviation() <= 1e-12);
    if (r.n == 1 && r.epsilon == 0.0) CHECK(r.generic == 0.0);
    if (r.n == 10 && r.epsilon == 0.1 && r.metric == DivergenceKind::total_variation) {
      CHECK_THAT(r.generic, WithinAbs(0.95, 1e-15));
    }
    if (r.n == 4 && r.epsilon == 0.0 && r.metric == DivergenceKind::squared_hellinger) {
      CHECK_THAT(r.generic, WithinAbs(1.0, 1e-15));
    }
  }
}

TEST_CASE("breakdown runs", "[experiments]") {
  nss::ExperimentConfig cfg;
  cfg.target_mean = 3.0;
  cfg.metric = DivergenceKind::kullback_leibler;
  cfg.n_particles = 25;
  const auto rows = nss::run_breakdown(cfg);
  REQUIRE(rows.size() == 1);
  CHECK_THAT(rows[0].threshold, WithinAbs(49.63, 0.005));
  CHECK(rows[0].below_threshold());
  CHECK(rows[0].report.failure_frequency >= 0.5);

  nss::ExperimentConfig same;
  same.metric = std::nullopt;
  for (const auto& s : nss::run_breakdown(same)) CHECK(s.report.failure_frequency == 0.0);

  nss::ExperimentConfig wide;
  wide.target_variance = 16.0;
  wide.metric = DivergenceKind::chi_squared;
  CHECK_THROWS_AS(nss::run_breakdown(wide), std::invalid_argument);
  wide.metric = std::nullopt;
  wide.replicates = 10;
  CHECK(nss::run_breakdown(wide).size() == 3);

  nss::ExperimentConfig mc;
  mc.method = nss::Method::monte_carlo;
  CHECK_THROWS_AS(nss::run_breakdown(mc), std::invalid_argument);
}

TEST_CASE("ess diagnostics", "[experiments]") {
  nss::ExperimentConfig same;
  const auto d = nss::run_ess(same);
  CHECK(d.ess_kl == Catch::Approx(100.0));
  CHECK(d.ess_chi2 == Catch::Approx(100.0));

  nss::ExperimentConfig heavy;
  heavy.target_mean = 3.0;
  const auto h = nss::run_ess(heavy);
  CHECK(h.ess_chi2 <= h.ess_kl);
  CHECK(h.ess_kl <= 100.0);
  CHECK(h.ess_chi2 < 50.0);
}

TEST_CASE("csv formatting", "[experiments]") {
  CHECK(nss::format_two_decimals(5.1149) == "5.11");
  CHECK(nss::format_two_decimals(INFINITY) == "---");
  CHECK(nss::format_full(INFINITY) == "---");
  CHECK(nss::format_full(0.1) == "0.1");
}
