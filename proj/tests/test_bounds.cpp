#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "nss/bounds.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using nss::ConvexGenerator;
using nss::DivergenceKind;
using nss::ToleranceBudget;

namespace {

const ToleranceBudget kBudget{0.1, 0.1};

// Table 2/3 divergences: KL, chi2, TV, squared Hellinger per row (chi2 may be inf).
struct Row {
  double kl, chi2, tv, h2;
};

std::vector<Row> table_rows() {
  std::vector<Row> rows;
  for (double m : {2.0, 2.5, 3.0, 3.5}) {
    rows.push_back({m * m / 2, std::expm1(m * m), std::erf(m / (2 * std::sqrt(2.0))),
                    -2 * std::expm1(-m * m / 8)});
  }
  // sigma2 = 1e-9, 1e-4, 16, 25 (values from scipy)
  rows.push_back({9.861632919, 1.0 / std::sqrt(1e-9 * (2 - 1e-9)) - 1, 0.9998798332, 1.984094585});
  rows.push_back({4.105220186, 69.71244584, 0.9733825638, 1.717171429});
  rows.push_back({6.113705639, INFINITY, 0.5817632113, 0.6280113189});
  rows.push_back({10.39056209, INFINITY, 0.6471153010, 0.7596526541});
  return rows;
}

double value_of(const Row& r, DivergenceKind k) {
  switch (k) {
    case DivergenceKind::kullback_leibler: return r.kl;
    case DivergenceKind::chi_squared: return r.chi2;
    case DivergenceKind::total_variation: return r.tv;
    case DivergenceKind::squared_hellinger: return r.h2;
    default: return NAN;
  }
}

}  // namespace

TEST_CASE("tolerance budget", "[bounds]") {
  CHECK_THROWS_AS(ToleranceBudget(0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(ToleranceBudget(0.1, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ToleranceBudget::relative(0.1, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(ToleranceBudget::relative(0.1, 0.5, INFINITY), std::invalid_argument);
  const auto rel = ToleranceBudget::relative(0.1, 0.05, 4.5);
  CHECK(rel.delta == 0.05 * 4.5);
}

TEST_CASE("u_f examples", "[bounds]") {
  const auto kl = ConvexGenerator::kullback_leibler();
  const auto chi2 = ConvexGenerator::chi_squared();
  CHECK_THAT(nss::u_f(4, kl), WithinAbs(std::log(4.0), 1e-15));
  CHECK_THAT(nss::u_f(4, kl), WithinAbs(1.386294, 1e-6));
  CHECK(nss::u_f(10, chi2) == 9.0);
  for (auto kind : nss::kBuiltinKinds) CHECK(nss::u_f(1, ConvexGenerator::builtin(kind)) == 0.0);

  CHECK_THAT(nss::u_f_eps(10, 0.1, kl), WithinAbs(1.1 * std::log(11.0), 1e-14));
  CHECK_THAT(nss::u_f_eps(10, 0.1, kl), WithinAbs(2.637685, 1e-6));
  CHECK_THAT(nss::u_f_eps(10, 0.1, chi2), WithinAbs(10.9, 1e-12));
  CHECK(nss::u_f_eps(17, 0.0, kl) == nss::u_f(17, kl));

  CHECK_THROWS_AS(nss::u_f(0, kl), std::invalid_argument);
  CHECK_THROWS_AS(nss::u_f_eps(3, -0.1, kl), std::invalid_argument);
  CHECK_THROWS_AS(nss::u_f_symbolic(DivergenceKind::custom, 3), std::invalid_argument);
}

TEST_CASE("generic and symbolic Table 1 forms agree", "[bounds][property]") {
  for (auto kind : nss::kBuiltinKinds) {
    const auto f = ConvexGenerator::builtin(kind);
    for (std::uint64_t n = 1; n <= 10000; ++n) {
      const double g0 = nss::u_f(n, f);
      const double s0 = nss::u_f_symbolic(kind, n);
      REQUIRE(std::abs(g0 - s0) <= 1e-12 * std::max(1.0, std::abs(s0)));
      for (double eps : {0.0, 0.1, 1.0}) {
        const double g = nss::u_f_eps(n, eps, f);
        const double s = nss::u_f_eps_symbolic(kind, n, eps);
        REQUIRE(std::abs(g - s) <= 1e-12 * std::max(1.0, std::abs(s)));
      }
    }
  }
}

TEST_CASE("u_f_eps is nondecreasing in N and epsilon", "[bounds][property]") {
  for (auto kind : nss::kBuiltinKinds) {
    const auto f = ConvexGenerator::builtin(kind);
    for (double eps : {0.0, 0.1, 1.0}) {
      double previous = nss::u_f_eps(1, eps, f);
      for (std::uint64_t n = 2; n <= 10000; ++n) {
        const double u = nss::u_f_eps(n, eps, f);
        REQUIRE(u >= previous);
        previous = u;
      }
    }
    for (std::uint64_t n : {1u, 2u, 10u, 1000u, 10000u}) {
      REQUIRE(nss::u_f_eps(n, 0.0, f) <= nss::u_f_eps(n, 0.1, f));
      REQUIRE(nss::u_f_eps(n, 0.1, f) <= nss::u_f_eps(n, 1.0, f));
    }
  }
}

TEST_CASE("MSE-based necessary sizes", "[bounds]") {
  CHECK_THAT(nss::mse_necessary_n(1.0, 53.598, DivergenceKind::chi_squared), WithinAbs(53.598, 1e-12));
  CHECK(nss::mse_necessary_n(1.0, 0.0, DivergenceKind::kullback_leibler) == 0.0);
  CHECK_THAT(nss::mse_necessary_n(0.01, 0.682689, DivergenceKind::total_variation),
             WithinAbs(4 * 0.682689 * 0.682689 / 0.01, 1e-9));
  CHECK_THAT(nss::mse_necessary_n(0.01, 0.682689, DivergenceKind::total_variation),
             WithinAbs(186.43, 0.005));
  CHECK_THAT(nss::mse_necessary_n(2.0, 1.0, DivergenceKind::kullback_leibler),
             WithinRel((std::exp(1.0) - 1) / 2, 1e-15));
  CHECK_THROWS_AS(nss::mse_necessary_n(0.0, 1.0, DivergenceKind::chi_squared), std::invalid_argument);
  CHECK_THROWS_AS(nss::mse_necessary_n(1.0, 1.5, DivergenceKind::total_variation),
                  std::invalid_argument);
}

TEST_CASE("theorem1_holds examples", "[bounds]") {
  const auto kl = ConvexGenerator::kullback_leibler();
  for (auto kind : nss::kBuiltinKinds) {
    CHECK(nss::theorem1_holds(0.0, 1, kBudget, ConvexGenerator::builtin(kind)));
  }
  CHECK_FALSE(nss::theorem1_holds(4.5, 49, kBudget, kl));
  CHECK(nss::theorem1_holds(4.5, 50, kBudget, kl));
  CHECK_FALSE(nss::theorem1_holds(INFINITY, 1000000000, kBudget, ConvexGenerator::chi_squared()));
}

TEST_CASE("necessary_n examples", "[bounds]") {
  const auto r_kl = nss::necessary_n(2.0, DivergenceKind::kullback_leibler, kBudget);
  CHECK_THAT(r_kl.threshold, WithinAbs(std::exp(1.9 / 1.1) / 1.1, 1e-12));
  CHECK_THAT(r_kl.threshold, WithinAbs(5.11, 0.005));
  CHECK(r_kl.necessary_n() == 6u);
  CHECK(r_kl.failure_probability == 0.5);
  CHECK(r_kl.guarantees_failure(5));
  CHECK_FALSE(r_kl.guarantees_failure(6));

  CHECK_THAT(nss::necessary_n(1.350703, DivergenceKind::squared_hellinger, kBudget).threshold,
             WithinAbs(6.10, 0.005));

  const auto inf = nss::necessary_n(INFINITY, DivergenceKind::chi_squared, kBudget);
  CHECK(inf.is_infinite());
  CHECK_FALSE(inf.necessary_n().has_value());

  CHECK_THAT(nss::necessary_n(9.861589, DivergenceKind::kullback_leibler, kBudget).threshold,
             WithinRel(6.494e3, 1e-3));

  // Negative chi2 threshold is reported as 0; the integer size is still >= 1.
  const auto tiny = nss::necessary_n(0.0, DivergenceKind::chi_squared, ToleranceBudget(0.1, 5.0));
  CHECK(tiny.threshold == 0.0);
  CHECK(tiny.necessary_n() == 1u);

  CHECK_THROWS_AS(nss::necessary_n(1.2, DivergenceKind::total_variation, kBudget),
                  std::invalid_argument);
  CHECK_THROWS_AS(nss::necessary_n(2.5, DivergenceKind::squared_hellinger, kBudget),
                  std::invalid_argument);
  CHECK_THROWS_AS(nss::necessary_n(-0.1, DivergenceKind::kullback_leibler, kBudget),
                  std::invalid_argument);
  CHECK_THROWS_AS(nss::necessary_n(1.0, DivergenceKind::custom, kBudget), std::invalid_argument);
}

TEST_CASE("threshold is finite and positive exactly when the divergence is finite", "[bounds]") {
  for (const auto& row : table_rows()) {
    for (auto kind : nss::kBuiltinKinds) {
      const double d = value_of(row, kind);
      const auto r = nss::necessary_n(d, kind, kBudget);
      CHECK(r.is_infinite() == std::isinf(d));
      if (!std::isinf(d)) CHECK(r.threshold > 0.0);
    }
  }
}

TEST_CASE("generic_necessary_n examples", "[bounds]") {
  for (auto kind : nss::kBuiltinKinds) {
    CHECK(nss::generic_necessary_n(0.0, ConvexGenerator::builtin(kind), kBudget) == 1u);
  }
  CHECK(nss::generic_necessary_n(2.0, ConvexGenerator::kullback_leibler(), kBudget) == 6u);
  CHECK(nss::generic_necessary_n(0.99, ConvexGenerator::total_variation(),
                                 ToleranceBudget(0.01, 0.01)) == 40u);
  CHECK_FALSE(nss::generic_necessary_n(INFINITY, ConvexGenerator::chi_squared(), kBudget));

  // Bounded custom generator: U_f never reaches d.
  const auto tv_copy = ConvexGenerator::custom(
      "tv_copy", [](double x) { return std::abs(x - 1.0) / 2.0; }, 0.5);
  CHECK_FALSE(nss::generic_necessary_n(1.5, tv_copy, ToleranceBudget(0.01, 0.01)));
  CHECK(nss::generic_necessary_n(0.99, tv_copy, ToleranceBudget(0.01, 0.01)) == 40u);
}

TEST_CASE("theorem1_holds fails exactly below the threshold", "[bounds][property]") {
  for (auto kind : nss::kBuiltinKinds) {
    const auto f = ConvexGenerator::builtin(kind);
    const double top = kind == DivergenceKind::total_variation    ? 1.0
                       : kind == DivergenceKind::squared_hellinger ? 2.0
                                                                   : 12.0;
    for (int i = 0; i <= 60; ++i) {
      const double d = top * i / 60.0;
      const double threshold = nss::necessary_n(d, kind, kBudget).threshold;
      for (std::uint64_t n = 1; n <= 2000; n = n < 20 ? n + 1 : n * 11 / 10) {
        const double nd = static_cast<double>(n);
        // Skip the rounding band at the boundary.
        if (std::abs(nd - threshold) <= 1e-9 * std::max(1.0, threshold)) continue;
        INFO(nss::to_string(kind) << " d=" << d << " N=" << n << " threshold=" << threshold);
        REQUIRE(nss::theorem1_holds(d, n, kBudget, f) == !(nd < threshold));
      }
    }
  }
}

TEST_CASE("generic search agrees with the closed-form thresholds", "[bounds][property]") {
  for (const auto& row : table_rows()) {
    for (auto kind : nss::kBuiltinKinds) {
      const double d = value_of(row, kind);
      const auto closed = nss::necessary_n(d, kind, kBudget).necessary_n();
      const auto generic = nss::generic_necessary_n(d, ConvexGenerator::builtin(kind), kBudget);
      INFO(nss::to_string(kind) << " d=" << d);
      CHECK(closed == generic);
    }
  }
}

TEST_CASE("relative delta is the absolute call with delta = delta* d", "[bounds][property]") {
  for (const auto& row : table_rows()) {
    for (auto kind : nss::kBuiltinKinds) {
      const double d = value_of(row, kind);
      if (std::isinf(d) || d == 0.0) continue;
      for (double star : {0.01, 0.1, 0.5}) {
        const auto rel = ToleranceBudget::relative(0.1, star, d);
        const auto a = nss::necessary_n(d, kind, rel);
        const auto b = nss::necessary_n(d, kind, ToleranceBudget(0.1, star * d));
        CHECK(a.threshold == b.threshold);
      }
    }
  }
}

TEST_CASE("max_informative_n", "[bounds]") {
  CHECK_THAT(nss::max_informative_n(DivergenceKind::total_variation, kBudget),
             WithinAbs(1.0 / 0.15, 1e-12));
  CHECK_THAT(nss::max_informative_n(DivergenceKind::squared_hellinger, kBudget),
             WithinAbs(110.0, 1e-9));
  CHECK(std::isinf(nss::max_informative_n(DivergenceKind::kullback_leibler, kBudget)));
  CHECK(std::isinf(nss::max_informative_n(DivergenceKind::chi_squared, kBudget)));
  // Equal to the threshold at the top of each bounded range.
  CHECK_THAT(nss::necessary_n(1.0, DivergenceKind::total_variation, kBudget).threshold,
             WithinRel(nss::max_informative_n(DivergenceKind::total_variation, kBudget), 1e-14));
  CHECK_THAT(nss::necessary_n(2.0, DivergenceKind::squared_hellinger, kBudget).threshold,
             WithinRel(nss::max_informative_n(DivergenceKind::squared_hellinger, kBudget), 1e-14));
}
