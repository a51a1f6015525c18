// Necessary sample sizes for a shifted Gaussian target, then a breakdown run
// just below the KL threshold.

#include <cstdio>

#include "nss/nss.hpp"

int main() {
  const nss::Gaussian1D target(3.0, 1.0);
  const nss::Gaussian1D proposal(0.0, 1.0);
  const nss::ToleranceBudget budget(0.1, 0.1);

  const nss::DivergenceValue kl = nss::kl_gaussian(target, proposal);
  const nss::DivergenceValue chi2 = nss::chi2_gaussian(target, proposal);
  std::printf("D_KL  = %.6f  necessary N > %.2f\n", kl.value,
              nss::necessary_n(kl, nss::DivergenceKind::kullback_leibler, budget).threshold);
  std::printf("D_chi2 = %.3f  necessary N > %.2f\n", chi2.value,
              nss::necessary_n(chi2, nss::DivergenceKind::chi_squared, budget).threshold);

  const auto model = nss::make_gaussian_model(target, proposal);
  const auto report = nss::breakdown_probability(
      model, nss::ConvexGenerator::kullback_leibler(), kl.value, 25, budget, 1000,
      nss::kDefaultSeed);
  std::printf("N = 25: failure frequency %.3f over %llu replicates\n",
              report.failure_frequency,
              static_cast<unsigned long long>(report.replicates));
}
