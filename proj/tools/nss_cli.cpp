// nss: necessary sample size tables, bound checks and breakdown experiments
// for importance sampling with Gaussian target and proposal.
//
// Exit codes: 0 success, 1 numerical failure, 2 configuration error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nss/nss.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;

json finite_or_null(double x) { return std::isinf(x) ? json(nullptr) : json(x); }

json config_json(const nss::ExperimentConfig& c, const std::string& command,
                 const std::string& metric) {
  return {{"command", command},
          {"target_mean", c.target_mean},
          {"target_variance", c.target_variance},
          {"proposal_mean", c.proposal_mean},
          {"proposal_variance", c.proposal_variance},
          {"epsilon", c.epsilon},
          {"delta", c.delta},
          {"metric", metric},
          {"method", std::string(nss::to_string(c.method))},
          {"mc_samples", c.mc_samples},
          {"n_particles", c.n_particles},
          {"replicates", c.replicates},
          {"seed", c.seed}};
}

json table_json(const std::vector<nss::TableRow>& rows, const nss::ExperimentConfig& cfg) {
  json out = json::array();
  for (const auto& row : rows) {
    const auto& r = row.report;
    const auto n = r.necessary_n();
    json stderr_value = r.divergence.std_error ? json(*r.divergence.std_error) : json(nullptr);
    out.push_back({{"row_label", row.row_label},
                   {"metric", std::string(nss::to_string(row.metric))},
                   {"divergence", finite_or_null(r.divergence.value)},
                   {"divergence_method", std::string(nss::to_string(r.divergence.method))},
                   {"divergence_stderr", stderr_value},
                   {"threshold", std::isinf(r.threshold)
                                     ? json(nullptr)
                                     : json(std::round(r.threshold * 100.0) / 100.0)},
                   {"necessary_n_integer", n ? json(*n) : json(nullptr)},
                   {"epsilon", cfg.epsilon},
                   {"delta", cfg.delta},
                   {"seed", cfg.seed},
                   {"threshold_full", finite_or_null(r.threshold)}});
  }
  return out;
}

json table1_json(const std::vector<nss::Table1Row>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"N", r.n},
                   {"epsilon", r.epsilon},
                   {"metric", std::string(nss::to_string(r.metric))},
                   {"u_generic", r.generic},
                   {"u_symbolic", r.symbolic},
                   {"abs_deviation", r.abs_deviation()}});
  }
  return out;
}

json breakdown_json(const std::vector<nss::BreakdownSummary>& rows) {
  json out = json::array();
  for (const auto& s : rows) {
    const auto& r = s.report;
    out.push_back({{"metric", std::string(nss::to_string(s.metric))},
                   {"divergence", finite_or_null(s.divergence.value)},
                   {"threshold", finite_or_null(s.threshold)},
                   {"n_particles", r.n_particles},
                   {"below_threshold", s.below_threshold()},
                   {"replicates", r.replicates},
                   {"failure_count", r.failure_count},
                   {"failure_frequency", r.failure_frequency},
                   {"condition_i_violations", r.condition_i_violations},
                   {"condition_ii_violations", r.condition_ii_violations},
                   {"overflow_count", r.overflow_count}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Necessary sample size for importance sampling"};
  app.require_subcommand(1);
  app.fallthrough();

  nss::ExperimentConfig cfg;
  std::string metric = "all";
  std::string method = "closed";
  std::string format = "csv";
  std::string out_path;

  app.add_option("--target-mean", cfg.target_mean, "Target mean")->capture_default_str();
  app.add_option("--target-var", cfg.target_variance, "Target variance")
      ->capture_default_str();
  app.add_option("--proposal-mean", cfg.proposal_mean, "Proposal mean")
      ->capture_default_str();
  app.add_option("--proposal-var", cfg.proposal_variance, "Proposal variance")
      ->capture_default_str();
  app.add_option("--eps", cfg.epsilon, "Mass tolerance epsilon")->capture_default_str();
  app.add_option("--delta", cfg.delta, "Estimation tolerance delta")->capture_default_str();
  app.add_option("--metric", metric, "Divergence")
      ->check(CLI::IsMember({"kl", "chi2", "tv", "hellinger", "all"}))
      ->capture_default_str();
  app.add_option("--method", method, "Divergence computation")
      ->check(CLI::IsMember({"closed", "quadrature", "mc"}))
      ->capture_default_str();
  app.add_option("--mc-samples", cfg.mc_samples, "Monte Carlo samples")
      ->capture_default_str();
  app.add_option("--particles", cfg.n_particles, "Importance sampling particles N")
      ->capture_default_str();
  app.add_option("--replicates", cfg.replicates, "Breakdown replicates")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master seed")->envname("NSS_SEED")->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
  app.add_option("--n-list", cfg.n_list, "Sample sizes for table1")->delimiter(',');
  app.add_option("--eps-list", cfg.epsilon_list, "Epsilons for table1")->delimiter(',');
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--out", out_path, "Output file (default stdout)");

  struct Sub {
    const char* name;
    nss::Command command;
    const char* help;
  };
  const Sub subs[] = {
      {"table1", nss::Command::table1, "Generic vs symbolic U_f(N, eps)"},
      {"table2", nss::Command::table2, "Necessary sizes, P = N(m, 1), Q = N(0, 1)"},
      {"table3", nss::Command::table3, "Necessary sizes, P = N(0, s2), Q = N(0, 1)"},
      {"bounds", nss::Command::bounds, "Divergences and necessary sizes for one pair"},
      {"breakdown", nss::Command::breakdown, "Replicated importance sampling failures"},
      {"ess", nss::Command::ess, "Effective sample size of one particle set"}};
  std::string command_name;
  for (const auto& s : subs) {
    app.add_subcommand(s.name, s.help)->callback([&cfg, &command_name, s] {
      cfg.command = s.command;
      command_name = s.name;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::string body;
  try {
    cfg.metric = nss::parse_metric(metric);
    cfg.method = nss::parse_method(method);
    cfg.validate();
    const json config = config_json(cfg, command_name, metric);
    const bool as_json = format == "json";

    switch (cfg.command) {
      case nss::Command::table1: {
        const auto rows = nss::run_table1(cfg.n_list, cfg.epsilon_list, cfg.metrics());
        body = as_json ? json{{"config", config}, {"rows", table1_json(rows)}}.dump(2) + "\n"
                       : nss::table1_csv(rows);
        break;
      }
      case nss::Command::table2:
      case nss::Command::table3:
      case nss::Command::bounds: {
        const auto rows = cfg.command == nss::Command::table2   ? nss::run_table2(cfg)
                          : cfg.command == nss::Command::table3 ? nss::run_table3(cfg)
                                                                : nss::run_bounds(cfg);
        body = as_json ? json{{"config", config}, {"rows", table_json(rows, cfg)}}.dump(2) + "\n"
                       : nss::table_csv(rows, cfg);
        break;
      }
      case nss::Command::breakdown: {
        const auto rows = nss::run_breakdown(cfg);
        body = as_json
                   ? json{{"config", config}, {"rows", breakdown_json(rows)}}.dump(2) + "\n"
                   : nss::breakdown_csv(rows, cfg);
        break;
      }
      case nss::Command::ess: {
        const auto d = nss::run_ess(cfg);
        body = as_json ? json{{"config", config},
                              {"rows", json::array({{{"n_particles", d.n},
                                                     {"total_mass", d.total_mass},
                                                     {"ess_kl", d.ess_kl},
                                                     {"ess_chi2", d.ess_chi2}}})}}
                                 .dump(2) +
                             "\n"
                       : nss::ess_csv(d, cfg);
        break;
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nss::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }

  if (out_path.empty()) {
    std::cout << body;
  } else {
    std::ofstream file(out_path, std::ios::binary);
    if (!file || !(file << body)) {
      std::cerr << "configuration error: cannot write " << out_path << '\n';
      return kExitConfig;
    }
  }
  return kExitOk;
}
