#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/theory.hpp"

namespace sclab {

// Parameters of the full theory verification run. Defaults match the
// gaussian d=3 desk-scale setup.
struct TheorySuiteConfig {
  int d = 3;                       // raw feature dimension (ambient d+1)
  double sigma = 1.0;
  double lambda = 1.0;
  double eta_scale = 0.25;         // eta = eta_scale * step_size_bound
  std::uint64_t samples = 1000000;
  std::uint64_t identity_instances = 10000;
  std::uint64_t seed = 20240901;
  std::vector<double> psi_grid = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> upsilon_grid = {0.5, 1.0, 1.5, 2.0};
  std::vector<double> lambda_grid = {0.5, 1.0, 2.0};
  double uniform_u_half_width = 8.0;
  double wide_gaussian_sigma = 10.0;
  double informational_eta_multiple = 3.0;
};

struct TheoryClaim {
  std::string name;
  bool pass = false;
  bool informational = false;   // expected-violation probes, not failures
  std::string detail;
};

struct TheorySuiteResult {
  std::vector<TheoryClaim> claims;
  std::vector<EstimatorRow> rows;

  bool all_passed() const {
    for (const auto& c : claims)
      if (!c.informational && !c.pass) return false;
    return true;
  }
};

TheorySuiteResult run_theory_suite(const TheorySuiteConfig& config);

std::string theory_rows_csv(const std::vector<EstimatorRow>& rows);
std::string theory_claims_csv(const std::vector<TheoryClaim>& claims);

}  // namespace sclab
