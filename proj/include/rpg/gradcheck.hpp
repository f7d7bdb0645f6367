#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpg {

struct GradCheckRow {
  std::string id;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool pass = false;
};

// Compares backward() adjoints against central finite differences
// across the library's surfaces. Modules: graph, nets, policy, elbo,
// envs, worldmodel, all; "selftest" emits one deliberately broken
// derivative to prove the checker can fail.
std::vector<GradCheckRow> run_gradcheck(const std::string& module, int trials,
                                        uint64_t seed);

inline constexpr double kGradCheckTolerance = 1e-4;

}  // namespace rpg
