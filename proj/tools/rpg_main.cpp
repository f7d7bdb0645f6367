// Command-line front end over the librpg C API.
//
// Subcommands: train, gradcheck, bias-demo, coverage. Exit codes
// follow the library contract: 0 success, 1 config error, 2 runtime
// failure.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "rpg.h"

namespace {

int status_to_exit(rpg_status s) {
  if (s == RPG_OK) return 0;
  std::fprintf(stderr, "error: %s\n", rpg_last_error());
  return s == RPG_ERR_CONFIG ? 1 : 2;
}

int cmd_train(const std::string& config_path, long seed, bool seed_set,
              const std::string& out_dir) {
  rpg_config* cfg = nullptr;
  rpg_status s = rpg_config_load(config_path.c_str(), &cfg);
  if (s != RPG_OK) return status_to_exit(s);
  s = rpg_config_apply_env(cfg);
  if (s == RPG_OK && seed_set) {
    s = rpg_config_set(cfg, "run", "seed", std::to_string(seed).c_str());
  }
  rpg_run* run = nullptr;
  if (s == RPG_OK) s = rpg_train(cfg, out_dir.c_str(), &run);
  if (s == RPG_OK) {
    std::printf("rows=%ld final_return=%.6f final_coverage=%.0f\n",
                rpg_run_row_count(run), rpg_run_final_return(run),
                rpg_run_final_coverage(run));
  }
  rpg_run_free(run);
  rpg_config_free(cfg);
  return status_to_exit(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reparameterized policy gradient toolkit"};
  app.require_subcommand(1);

  // train
  std::string config_path;
  long seed = 0;
  std::string out_dir = ".";
  CLI::App* train = app.add_subcommand("train", "run a training config");
  train->add_option("config", config_path, "config file path")->required();
  CLI::Option* seed_opt =
      train->add_option("--seed", seed, "override [run] seed");
  train->add_option("--out", out_dir, "output directory for run.csv");

  // gradcheck
  std::string module = "all";
  int trials = 2;
  long gc_seed = 0;
  std::string gc_out = "gradcheck.csv";
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--module", module,
                        "graph|nets|policy|elbo|envs|worldmodel|selftest|all");
  gradcheck->add_option("--trials", trials, "case multiplier (>= 1)");
  gradcheck->add_option("--seed", gc_seed, "rng seed");
  gradcheck->add_option("--out", gc_out, "report CSV path");

  // bias-demo
  std::string env_id = "bandit_a";
  long samples = 100000;
  long bd_seed = 0;
  std::string bd_out = "bias.csv";
  CLI::App* bias = app.add_subcommand(
      "bias-demo", "estimator mean vs quadrature oracle on a 1-D landscape");
  bias->add_option("--env", env_id, "bandit_a|bandit_b|step_bandit|...");
  bias->add_option("--samples", samples, "Monte-Carlo sample count");
  bias->add_option("--seed", bd_seed, "rng seed");
  bias->add_option("--out", bd_out, "report CSV path");

  // coverage
  std::string policy = "rpg";
  long steps = 40000;
  long cov_seed = 0;
  std::string cov_out = "coverage.csv";
  CLI::App* coverage =
      app.add_subcommand("coverage", "maze room coverage over training");
  coverage->add_option("--policy", policy, "rpg|baseline");
  coverage->add_option("--steps", steps, "environment step budget");
  coverage->add_option("--seed", cov_seed, "rng seed");
  coverage->add_option("--out", cov_out, "coverage CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (train->parsed()) {
    return cmd_train(config_path, seed, seed_opt->count() > 0, out_dir);
  }
  if (gradcheck->parsed()) {
    int failures = -1;
    const rpg_status s = rpg_gradcheck(module.c_str(), trials,
                                       static_cast<unsigned long>(gc_seed),
                                       gc_out.c_str(), &failures);
    if (s == RPG_OK) {
      std::printf("gradcheck module=%s failures=%d -> %s\n", module.c_str(),
                  failures, gc_out.c_str());
      if (failures != 0 && module != "selftest") return 2;
    }
    return status_to_exit(s);
  }
  if (bias->parsed()) {
    const rpg_status s =
        rpg_bias_demo(env_id.c_str(), samples,
                      static_cast<unsigned long>(bd_seed), bd_out.c_str());
    if (s == RPG_OK) {
      std::printf("bias report for %s (n=%ld) -> %s\n", env_id.c_str(), samples,
                  bd_out.c_str());
    }
    return status_to_exit(s);
  }
  if (coverage->parsed()) {
    int rooms = 0;
    const rpg_status s =
        rpg_coverage(policy.c_str(), steps, static_cast<unsigned long>(cov_seed),
                     cov_out.c_str(), &rooms);
    if (s == RPG_OK) {
      std::printf("coverage policy=%s steps=%ld rooms=%d -> %s\n",
                  policy.c_str(), steps, rooms, cov_out.c_str());
    }
    return status_to_exit(s);
  }
  return 1;
}
