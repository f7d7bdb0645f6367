#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpg/elbo.hpp"
#include "rpg/envs.hpp"
#include "rpg/estimators.hpp"
#include "rpg/policy.hpp"
#include "rpg/world_model.hpp"

namespace rpg {

// Raised when training produces a non-finite quantity.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  std::string env_id = "bandit_b";
  EstimatorKind estimator = EstimatorKind::hybrid;
  bool model_based = false;
  uint64_t seed = 0;
  long total_env_steps = 100000;
  long eval_every_steps = 5000;  // logging cadence in env steps
  int eval_episodes = 32;
  int horizon_override = 0;  // 0 keeps the env default

  // Latent head.
  LatentKind latent_kind = LatentKind::categorical;
  int latent_categories = 4;
  int latent_dim = 12;
  bool latent_learned = true;
  int resample_period = 0;

  // Objective weights.
  double temperature = 1.0;
  double beta = 0.005;
  double gamma = 0.99;
  double alpha_init = 0.01;
  bool alpha_auto = true;
  double alpha_lr = 3e-4;
  double entropy_target = 0.0;  // 0 means -|A| default
  // Exploration-phase entropy target; annealed linearly to
  // entropy_target over the last 70% of training when set.
  bool entropy_target_anneal = false;
  double entropy_target_explore = 0.3;
  double alpha_z_init = 0.05;
  bool alpha_z_decay = true;  // linear decay over the last 70% of training

  // Policy nets and optimization.
  std::vector<size_t> policy_hidden = {32};
  double init_log_sigma = -1.2;
  bool train_sigma = true;
  int batch = 64;
  double lr = 3e-3;
  double adam_beta1 = 0.9;
  double grad_clip = 1.0;
  bool score_baseline = true;

  // World model (model-based runs).
  int state_dim = 100;
  std::vector<size_t> model_hidden = {64};
  bool gru_dynamics = true;
  int model_batch = 512;
  int k_horizon = 3;
  double model_lr = 3e-4;
  int update_every = 5;       // env steps per gradient update
  int actor_update_freq = 2;  // model updates per actor update
  long seed_steps = 1000;
  size_t buffer_capacity = 800000;
  double polyak = 0.005;

  // Intrinsic exploration bonus.
  bool rnd_enabled = false;
  double rnd_coef = 0.1;
  int rnd_levels = 6;
  int rnd_out_dim = 32;
  std::vector<size_t> rnd_hidden = {64, 64};
  double rnd_lr = 3e-4;
};

struct RunRow {
  long step = 0;
  long env_steps = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double coverage = 0.0;
  double reward_term = 0.0;
  double prior_term = 0.0;
  double cross_entropy_term = 0.0;
  double entropy_term = 0.0;
  double grad_norm = 0.0;
};

struct RunRecord {
  std::vector<RunRow> rows;
};

struct EvalMode {
  int z_index = -1;
  std::vector<double> z_value;
  double greedy_return = 0.0;
  std::vector<double> terminal_action;
  std::vector<double> terminal_state;
};

struct EvalResult {
  double mean = 0.0;    // sampled protocol
  double stddev = 0.0;
  double greedy_return = 0.0;  // most-likely latent, mean actions
  std::vector<EvalMode> modes;
};

// Acts on raw observations, optionally through a world-model encoder.
struct Actor {
  const PolicyParams* policy = nullptr;
  const WorldModelParams* world_model = nullptr;

  std::vector<double> embed(std::span<const double> obs) const;
};

EvalResult evaluate(const Env& env, const Actor& actor, int episodes, Rng& rng);

// Max pairwise distance between per-mode terminal actions, the
// mode-collapse metric (threshold 0.1 of the action range).
double mode_separation(const EvalResult& eval);

struct TrainOutputs {
  RunRecord record;
  PolicyParams policy;
  std::optional<EncoderParams> encoder;
  std::optional<WorldModelParams> world_model;
  EvalResult final_eval;
};

TrainOutputs train_direct(const TrainConfig& cfg);
TrainOutputs train_model_based(const TrainConfig& cfg);
TrainOutputs train(const TrainConfig& cfg);

// Desk-scale maze exploration setup shared by the coverage command and
// the acceptance suite; `multimodal` keeps the latent policy, the
// baseline drops it.
TrainConfig default_maze_config(bool multimodal);

}  // namespace rpg
