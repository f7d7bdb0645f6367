#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "rpg/envs.hpp"
#include "rpg/graph.hpp"
#include "rpg/nets.hpp"
#include "rpg/rng.hpp"

namespace rpg {

enum class LatentKind { none, categorical, gaussian };

// Which gradient paths a recorded rollout keeps alive:
//   score    — samples are constants, log-densities reach head params only
//   pathwise — fully reparameterized, including the latent draw
//   hybrid   — actions reparameterized, latent draw held fixed (its
//              distribution change is carried by the score term)
enum class GradMode { score, pathwise, hybrid };

struct LatentSpec {
  LatentKind kind = LatentKind::none;
  int categories = 0;   // categorical
  int dim = 0;          // gaussian
  bool learned_head = true;  // false: z ~ N(0, I) fixed prior

  int embed_dim() const {
    return kind == LatentKind::categorical ? categories
           : kind == LatentKind::gaussian  ? dim
                                           : 0;
  }
};

struct LatentVariable {
  LatentKind kind = LatentKind::none;
  int index = -1;                    // categorical draw
  std::vector<double> noise;         // gaussian base sample
  std::vector<Value> draw;           // values fed downstream
  std::vector<double> draw_num;      // numeric copy of the draw
  Value log_density;                 // form follows the rollout mode
  Value log_density_score;           // draw held constant; score term input
};

struct PolicyParams {
  LatentSpec latent;
  DenseNet latent_head;  // s1 -> logits | (mu, log_sigma_raw)
  DenseNet action_head;  // (s, z) -> (mu, log_sigma_raw)
  int resample_period = 0;  // K; 0 = single z per episode
  bool squash = true;
  bool train_sigma = true;
  double init_log_sigma = -1.2;
  std::vector<std::array<double, 2>> action_bounds;

  size_t param_count() const;
  void copy_params_to(std::span<double> out) const;
  void set_params(std::span<const double> in);
};

PolicyParams make_policy(const EnvSpec& env, const LatentSpec& latent,
                         std::span<const size_t> hidden, Rng& rng);

struct EncoderParams {
  LatentKind kind = LatentKind::none;
  int categories = 0;
  int dim = 0;
  DenseNet net;  // (s, a) -> logits | mean
  double fixed_std = 0.38;
};

EncoderParams make_encoder(const EnvSpec& env, const LatentSpec& latent,
                           std::span<const size_t> hidden, Rng& rng);

struct PolicyBindings {
  DenseNet::Binding latent;
  DenseNet::Binding action;
  bool has_latent_head = false;
};

struct Trajectory {
  Graph* graph = nullptr;
  GradMode mode = GradMode::score;
  std::vector<std::vector<Value>> states;   // length horizon + 1
  std::vector<std::vector<Value>> actions;  // length horizon
  std::vector<Value> rewards;               // length horizon
  std::vector<Value> action_log_densities;  // length horizon
  std::vector<std::pair<int, LatentVariable>> latents;  // (timestep, draw)
  PolicyBindings bindings;
  double total_reward = 0.0;
  double log_prior_constant = 0.0;  // log p(tau) under the uniform prior

  Value joint_log_density() const;  // log pi(z, tau) minus dynamics terms
  const LatentVariable* latent_at(int t) const;
};

struct ActionSample {
  std::vector<Value> action;
  Value log_density;
};

LatentVariable sample_latent(Graph& g, std::span<const Value> s1,
                             const PolicyParams& params,
                             const PolicyBindings& bindings, Rng& rng,
                             GradMode mode);

ActionSample sample_action(Graph& g, std::span<const Value> state,
                           const LatentVariable* z, const PolicyParams& params,
                           const PolicyBindings& bindings, Rng& rng,
                           GradMode mode);

PolicyBindings bind_policy(Graph& g, const PolicyParams& params);

Trajectory rollout(Graph& g, const Env& env, const PolicyParams& params,
                   Rng& rng, GradMode mode);

Value encoder_log_density(Graph& g, const LatentVariable& z,
                          std::span<const Value> state,
                          std::span<const Value> action,
                          const EncoderParams& enc,
                          const DenseNet::Binding& binding);

// Squash stabilizer inside log(1 - a^2 + delta).
inline constexpr double kSquashDelta = 1e-6;

// Plain-double policy evaluation for environment interaction and
// evaluation rollouts.
struct LatentDraw {
  LatentKind kind = LatentKind::none;
  int index = -1;
  std::vector<double> value;  // embedding fed to the action head
};

LatentDraw sample_latent_d(std::span<const double> s1,
                           const PolicyParams& params, Rng& rng, bool greedy);
std::vector<double> sample_action_d(std::span<const double> state,
                                    const LatentDraw& z,
                                    const PolicyParams& params, Rng& rng,
                                    bool greedy,
                                    double* log_density = nullptr);

}  // namespace rpg
