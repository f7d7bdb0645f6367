#pragma once

#include <span>

#include "rpg/graph.hpp"
#include "rpg/policy.hpp"

namespace rpg {

struct ElboConfig {
  double temperature = 1.0;
  double alpha = 0.0;    // action-entropy weight
  double alpha_z = -1.0; // latent-entropy weight; negative means "use alpha"
  double beta = 0.0;     // cross-entropy (consistency) weight
  const EncoderParams* encoder = nullptr;

  double z_weight() const { return alpha_z < 0.0 ? alpha : alpha_z; }
};

// The four pieces of the variational bound for one trajectory, kept as
// graph nodes so each is differentiable. `total` combines them with
// the configured weights:
//   reward + prior + beta * cross_entropy
//          + alpha * action_entropy + alpha_z * latent_entropy
struct ElboTerms {
  Value reward_term;         // R(tau) / temperature
  Value prior_term;          // log p(tau) under the uniform action prior
  Value cross_entropy_term;  // sum_t log p_phi(z | s_t, a_t)
  Value entropy_term;        // -log pi(z, tau)
  Value entropy_action_part; // -sum_t log pi(a_t | s_t, z)
  Value entropy_latent_part; // -sum log pi(z | s_1)
  Value total;
  double temperature = 1.0;
  double alpha = 0.0;
  double alpha_z = 0.0;
  double beta = 0.0;
  DenseNet::Binding encoder_binding;
  bool has_encoder = false;
};

ElboTerms elbo_terms(const Trajectory& traj, const ElboConfig& cfg);

// Per-step augmented reward r_t/T - alpha log pi(a|s,z) + beta log p_phi(z|s,a).
Value augmented_step_reward(Value r_t, Value log_pi_a, Value log_enc,
                            double alpha, double beta, double temperature);
double augmented_step_reward(double r_t, double log_pi_a, double log_enc,
                             double alpha, double beta, double temperature);

// log p(a) per step under the uniform prior over the action box;
// wide synthetic bounds are treated as an improper prior contributing 0.
double uniform_action_log_prior(std::span<const std::array<double, 2>> bounds);

}  // namespace rpg
