#include "rpg/elbo.hpp"

#include <cmath>

namespace rpg {

double uniform_action_log_prior(std::span<const std::array<double, 2>> bounds) {
  double logp = 0.0;
  for (const auto& b : bounds) {
    const double width = b[1] - b[0];
    if (width > 100.0) continue;  // improper uniform prior on synthetic envs
    logp -= std::log(width);
  }
  return logp;
}

ElboTerms elbo_terms(const Trajectory& traj, const ElboConfig& cfg) {
  if (traj.graph == nullptr || traj.rewards.empty()) {
    throw std::invalid_argument("elbo_terms needs a completed trajectory");
  }
  if (cfg.temperature <= 0.0) {
    throw std::invalid_argument("temperature must be positive");
  }
  Graph& g = *traj.graph;

  ElboTerms t;
  t.temperature = cfg.temperature;
  t.alpha = cfg.alpha;
  t.alpha_z = cfg.z_weight();
  t.beta = cfg.beta;

  t.reward_term = sum(traj.rewards) * (1.0 / cfg.temperature);

  // Deterministic dynamics cancel; under the uniform action prior the
  // remaining log p(tau) is a constant recorded at rollout time.
  t.prior_term = g.constant(traj.log_prior_constant);

  if (cfg.encoder != nullptr && cfg.encoder->kind != LatentKind::none &&
      !traj.latents.empty()) {
    t.encoder_binding = cfg.encoder->net.bind(g);
    t.has_encoder = true;
    std::vector<Value> ce;
    for (size_t step = 0; step < traj.actions.size(); ++step) {
      const LatentVariable* z = traj.latent_at(static_cast<int>(step));
      ce.push_back(encoder_log_density(g, *z, traj.states[step],
                                       traj.actions[step], *cfg.encoder,
                                       t.encoder_binding));
    }
    t.cross_entropy_term = sum(ce);
  } else {
    t.cross_entropy_term = g.constant(0.0);
  }

  std::vector<Value> z_terms;
  for (const auto& [step, z] : traj.latents) z_terms.push_back(z.log_density);
  t.entropy_latent_part =
      z_terms.empty() ? g.constant(0.0) : -sum(z_terms);
  t.entropy_action_part = -sum(traj.action_log_densities);
  t.entropy_term = t.entropy_latent_part + t.entropy_action_part;

  t.total = t.reward_term + t.prior_term + cfg.beta * t.cross_entropy_term +
            cfg.alpha * t.entropy_action_part +
            t.alpha_z * t.entropy_latent_part;
  return t;
}

Value augmented_step_reward(Value r_t, Value log_pi_a, Value log_enc,
                            double alpha, double beta, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("temperature must be positive");
  }
  return r_t * (1.0 / temperature) - alpha * log_pi_a + beta * log_enc;
}

double augmented_step_reward(double r_t, double log_pi_a, double log_enc,
                             double alpha, double beta, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("temperature must be positive");
  }
  return r_t / temperature - alpha * log_pi_a + beta * log_enc;
}

}  // namespace rpg
