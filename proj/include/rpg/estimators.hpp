#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rpg/elbo.hpp"
#include "rpg/envs.hpp"
#include "rpg/policy.hpp"

namespace rpg {

enum class EstimatorKind { score, pathwise, hybrid };

EstimatorKind estimator_from_string(const std::string& s);
const char* to_string(EstimatorKind k);

struct GradEstimate {
  std::vector<double> gradient;            // mean over the batch, ELBO ascent direction
  long sample_count = 0;
  std::vector<double> per_sample_variance; // population variance per coordinate
  EstimatorKind kind = EstimatorKind::score;
};

// Pooled mean/variance of two estimates over disjoint sample sets.
GradEstimate combine(const GradEstimate& a, const GradEstimate& b);

// The three estimators of grad_theta E[R_elbo] over policy-head
// parameters. Each trajectory must have been rolled out in the
// matching GradMode; backward passes consume the per-sample graphs.
GradEstimate score_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                        const PolicyParams& params, bool baseline = true);
GradEstimate pathwise_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                           const PolicyParams& params, const Env& env);
GradEstimate hybrid_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                         const PolicyParams& params, const Env& env,
                         bool baseline = true);

// 1-D pre-squash Gaussian mixture policy for gradient ground-truth
// work on one-step landscapes. Component k is chosen with probability
// softmax(logits)_k, then a = squash(mu_k + exp(log_sigma_k) eps).
struct BanditPolicySpec {
  std::vector<double> logits;     // size 1 collapses to a single Gaussian
  std::vector<double> mu;
  std::vector<double> log_sigma;
  bool squash = false;
  std::array<double, 2> bounds = {-1.0, 1.0};

  size_t components() const { return mu.size(); }
  // Gradient coordinate order: logits (if >1 component), mu..., log_sigma...
  size_t param_count() const;
  std::vector<std::string> param_names() const;
};

// Builds the equivalent network policy so the trajectory estimators
// apply unchanged: logits live in the latent head bias, component
// means/scales in action-head weight slots.
PolicyParams to_policy_params(const BanditPolicySpec& spec, const EnvSpec& env);
// '' and the map from oracle coordinates into the policy parameter layout.
std::vector<size_t> oracle_param_indices(const BanditPolicySpec& spec,
                                         const PolicyParams& params);

struct OracleResult {
  std::vector<double> true_gradient;   // includes boundary contributions
  std::vector<double> boundary_term;   // jump contributions alone
  std::vector<double> expected_reward_per_component;
  double expected_reward = 0.0;
  long quadrature_resolution = 0;
  bool converged = false;
};

// grad_theta of E[R] by adaptive trapezoid quadrature of the
// differentiated integrand plus explicit boundary terms at the
// environment's declared reward jumps. One-step, one-dimensional
// action landscapes only.
OracleResult oracle_grad(const Env& env, const BanditPolicySpec& policy,
                         long max_resolution = 1 << 22,
                         double abs_tol = 1e-9);

struct BiasRow {
  std::string param;
  std::string estimator;
  double mean = 0.0;
  double std_error = 0.0;
  double oracle = 0.0;
  double boundary = 0.0;
  double z_score = 0.0;
  long samples = 0;
};

struct BiasReport {
  std::vector<BiasRow> rows;
};

BiasReport bias_report(const Env& env, const BanditPolicySpec& policy, long n,
                       uint64_t seed, const ElboConfig& cfg = {});

struct RegularityReport {
  double reward_bound = 0.0;  // max |R| over the grid
  std::map<double, double> lipschitz_by_scale;
  std::vector<double> jump_candidates;  // grid coordinates (1-D probes)
};

RegularityReport check_regularity(const std::function<double(double)>& f,
                                  double lo, double hi, long grid_points);
// Bandits probe reward vs action; move variants probe the terminal
// landscape along state axes. Other envs are rejected.
RegularityReport check_regularity(const Env& env, long grid_points);

}  // namespace rpg
