#include "rpg/estimators.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rpg/rng.hpp"
#include "support/oracles.hpp"

using namespace rpg;
using testing_oracles::central_diff;
using testing_oracles::simpson;

namespace {

constexpr double kInvSqrtTwoPi = 0.3989422804014326779;

double std_normal_pdf(double x) {
  return kInvSqrtTwoPi * std::exp(-0.5 * x * x);
}

// One-step env with reward c0 + c1 a + c2 a^2.
class QuadraticBandit : public Env {
public:
  QuadraticBandit(double c0, double c1, double c2) : c0_(c0), c1_(c1), c2_(c2) {
    spec_.id = "quadratic";
    spec_.state_dim = 1;
    spec_.action_dim = 1;
    spec_.horizon = 1;
    spec_.action_bounds = {{-1e9, 1e9}};
    spec_.differentiable = true;
  }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override { return {0.0}; }
  StepResultD step(std::span<const double>, std::span<const double> a,
                   int) const override {
    return {{0.0}, c0_ + c1_ * a[0] + c2_ * a[0] * a[0], true};
  }
  StepResultV step(Graph& g, std::span<const Value>, std::span<const Value> a,
                   int) const override {
    Value r = g.constant(c0_) + c1_ * a[0] + c2_ * square(a[0]);
    return {{g.constant(0.0)}, r, true};
  }

private:
  double c0_, c1_, c2_;
  EnvSpec spec_;
};

std::vector<Trajectory> roll_batch(std::vector<Graph>& graphs, const Env& env,
                                   const PolicyParams& params, Rng& rng,
                                   GradMode mode, size_t n) {
  graphs = std::vector<Graph>(n);
  std::vector<Trajectory> batch;
  batch.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    batch.push_back(rollout(graphs[i], env, params, rng, mode));
  }
  return batch;
}

}  // namespace

TEST_CASE("score estimator on the linear-Gaussian bandit recovers grad = 1") {
  auto env = make_env("linear_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.3};
  spec.log_sigma = {0.0};
  spec.squash = false;

  BiasReport report = bias_report(*env, spec, 100000, 12345);
  bool saw = false;
  for (const BiasRow& row : report.rows) {
    if (row.estimator == "score" && row.param == "mu") {
      saw = true;
      CHECK(row.oracle == doctest::Approx(1.0).epsilon(1e-7));
      CHECK(std::abs(row.mean - 1.0) < 3.0 * row.std_error);
      CHECK(std::abs(row.z_score) < 3.0);
    }
  }
  CHECK(saw);
}

TEST_CASE("score estimator with baseline kills constant rewards exactly") {
  QuadraticBandit env(5.0, 0.0, 0.0);  // constant reward 5
  Rng rng(9);
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.1};
  spec.log_sigma = {-0.2};
  spec.squash = false;
  PolicyParams params = to_policy_params(spec, env.spec());

  std::vector<Graph> graphs;
  auto batch = roll_batch(graphs, env, params, rng, GradMode::score, 256);
  GradEstimate est = score_grad(batch, ElboConfig{}, params);
  for (double gcoord : est.gradient) {
    CHECK(std::abs(gcoord) < 1e-12);
  }
}

TEST_CASE("score estimator is unbiased on bandit B against the oracle") {
  auto env = make_env("bandit_b");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.0};
  spec.log_sigma = {std::log(0.3)};
  spec.squash = true;

  BiasReport report = bias_report(*env, spec, 100000, 777);
  int checked = 0;
  for (const BiasRow& row : report.rows) {
    if (row.estimator == "score") {
      CHECK(std::abs(row.z_score) < 3.0);
      ++checked;
    }
  }
  CHECK(checked == 2);
}

TEST_CASE("pathwise estimator on an affine reward has zero variance") {
  auto env = make_env("linear_bandit");
  Rng rng(4);
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {-0.4};
  spec.log_sigma = {0.1};
  spec.squash = false;
  PolicyParams params = to_policy_params(spec, env->spec());
  std::vector<size_t> idx = oracle_param_indices(spec, params);

  std::vector<Graph> graphs;
  auto batch = roll_batch(graphs, *env, params, rng, GradMode::pathwise, 128);
  GradEstimate est = pathwise_grad(batch, ElboConfig{}, params, *env);
  CHECK(est.gradient[idx[0]] == 1.0);             // every sample exactly 1
  CHECK(est.per_sample_variance[idx[0]] == 0.0);  // exactly zero
}

TEST_CASE("step reward: pathwise is blind to the jump, score is not") {
  auto env = make_env("step_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.0};
  spec.log_sigma = {0.0};
  spec.squash = false;

  // Analytic truth: d/dmu E[1(a < c)] = -phi((c - mu)/sigma)/sigma.
  const double truth = -std_normal_pdf(kStepBanditJump);

  OracleResult oracle = oracle_grad(*env, spec);
  CHECK(oracle.converged);
  CHECK(oracle.true_gradient[0] == doctest::Approx(truth).epsilon(1e-6));
  CHECK(oracle.boundary_term[0] == doctest::Approx(truth).epsilon(1e-6));

  BiasReport report = bias_report(*env, spec, 100000, 31);
  for (const BiasRow& row : report.rows) {
    if (row.param != "mu") continue;
    if (row.estimator == "pathwise") {
      CHECK(row.mean == 0.0);  // identically zero samples
      CHECK(std::abs(row.z_score) > 5.0);
    }
    if (row.estimator == "score") {
      CHECK(std::abs(row.z_score) < 3.0);
    }
  }
}

TEST_CASE("smooth bandit: all three estimators agree with the oracle") {
  auto env = make_env("smooth_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {-0.1};
  spec.log_sigma = {std::log(0.5)};
  spec.squash = false;

  BiasReport report = bias_report(*env, spec, 100000, 99);
  CHECK(report.rows.size() == 3 * 2);
  for (const BiasRow& row : report.rows) {
    CHECK(std::abs(row.z_score) < 3.5);
  }
}

TEST_CASE("hybrid on a categorical mixture matches the mixture oracle") {
  QuadraticBandit env(0.3, 1.2, -0.8);
  BanditPolicySpec spec;
  spec.logits = {0.2, -0.4};
  spec.mu = {-0.5, 0.6};
  spec.log_sigma = {std::log(0.5), std::log(0.3)};
  spec.squash = false;

  OracleResult oracle = oracle_grad(env, spec);
  CHECK(oracle.converged);

  // Closed-form check of the oracle itself on the quadratic:
  // E_k[R] = c0 + c1 mu + c2 (mu^2 + sigma^2).
  for (size_t k = 0; k < 2; ++k) {
    const double mu = spec.mu[k], s = std::exp(spec.log_sigma[k]);
    const double ev = 0.3 + 1.2 * mu - 0.8 * (mu * mu + s * s);
    CHECK(oracle.expected_reward_per_component[k] ==
          doctest::Approx(ev).epsilon(1e-8));
  }

  PolicyParams params = to_policy_params(spec, env.spec());
  std::vector<size_t> idx = oracle_param_indices(spec, params);
  Rng rng(21);
  GradEstimate acc;
  for (int chunk = 0; chunk < 25; ++chunk) {
    std::vector<Graph> graphs;
    auto batch = roll_batch(graphs, env, params, rng, GradMode::hybrid, 2000);
    acc = combine(acc, hybrid_grad(batch, ElboConfig{}, params, env));
  }
  for (size_t j = 0; j < idx.size(); ++j) {
    const double se = std::sqrt(acc.per_sample_variance[idx[j]] /
                                static_cast<double>(acc.sample_count));
    CHECK(std::abs(acc.gradient[idx[j]] - oracle.true_gradient[j]) <
          3.5 * se + 1e-9);
  }
}

TEST_CASE("hybrid equals pathwise exactly when there is no latent atom") {
  auto env = make_env("smooth_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.2};
  spec.log_sigma = {-0.4};
  spec.squash = false;
  PolicyParams params = to_policy_params(spec, env->spec());

  Rng rng_a(5);
  std::vector<Graph> ga;
  auto batch_a = roll_batch(ga, *env, params, rng_a, GradMode::pathwise, 64);
  GradEstimate pw = pathwise_grad(batch_a, ElboConfig{}, params, *env);

  Rng rng_b(5);
  std::vector<Graph> gb;
  auto batch_b = roll_batch(gb, *env, params, rng_b, GradMode::hybrid, 64);
  GradEstimate hy = hybrid_grad(batch_b, ElboConfig{}, params, *env);

  for (size_t j = 0; j < pw.gradient.size(); ++j) {
    CHECK(hy.gradient[j] == pw.gradient[j]);
    CHECK(hy.per_sample_variance[j] == pw.per_sample_variance[j]);
  }
}

TEST_CASE("hybrid collapses to the score estimate when the decoder is flat") {
  // Piecewise-constant reward around well-separated modes: the
  // pathwise part vanishes and only the latent score term remains.
  auto env = make_env("step_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.3, -0.3};
  spec.mu = {-0.5, 0.8};
  spec.log_sigma = {std::log(0.05), std::log(0.05)};
  spec.squash = false;
  PolicyParams params = to_policy_params(spec, env->spec());
  const size_t n_logits = 2;

  Rng rng_a(8);
  std::vector<Graph> ga;
  auto batch_a = roll_batch(ga, *env, params, rng_a, GradMode::hybrid, 512);
  GradEstimate hy = hybrid_grad(batch_a, ElboConfig{}, params, *env);

  Rng rng_b(8);
  std::vector<Graph> gb;
  auto batch_b = roll_batch(gb, *env, params, rng_b, GradMode::score, 512);
  GradEstimate sc = score_grad(batch_b, ElboConfig{}, params);

  // Logit coordinates agree sample-for-sample; everything else in the
  // hybrid is exactly zero.
  std::vector<size_t> idx = oracle_param_indices(spec, params);
  for (size_t j = 0; j < n_logits; ++j) {
    CHECK(hy.gradient[idx[j]] == doctest::Approx(sc.gradient[idx[j]]).epsilon(1e-12));
  }
  for (size_t j = n_logits; j < idx.size(); ++j) {
    CHECK(hy.gradient[idx[j]] == 0.0);
  }
}

TEST_CASE("zero reward gives a zero hybrid gradient") {
  QuadraticBandit env(0.0, 0.0, 0.0);
  BanditPolicySpec spec;
  spec.logits = {0.0, 0.0};
  spec.mu = {-0.3, 0.3};
  spec.log_sigma = {-0.5, -0.5};
  spec.squash = false;
  PolicyParams params = to_policy_params(spec, env.spec());
  Rng rng(77);
  std::vector<Graph> graphs;
  auto batch = roll_batch(graphs, env, params, rng, GradMode::hybrid, 64);
  GradEstimate est = hybrid_grad(batch, ElboConfig{}, params, env);
  for (double gcoord : est.gradient) {
    CHECK(std::abs(gcoord) < 1e-12);
  }
}

TEST_CASE("oracle self-consistency on the smooth bandit") {
  auto env = make_env("smooth_bandit");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.1};
  spec.log_sigma = {std::log(0.5)};
  spec.squash = false;

  auto expected_reward = [&](double mu, double log_sigma) {
    const double sigma = std::exp(log_sigma);
    return simpson(
        [&](double eps) {
          const double a = mu + sigma * eps;
          const double s[1] = {0.0};
          const double act[1] = {a};
          return std_normal_pdf(eps) * env->step(s, act, 0).reward;
        },
        -10.0, 10.0, 400000);
  };

  OracleResult oracle = oracle_grad(*env, spec);
  CHECK(oracle.converged);
  const double h = 1e-4;
  const double fd_mu = (expected_reward(0.1 + h, spec.log_sigma[0]) -
                        expected_reward(0.1 - h, spec.log_sigma[0])) /
                       (2.0 * h);
  const double fd_ls = (expected_reward(0.1, spec.log_sigma[0] + h) -
                        expected_reward(0.1, spec.log_sigma[0] - h)) /
                       (2.0 * h);
  CHECK(std::abs(oracle.true_gradient[0] - fd_mu) < 1e-8);
  CHECK(std::abs(oracle.true_gradient[1] - fd_ls) < 1e-8);
  CHECK(std::abs(oracle.boundary_term[0]) == 0.0);
}

TEST_CASE("oracle refinement stability under tolerance tightening") {
  auto env = make_env("bandit_a");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.0};
  spec.log_sigma = {std::log(0.3)};
  spec.squash = true;

  OracleResult coarse = oracle_grad(*env, spec, 1 << 22, 1e-9);
  OracleResult fine = oracle_grad(*env, spec, 1 << 22, 2.5e-10);
  CHECK(coarse.converged);
  CHECK(fine.converged);
  for (size_t j = 0; j < coarse.true_gradient.size(); ++j) {
    CHECK(std::abs(coarse.true_gradient[j] - fine.true_gradient[j]) < 1e-6);
  }
}

TEST_CASE("bandit A at initialization has a nonzero boundary term") {
  auto env = make_env("bandit_a");
  BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.0};
  spec.log_sigma = {std::log(0.3)};
  spec.squash = true;

  OracleResult oracle = oracle_grad(*env, spec);
  CHECK(oracle.converged);
  CHECK(std::abs(oracle.boundary_term[0]) > 0.05);

  // The pathwise estimator's bias equals the missing boundary term.
  BiasReport report = bias_report(*env, spec, 100000, 3);
  for (const BiasRow& row : report.rows) {
    if (row.estimator == "pathwise" && row.param == "mu") {
      const double bias = row.mean - row.oracle;
      CHECK(std::abs(bias + row.boundary) < 3.0 * row.std_error);
      CHECK(std::abs(row.z_score) > 5.0);
    }
  }
}

TEST_CASE("pathwise variance stays at or below score variance on smooth quadratics") {
  Rng rng(1234);
  int wins = 0;
  const int instances = 20;
  for (int t = 0; t < instances; ++t) {
    QuadraticBandit env(rng.uniform(-1, 1), rng.uniform(-2, 2),
                        rng.uniform(-1.5, -0.1));
    BanditPolicySpec spec;
    spec.logits = {0.0};
    spec.mu = {rng.uniform(-0.5, 0.5)};
    spec.log_sigma = {std::log(rng.uniform(0.2, 1.0))};
    spec.squash = false;
    PolicyParams params = to_policy_params(spec, env.spec());
    std::vector<size_t> idx = oracle_param_indices(spec, params);

    Rng sample_rng(rng.next_u64());
    std::vector<Graph> ga;
    auto batch_a =
        roll_batch(ga, env, params, sample_rng, GradMode::pathwise, 2000);
    GradEstimate pw = pathwise_grad(batch_a, ElboConfig{}, params, env);

    Rng sample_rng2(sample_rng.next_u64());
    std::vector<Graph> gb;
    auto batch_b =
        roll_batch(gb, env, params, sample_rng2, GradMode::score, 2000);
    GradEstimate sc = score_grad(batch_b, ElboConfig{}, params);

    const double vp = pw.per_sample_variance[idx[0]] +
                      pw.per_sample_variance[idx[1]];
    const double vs = sc.per_sample_variance[idx[0]] +
                      sc.per_sample_variance[idx[1]];
    if (vp <= vs) ++wins;
  }
  CHECK(wins == instances);
}

TEST_CASE("regularity checker") {
  SUBCASE("bandit A flags the plateau boundary") {
    auto env = make_env("bandit_a");
    RegularityReport rep = check_regularity(*env, 4000);
    REQUIRE(rep.jump_candidates.size() == 1);
    CHECK(rep.jump_candidates[0] == doctest::Approx(0.45).epsilon(0.01));
    CHECK(rep.reward_bound <= 1.5);
  }
  SUBCASE("smooth move landscape has no candidates") {
    auto env = make_env("move2");
    RegularityReport rep = check_regularity(*env, 4000);
    CHECK(rep.jump_candidates.empty());
    for (const auto& [scale, lip] : rep.lipschitz_by_scale) {
      CHECK(lip < 50.0);
    }
  }
  SUBCASE("constant reward has zero Lipschitz estimate") {
    RegularityReport rep =
        check_regularity([](double) { return 0.7; }, -1.0, 1.0, 1000);
    CHECK(rep.reward_bound == doctest::Approx(0.7));
    for (const auto& [scale, lip] : rep.lipschitz_by_scale) {
      CHECK(lip == 0.0);
    }
    CHECK(rep.jump_candidates.empty());
  }
}

TEST_CASE("estimator gradients on nets match finite differences end to end") {
  auto env = make_env("smooth_bandit");
  Rng init(5);
  LatentSpec latent;
  latent.kind = LatentKind::categorical;
  latent.categories = 2;
  PolicyParams params = make_policy(env->spec(), latent, std::vector<size_t>{6},
                                    init);

  const uint64_t seed = 42;
  auto value = [&](const std::vector<double>& flat) {
    PolicyParams p = params;
    p.set_params(flat);
    Rng rng(seed);
    Graph g;
    Trajectory traj = rollout(g, *env, p, rng, GradMode::pathwise);
    return elbo_terms(traj, ElboConfig{}).total.val();
  };

  std::vector<double> flat(params.param_count());
  params.copy_params_to(flat);

  Rng rng(seed);
  Graph g;
  std::vector<Graph> graphs(1);
  Trajectory traj = rollout(graphs[0], *env, params, rng, GradMode::pathwise);
  std::vector<Trajectory> batch = {traj};
  GradEstimate est = pathwise_grad(batch, ElboConfig{}, params, *env);

  // The categorical draw is part of the sampled path; only probe the
  // action-head coordinates that stay on the same branch.
  Rng pick(9);
  for (int probe = 0; probe < 30; ++probe) {
    const size_t i = params.latent_head.param_count() +
                     pick.uniform_index(params.action_head.param_count());
    const double numeric = central_diff(value, flat, i);
    const double denom =
        std::max({1e-6, std::abs(numeric), std::abs(est.gradient[i])});
    CHECK(std::abs(est.gradient[i] - numeric) / denom < 1e-4);
  }
}
