#include "rpg/policy.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "rpg/elbo.hpp"
#include "support/oracles.hpp"

using namespace rpg;
using testing_oracles::central_diff;
using testing_oracles::trapezoid;

namespace {

PolicyParams categorical_policy(int n, Rng& rng, const EnvSpec& env) {
  LatentSpec latent;
  latent.kind = LatentKind::categorical;
  latent.categories = n;
  return make_policy(env, latent, std::vector<size_t>{16}, rng);
}

}  // namespace

TEST_CASE("uniform categorical latent: probabilities and entropy") {
  Rng rng(1);
  auto env = make_env("bandit_a");
  PolicyParams params = categorical_policy(4, rng, env->spec());
  // Zero the latent head so logits are exactly uniform.
  std::vector<double> flat(params.latent_head.param_count(), 0.0);
  params.latent_head.set_params(flat);

  std::map<int, int> counts;
  const int n = 40000;
  double entropy = 0.0;
  for (int i = 0; i < n; ++i) {
    Graph g;
    PolicyBindings b = bind_policy(g, params);
    std::vector<Value> s1 = {g.constant(0.0)};
    LatentVariable z = sample_latent(g, s1, params, b, rng, GradMode::hybrid);
    counts[z.index]++;
    entropy += -z.log_density.val();
  }
  entropy /= n;
  CHECK(entropy == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  for (auto& [idx, c] : counts) {
    CHECK(static_cast<double>(c) / n == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("gaussian latent with zero noise lands on the head mean") {
  Rng rng(2);
  auto env = make_env("move2");
  LatentSpec latent;
  latent.kind = LatentKind::gaussian;
  latent.dim = 3;
  PolicyParams params = make_policy(env->spec(), latent,
                                    std::vector<size_t>{8}, rng);

  // Drive the noise to zero by sampling with a stub RNG whose normal()
  // draws are consumed from a fixed position: instead, check the
  // reparameterization identity directly on the draw.
  Graph g;
  PolicyBindings b = bind_policy(g, params);
  std::vector<Value> s1 = {g.constant(0.0), g.constant(0.0)};
  LatentVariable z = sample_latent(g, s1, params, b, rng, GradMode::pathwise);
  std::vector<double> head = params.latent_head.forward(std::vector<double>{0.0, 0.0});
  for (int i = 0; i < 3; ++i) {
    const double mu = head[static_cast<size_t>(i)];
    const double ls = std::min(std::max(head[static_cast<size_t>(3 + i)],
                                        std::log(1e-4)), 2.0);
    CHECK(z.draw[static_cast<size_t>(i)].val() ==
          doctest::Approx(mu + std::exp(ls) * z.noise[static_cast<size_t>(i)])
              .epsilon(1e-12));
  }
}

TEST_CASE("reparameterization consistency: dz/dmu = 1, dz/dsigma = eps") {
  Rng rng(3);
  Graph g;
  Value mu = g.leaf(0.4);
  Value log_sigma = g.leaf(-0.3);
  const double eps = 1.37;
  Value z = mu + exp(log_sigma) * eps;
  g.backward(z);
  CHECK(g.adjoint(mu) == doctest::Approx(1.0));
  // d z / d sigma = eps (chain through log parameterization).
  CHECK(g.adjoint(log_sigma) ==
        doctest::Approx(std::exp(-0.3) * eps).epsilon(1e-12));
}

TEST_CASE("score identity: mean score gradient of the latent head is zero") {
  Rng rng(4);
  auto env = make_env("bandit_a");
  PolicyParams params = categorical_policy(4, rng, env->spec());

  const size_t n_params = params.latent_head.param_count();
  std::vector<double> acc(n_params, 0.0), acc2(n_params, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Graph g;
    PolicyBindings b = bind_policy(g, params);
    std::vector<Value> s1 = {g.constant(0.0)};
    LatentVariable z = sample_latent(g, s1, params, b, rng, GradMode::hybrid);
    g.backward(z.log_density_score);
    std::vector<double> grad(n_params, 0.0);
    params.latent_head.accumulate_adjoints(b.latent, g, grad);
    for (size_t j = 0; j < n_params; ++j) {
      acc[j] += grad[j];
      acc2[j] += grad[j] * grad[j];
    }
  }
  for (size_t j = 0; j < n_params; ++j) {
    const double mean = acc[j] / n;
    const double var = acc2[j] / n - mean * mean;
    const double se = std::sqrt(std::max(var, 1e-30) / n);
    if (se > 1e-12) {
      CHECK(std::abs(mean) < 3.0 * se + 1e-12);
    } else {
      CHECK(std::abs(mean) < 1e-10);
    }
  }
}

TEST_CASE("tanh-normal action sample: closed-form log density at center") {
  Rng rng(5);
  auto env = make_env("bandit_a");
  LatentSpec none;
  PolicyParams params = make_policy(env->spec(), none, std::vector<size_t>{8},
                                    rng);
  // mu = 0, sigma = 1 exactly.
  std::vector<double> zeros(params.action_head.param_count(), 0.0);
  params.action_head.set_params(zeros);
  params.init_log_sigma = 0.0;

  // With eps = 0 the sample is a = tanh(0) = 0, and the squash
  // correction log(1 - 0 + delta) is within delta of zero.
  double logp = 0.0;
  std::vector<double> a =
      sample_action_d(std::vector<double>{0.0}, LatentDraw{}, params, rng,
                      /*greedy=*/true, &logp);
  CHECK(a[0] == doctest::Approx(0.0));
  CHECK(logp == doctest::Approx(-0.9189385).epsilon(1e-5));
}

TEST_CASE("squashed density integrates to one over the action interval") {
  Rng rng(6);
  auto env = make_env("bandit_a");
  LatentSpec none;
  PolicyParams params = make_policy(env->spec(), none, std::vector<size_t>{8},
                                    rng);
  params.init_log_sigma = -0.7;

  // Density of a: recover from the recorded log densities via a graph
  // evaluation at fixed a.
  auto density = [&](double a) {
    const double x = std::atanh(a);
    std::vector<double> head = params.action_head.forward(std::vector<double>{0.0});
    const double mu = head[0];
    const double ls = std::min(std::max(head[1] + params.init_log_sigma,
                                        std::log(1e-4)), 2.0);
    const double z = (x - mu) / std::exp(ls);
    const double base = std::exp(-0.5 * z * z) /
                        (std::exp(ls) * std::sqrt(2.0 * M_PI));
    return base / (1.0 - a * a);  // Jacobian of tanh
  };
  const double mass = trapezoid(density, -0.999999, 0.999999, 200000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sampled actions stay strictly inside the box, densities finite") {
  Rng rng(7);
  auto env = make_env("move1");
  LatentSpec latent;
  latent.kind = LatentKind::gaussian;
  latent.dim = 2;
  PolicyParams params = make_policy(env->spec(), latent, std::vector<size_t>{8},
                                    rng);
  params.init_log_sigma = 1.5;  // wide on purpose to stress saturation

  for (int i = 0; i < 2000; ++i) {
    Graph g;
    PolicyBindings b = bind_policy(g, params);
    std::vector<Value> s = {g.constant(0.1), g.constant(-0.2)};
    LatentVariable z = sample_latent(g, s, params, b, rng, GradMode::hybrid);
    ActionSample a = sample_action(g, s, &z, params, b, rng, GradMode::hybrid);
    for (size_t d = 0; d < 2; ++d) {
      CHECK(std::abs(a.action[d].val()) < kMoveActionMax);
    }
    CHECK(std::isfinite(a.log_density.val()));
  }
}

TEST_CASE("two separated categorical heads give distinct action modes") {
  auto env = make_env("bandit_a");
  // Hand-built two-component policy: z=0 -> mu -1.2, z=1 -> mu +1.2.
  PolicyParams params;
  params.latent.kind = LatentKind::categorical;
  params.latent.categories = 2;
  params.squash = true;
  params.train_sigma = true;
  params.init_log_sigma = 0.0;
  params.action_bounds = env->spec().action_bounds;
  DenseNet::Layer lat;
  lat.in = 1;
  lat.out = 2;
  lat.w = {0.0, 0.0};
  lat.b = {0.0, 0.0};
  params.latent_head.layers().push_back(lat);
  DenseNet::Layer act;
  act.in = 3;
  act.out = 2;
  act.w = {0.0, -1.2, 1.2, 0.0, -2.0, -2.0};
  act.b = {0.0, 0.0};
  params.action_head.layers().push_back(act);

  Rng rng(8);
  double mean0 = 0.0, mean1 = 0.0;
  int n0 = 0, n1 = 0;
  for (int i = 0; i < 4000; ++i) {
    const std::vector<double> s1 = {0.0};
    LatentDraw z = sample_latent_d(s1, params, rng, false);
    std::vector<double> a = sample_action_d(s1, z, params, rng, false);
    if (z.index == 0) {
      mean0 += a[0];
      ++n0;
    } else {
      mean1 += a[0];
      ++n1;
    }
  }
  mean0 /= n0;
  mean1 /= n1;
  CHECK(mean0 < -0.5);
  CHECK(mean1 > 0.5);
}

TEST_CASE("rollout latent schedule") {
  Rng rng(9);
  auto env = make_env("move2");
  LatentSpec latent;
  latent.kind = LatentKind::categorical;
  latent.categories = 3;

  SUBCASE("single z per episode") {
    PolicyParams params = make_policy(env->spec(), latent,
                                      std::vector<size_t>{8}, rng);
    params.resample_period = 0;
    Graph g;
    Trajectory traj = rollout(g, *env, params, rng, GradMode::hybrid);
    CHECK(traj.latents.size() == 1);
    CHECK(traj.latents[0].first == 0);
  }

  SUBCASE("period 5 on horizon 20 resamples at steps 1, 6, 11, 16") {
    PolicyParams params = make_policy(env->spec(), latent,
                                      std::vector<size_t>{8}, rng);
    params.resample_period = 5;
    Graph g;
    Trajectory traj = rollout(g, *env, params, rng, GradMode::hybrid);
    REQUIRE(traj.latents.size() == 4);
    CHECK(traj.latents[0].first == 0);
    CHECK(traj.latents[1].first == 5);
    CHECK(traj.latents[2].first == 10);
    CHECK(traj.latents[3].first == 15);
  }
}

TEST_CASE("joint log density equals the sum of recorded components") {
  Rng rng(10);
  auto env = make_env("move1");
  LatentSpec latent;
  latent.kind = LatentKind::gaussian;
  latent.dim = 4;
  PolicyParams params = make_policy(env->spec(), latent, std::vector<size_t>{8},
                                    rng);
  params.resample_period = 7;
  Graph g;
  Trajectory traj = rollout(g, *env, params, rng, GradMode::hybrid);

  double expect = 0.0;
  for (const auto& [t, z] : traj.latents) expect += z.log_density.val();
  for (const Value& lp : traj.action_log_densities) expect += lp.val();
  CHECK(traj.joint_log_density().val() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("encoder log densities") {
  Rng rng(11);
  auto env = make_env("bandit_a");

  SUBCASE("perfect categorical encoder gives log density 0") {
    EncoderParams enc;
    enc.kind = LatentKind::categorical;
    enc.categories = 2;
    DenseNet::Layer layer;
    layer.in = 2;
    layer.out = 2;
    // Huge fixed logits pointing at class 1 regardless of input.
    layer.w = {0.0, 0.0, 0.0, 0.0};
    layer.b = {-200.0, 200.0};
    enc.net.layers().push_back(layer);

    Graph g;
    LatentVariable z;
    z.kind = LatentKind::categorical;
    z.index = 1;
    std::vector<Value> s = {g.constant(0.0)};
    std::vector<Value> a = {g.constant(0.3)};
    auto binding = enc.net.bind(g);
    Value lp = encoder_log_density(g, z, s, a, enc, binding);
    CHECK(lp.val() == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("gaussian encoder at the predicted mean") {
    LatentSpec latent;
    latent.kind = LatentKind::gaussian;
    latent.dim = 3;
    EncoderParams enc = make_encoder(env->spec(), latent,
                                     std::vector<size_t>{8}, rng);
    Graph g;
    std::vector<Value> s = {g.constant(0.0)};
    std::vector<Value> a = {g.constant(0.1)};
    auto binding = enc.net.bind(g);
    std::vector<double> mean = enc.net.forward(std::vector<double>{0.0, 0.1});
    LatentVariable z;
    z.kind = LatentKind::gaussian;
    for (double m : mean) z.draw.push_back(g.constant(m));
    Value lp = encoder_log_density(g, z, s, a, enc, binding);
    const double expect =
        3.0 * (-0.5 * std::log(2.0 * M_PI) - std::log(0.38));
    CHECK(lp.val() == doctest::Approx(expect).epsilon(1e-9));
  }

  SUBCASE("kind mismatch is rejected") {
    EncoderParams enc;
    enc.kind = LatentKind::categorical;
    enc.categories = 2;
    Graph g;
    LatentVariable z;
    z.kind = LatentKind::gaussian;
    std::vector<Value> s = {g.constant(0.0)};
    std::vector<Value> a = {g.constant(0.0)};
    DenseNet::Binding binding;
    CHECK_THROWS_AS(encoder_log_density(g, z, s, a, enc, binding),
                    std::invalid_argument);
  }

  SUBCASE("encoder weight gradients match finite differences") {
    LatentSpec latent;
    latent.kind = LatentKind::gaussian;
    latent.dim = 2;
    EncoderParams enc = make_encoder(env->spec(), latent,
                                     std::vector<size_t>{6}, rng);
    const std::vector<double> zdraw = {0.4, -0.7};

    auto eval = [&](const std::vector<double>& p) {
      EncoderParams probe = enc;
      probe.net.set_params(p);
      std::vector<double> mean = probe.net.forward(std::vector<double>{0.0, 0.2});
      std::vector<double> ls(2, std::log(0.38));
      return gaussian_logpdf(std::span<const double>(zdraw),
                             std::span<const double>(mean),
                             std::span<const double>(ls));
    };
    std::vector<double> flat(enc.net.param_count());
    enc.net.copy_params_to(flat);

    Graph g;
    auto binding = enc.net.bind(g);
    LatentVariable z;
    z.kind = LatentKind::gaussian;
    z.draw = {g.constant(0.4), g.constant(-0.7)};
    std::vector<Value> s = {g.constant(0.0)};
    std::vector<Value> a = {g.constant(0.2)};
    Value lp = encoder_log_density(g, z, s, a, enc, binding);
    g.backward(lp);
    std::vector<double> grad(flat.size(), 0.0);
    enc.net.accumulate_adjoints(binding, g, grad);

    Rng pick(12);
    for (int t = 0; t < 40; ++t) {
      const size_t i = pick.uniform_index(flat.size());
      const double numeric = central_diff(eval, flat, i);
      const double denom = std::max({1e-8, std::abs(numeric), std::abs(grad[i])});
      CHECK(std::abs(grad[i] - numeric) / denom < 1e-5);
    }
  }
}
