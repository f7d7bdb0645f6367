#include "rpg/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "rpg/elbo.hpp"
#include "rpg/envs.hpp"
#include "rpg/estimators.hpp"
#include "rpg/policy.hpp"
#include "rpg/rng.hpp"
#include "rpg/world_model.hpp"

namespace rpg {

namespace {

using ScalarFn = std::function<double(const std::vector<double>&)>;

double central_diff(const ScalarFn& f, std::vector<double> p, size_t i,
                    double h) {
  p[i] += h;
  const double up = f(p);
  p[i] -= 2.0 * h;
  const double dn = f(p);
  return (up - dn) / (2.0 * h);
}

void emit(std::vector<GradCheckRow>& rows, const std::string& id,
          double analytic, double numeric) {
  GradCheckRow row;
  row.id = id;
  row.analytic = analytic;
  row.numeric = numeric;
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  row.rel_err = std::abs(analytic - numeric) / denom;
  row.pass = row.rel_err < kGradCheckTolerance;
  rows.push_back(row);
}

// Compares a handful of coordinates of the analytic gradient against
// central differences of the scalar function.
void check_coords(std::vector<GradCheckRow>& rows, const std::string& prefix,
                  const ScalarFn& f, const std::vector<double>& params,
                  const std::vector<double>& analytic, Rng& pick, int count) {
  for (int c = 0; c < count; ++c) {
    const size_t i = pick.uniform_index(params.size());
    const double numeric = central_diff(f, params, i, 1e-5);
    emit(rows, prefix + "[" + std::to_string(i) + "]#" + std::to_string(c),
         analytic[i], numeric);
  }
}

void graph_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  for (int t = 0; t < trials; ++t) {
    std::vector<double> point(4);
    for (double& p : point) p = rng.uniform(-1.2, 1.2);
    auto f = [](const std::vector<double>& p) {
      Graph g;
      Value a = g.leaf(p[0]);
      Value b = g.leaf(p[1]);
      Value c = g.leaf(p[2]);
      Value d = g.leaf(p[3]);
      Value h1 = tanh(a * b) + elu(c - d);
      Value h2 = exp(clamp(a + c, -3.0, 3.0)) * d;
      Value h3 = log(exp(b) + 1.5) - 0.5 * square(h1);
      const Value terms[3] = {h1 * h2, h3, a * 0.25};
      return sum(terms).val();
    };
    Graph g;
    Value a = g.leaf(point[0]);
    Value b = g.leaf(point[1]);
    Value c = g.leaf(point[2]);
    Value d = g.leaf(point[3]);
    Value h1 = tanh(a * b) + elu(c - d);
    Value h2 = exp(clamp(a + c, -3.0, 3.0)) * d;
    Value h3 = log(exp(b) + 1.5) - 0.5 * square(h1);
    const Value terms[3] = {h1 * h2, h3, a * 0.25};
    g.backward(sum(terms));
    const std::vector<double> analytic = {g.adjoint(a), g.adjoint(b),
                                          g.adjoint(c), g.adjoint(d)};
    Rng pick = rng.child(100 + static_cast<uint64_t>(t));
    check_coords(rows, "graph.expr" + std::to_string(t), f, point, analytic,
                 pick, 4);
  }
}

void net_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  const Activation acts[3] = {Activation::tanh, Activation::elu,
                              Activation::relu};
  for (int t = 0; t < trials; ++t) {
    Rng net_rng = rng.child(200 + static_cast<uint64_t>(t));
    DenseNet net(3, std::vector<size_t>{8, 6}, 2, acts[t % 3], net_rng);
    const std::vector<double> input = {net_rng.uniform(-1, 1),
                                       net_rng.uniform(-1, 1),
                                       net_rng.uniform(-1, 1)};
    auto f = [&](const std::vector<double>& p) {
      DenseNet probe = net;
      probe.set_params(p);
      std::vector<double> out = probe.forward(input);
      return out[0] + 0.5 * out[1];
    };
    std::vector<double> flat(net.param_count());
    net.copy_params_to(flat);

    Graph g;
    auto binding = net.bind(g);
    std::vector<Value> x;
    for (double v : input) x.push_back(g.constant(v));
    std::vector<Value> out = net.apply(g, binding, x);
    g.backward(out[0] + 0.5 * out[1]);
    std::vector<double> analytic(net.param_count(), 0.0);
    net.accumulate_adjoints(binding, g, analytic);

    Rng pick = rng.child(300 + static_cast<uint64_t>(t));
    check_coords(rows, "nets.mlp" + std::to_string(t), f, flat, analytic, pick,
                 5);
  }
}

void policy_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  auto env = make_env("bandit_b");
  for (int t = 0; t < trials; ++t) {
    Rng init = rng.child(400 + static_cast<uint64_t>(t));
    LatentSpec latent;
    latent.kind = LatentKind::gaussian;
    latent.dim = 2;
    PolicyParams params = make_policy(env->spec(), latent,
                                      std::vector<size_t>{6}, init);
    const uint64_t sample_seed = init.next_u64();

    auto f = [&](const std::vector<double>& p) {
      PolicyParams probe = params;
      probe.set_params(p);
      Rng srng(sample_seed);
      Graph g;
      PolicyBindings bind = bind_policy(g, probe);
      std::vector<Value> s1 = {g.constant(0.0)};
      LatentVariable z =
          sample_latent(g, s1, probe, bind, srng, GradMode::pathwise);
      ActionSample a =
          sample_action(g, s1, &z, probe, bind, srng, GradMode::pathwise);
      return (z.log_density + a.log_density).val();
    };
    std::vector<double> flat(params.param_count());
    params.copy_params_to(flat);

    Rng srng(sample_seed);
    Graph g;
    PolicyBindings bind = bind_policy(g, params);
    std::vector<Value> s1 = {g.constant(0.0)};
    LatentVariable z =
        sample_latent(g, s1, params, bind, srng, GradMode::pathwise);
    ActionSample a =
        sample_action(g, s1, &z, params, bind, srng, GradMode::pathwise);
    g.backward(z.log_density + a.log_density);
    std::vector<double> analytic(params.param_count(), 0.0);
    size_t off = 0;
    params.latent_head.accumulate_adjoints(
        bind.latent, g,
        std::span<double>(analytic).subspan(0, params.latent_head.param_count()));
    off = params.latent_head.param_count();
    params.action_head.accumulate_adjoints(
        bind.action, g,
        std::span<double>(analytic).subspan(off,
                                            params.action_head.param_count()));

    Rng pick = rng.child(500 + static_cast<uint64_t>(t));
    check_coords(rows, "policy.logdensity" + std::to_string(t), f, flat,
                 analytic, pick, 5);
  }
}

void elbo_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  auto env = make_env("move2");
  for (int t = 0; t < trials; ++t) {
    Rng init = rng.child(600 + static_cast<uint64_t>(t));
    LatentSpec latent;
    latent.kind = LatentKind::gaussian;
    latent.dim = 2;
    PolicyParams params = make_policy(env->spec(), latent,
                                      std::vector<size_t>{6}, init);
    EncoderParams enc = make_encoder(env->spec(), latent,
                                     std::vector<size_t>{6}, init);
    const uint64_t sample_seed = init.next_u64();
    const size_t np = params.param_count();
    const size_t ne = enc.net.param_count();

    auto f = [&](const std::vector<double>& p) {
      PolicyParams probe = params;
      EncoderParams eprobe = enc;
      probe.set_params(std::span<const double>(p).subspan(0, np));
      eprobe.net.set_params(std::span<const double>(p).subspan(np, ne));
      Rng srng(sample_seed);
      Graph g;
      Trajectory traj = rollout(g, *env, probe, srng, GradMode::pathwise);
      ElboConfig cfg;
      cfg.alpha = 0.2;
      cfg.alpha_z = 0.1;
      cfg.beta = 0.01;
      cfg.encoder = &eprobe;
      return elbo_terms(traj, cfg).total.val();
    };
    std::vector<double> flat(np + ne);
    params.copy_params_to(std::span<double>(flat).subspan(0, np));
    enc.net.copy_params_to(std::span<double>(flat).subspan(np, ne));

    Rng srng(sample_seed);
    Graph g;
    Trajectory traj = rollout(g, *env, params, srng, GradMode::pathwise);
    ElboConfig cfg;
    cfg.alpha = 0.2;
    cfg.alpha_z = 0.1;
    cfg.beta = 0.01;
    cfg.encoder = &enc;
    ElboTerms terms = elbo_terms(traj, cfg);
    g.backward(terms.total);
    std::vector<double> analytic(np + ne, 0.0);
    params.latent_head.accumulate_adjoints(
        traj.bindings.latent, g,
        std::span<double>(analytic).subspan(0, params.latent_head.param_count()));
    params.action_head.accumulate_adjoints(
        traj.bindings.action, g,
        std::span<double>(analytic).subspan(params.latent_head.param_count(),
                                            params.action_head.param_count()));
    enc.net.accumulate_adjoints(terms.encoder_binding, g,
                                std::span<double>(analytic).subspan(np, ne));

    Rng pick = rng.child(700 + static_cast<uint64_t>(t));
    check_coords(rows, "elbo.total" + std::to_string(t), f, flat, analytic,
                 pick, 6);
  }
}

void env_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  // Pathwise gradient of bandit rewards w.r.t. the action.
  for (int t = 0; t < trials; ++t) {
    Rng r = rng.child(800 + static_cast<uint64_t>(t));
    const bool use_a = t % 2 == 0;
    double a0 = r.uniform(-0.95, 0.95);
    // keep clear of the declared jumps so the probe stays one-sided
    const double jump = use_a ? kBanditAJump : kBanditBJump;
    if (std::abs(a0 - jump) < 0.02) a0 += 0.05;
    auto f = [&](const std::vector<double>& p) {
      return use_a ? bandit_a_reward(p[0]) : bandit_b_reward(p[0]);
    };
    Graph g;
    Value a = g.leaf(a0);
    Value rew = use_a ? bandit_a_reward(a) : bandit_b_reward(a);
    g.backward(rew);
    check_coords(rows,
                 std::string("envs.") + (use_a ? "bandit_a" : "bandit_b") +
                     std::to_string(t),
                 f, {a0}, {g.adjoint(a)}, r, 1);
  }

  // Two chained move steps into the terminal landscape, including a
  // bounce off the move3 obstacle cluster.
  for (int t = 0; t < trials; ++t) {
    Rng r = rng.child(900 + static_cast<uint64_t>(t));
    const MoveVariant variant = t % 2 == 0 ? MoveVariant::move2
                                           : MoveVariant::move3;
    static const ObstacleSet kNoObstacles;
    const ObstacleSet& obs = variant == MoveVariant::move3 ? move3_obstacles()
                                                           : kNoObstacles;
    std::vector<double> actions(4);
    for (double& v : actions) v = r.uniform(-0.11, 0.11);
    const double sx = r.uniform(-0.2, 0.2), sy = r.uniform(-0.2, 0.2);

    auto f = [&](const std::vector<double>& p) {
      const double s0[2] = {sx, sy};
      auto r1 = move_step(s0, std::array<double, 2>{p[0], p[1]}, obs);
      auto r2 = move_step(r1.next_state, std::array<double, 2>{p[2], p[3]}, obs);
      return move_terminal_reward(std::span<const double>(r2.next_state),
                                  variant);
    };

    Graph g;
    std::vector<Value> av;
    for (double v : actions) av.push_back(g.leaf(v));
    std::vector<Value> s = {g.constant(sx), g.constant(sy)};
    auto r1 = move_step(g, s, std::vector<Value>{av[0], av[1]}, obs);
    auto r2 = move_step(g, r1.next_state, std::vector<Value>{av[2], av[3]}, obs);
    Value rew = move_terminal_reward(g, r2.next_state, variant);
    g.backward(rew);
    std::vector<double> analytic;
    for (const Value& v : av) analytic.push_back(g.adjoint(v));

    // Grazing contacts make one-sided derivatives; skip straddles.
    bool near_kink = false;
    for (size_t i = 0; i < actions.size(); ++i) {
      const double left = central_diff(f, actions, i, 2e-5);
      const double right = central_diff(f, actions, i, 1e-5);
      if (std::abs(left - right) >
          1e-3 * std::max({1.0, std::abs(left), std::abs(right)})) {
        near_kink = true;
      }
    }
    if (near_kink) continue;
    Rng pick = r.child(1);
    check_coords(rows, "envs.move" + std::to_string(t), f, actions, analytic,
                 pick, 2);
  }
}

void worldmodel_cases(std::vector<GradCheckRow>& rows, int trials, Rng& rng) {
  for (int t = 0; t < trials; ++t) {
    Rng init = rng.child(1000 + static_cast<uint64_t>(t));
    WorldModelConfig wcfg;
    wcfg.obs_dim = 2;
    wcfg.action_dim = 2;
    wcfg.z_embed_dim = 2;
    wcfg.state_dim = 5;
    wcfg.hidden = {8};
    wcfg.gru_dynamics = t % 2 == 0;
    WorldModelParams wm = make_world_model(wcfg, init);

    EnvSpec embed_spec;
    embed_spec.state_dim = 5;
    embed_spec.action_dim = 2;
    embed_spec.horizon = 8;
    embed_spec.action_bounds = {{-1.0, 1.0}, {-1.0, 1.0}};
    LatentSpec latent;
    latent.kind = LatentKind::gaussian;
    latent.dim = 2;
    latent.learned_head = false;
    PolicyParams policy = make_policy(embed_spec, latent,
                                      std::vector<size_t>{6}, init);
    const uint64_t sample_seed = init.next_u64();
    const std::vector<double> obs = {0.3, -0.2};
    const std::vector<double> z = {0.5, -1.0};

    const size_t nw = wm.param_count();
    const size_t np = policy.param_count();

    auto f = [&](const std::vector<double>& p) {
      WorldModelParams wprobe = wm;
      PolicyParams pprobe = policy;
      wprobe.set_params(std::span<const double>(p).subspan(0, nw));
      pprobe.set_params(std::span<const double>(p).subspan(nw, np));
      Rng srng(sample_seed);
      Graph g;
      WmBindings wb = bind_world_model(g, wprobe);
      PolicyBindings pb = bind_policy(g, pprobe);
      ValueEstimateInputs in;
      in.policy = &pprobe;
      in.alpha = 0.1;
      in.gamma = 0.9;
      in.k = 2;
      return value_estimate(g, obs, z, wprobe, wb, pb, nullptr, in, srng).val();
    };
    std::vector<double> flat(nw + np);
    wm.copy_params_to(std::span<double>(flat).subspan(0, nw));
    policy.copy_params_to(std::span<double>(flat).subspan(nw, np));

    Rng srng(sample_seed);
    Graph g;
    WmBindings wb = bind_world_model(g, wm);
    PolicyBindings pb = bind_policy(g, policy);
    ValueEstimateInputs in;
    in.policy = &policy;
    in.alpha = 0.1;
    in.gamma = 0.9;
    in.k = 2;
    Value v = value_estimate(g, obs, z, wm, wb, pb, nullptr, in, srng);
    g.backward(v);
    std::vector<double> analytic(nw + np, 0.0);
    accumulate_wm_adjoints(wm, wb, g,
                           std::span<double>(analytic).subspan(0, nw));
    policy.action_head.accumulate_adjoints(
        pb.action, g, std::span<double>(analytic).subspan(nw, np));

    Rng pick = rng.child(1100 + static_cast<uint64_t>(t));
    check_coords(rows, "worldmodel.value" + std::to_string(t), f, flat,
                 analytic, pick, 5);
  }
}

void selftest_cases(std::vector<GradCheckRow>& rows) {
  // Deliberately wrong analytic value: proves failing rows surface.
  Graph g;
  Value x = g.leaf(0.7);
  Value y = x * x;
  g.backward(y);
  const double broken = g.adjoint(x) + 0.5;
  auto f = [](const std::vector<double>& p) { return p[0] * p[0]; };
  const double numeric = central_diff(f, {0.7}, 0, 1e-5);
  emit(rows, "selftest.broken_derivative", broken, numeric);
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(const std::string& module, int trials,
                                        uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("gradcheck needs trials >= 1");
  std::vector<GradCheckRow> rows;
  Rng rng(seed);
  const bool all = module == "all";
  bool matched = false;
  if (all || module == "graph") {
    graph_cases(rows, 12 * trials, rng);
    matched = true;
  }
  if (all || module == "nets") {
    net_cases(rows, 8 * trials, rng);
    matched = true;
  }
  if (all || module == "policy") {
    policy_cases(rows, 8 * trials, rng);
    matched = true;
  }
  if (all || module == "elbo") {
    elbo_cases(rows, 6 * trials, rng);
    matched = true;
  }
  if (all || module == "envs") {
    env_cases(rows, 12 * trials, rng);
    matched = true;
  }
  if (all || module == "worldmodel") {
    worldmodel_cases(rows, 6 * trials, rng);
    matched = true;
  }
  if (module == "selftest") {
    selftest_cases(rows);
    matched = true;
  }
  if (!matched) {
    throw std::invalid_argument(
        "unknown gradcheck module '" + module +
        "' (graph|nets|policy|elbo|envs|worldmodel|selftest|all)");
  }
  return rows;
}

}  // namespace rpg
