#include "rpg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpg/optim.hpp"

namespace rpg {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string("non-finite ") + what);
  }
}

// Overflow inside the graph surfaces as a DomainError; at the training
// level both mean the run diverged.
template <class Fn>
auto diverge_guard(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw DivergenceError(std::string(stage) + ": " + e.what());
  }
}

double decay_schedule(double progress) {
  if (progress <= 0.3) return 0.0;
  return std::min(1.0, (progress - 0.3) / 0.7);
}

double entropy_target_for(const TrainConfig& cfg, const EnvSpec& spec,
                          double progress) {
  const double final_target = cfg.entropy_target != 0.0
                                  ? cfg.entropy_target
                                  : -static_cast<double>(spec.action_dim);
  if (!cfg.entropy_target_anneal) return final_target;
  const double s = decay_schedule(progress);
  return cfg.entropy_target_explore * (1.0 - s) + final_target * s;
}

LatentSpec latent_spec_for(const TrainConfig& cfg) {
  LatentSpec latent;
  latent.kind = cfg.latent_kind;
  latent.categories = cfg.latent_categories;
  latent.dim = cfg.latent_dim;
  latent.learned_head = cfg.latent_learned;
  return latent;
}

double alpha_z_at(const TrainConfig& cfg, double progress) {
  if (!cfg.alpha_z_decay) return cfg.alpha_z_init;
  return cfg.alpha_z_init * (1.0 - decay_schedule(progress));
}

struct EpisodeStats {
  double total_reward = 0.0;
  std::vector<double> terminal_action;
  std::vector<double> terminal_state;
};

EpisodeStats run_episode(const Env& env, const Actor& actor, Rng& rng,
                         bool greedy, const LatentDraw* fixed_z,
                         std::vector<std::array<double, 2>>* visited = nullptr) {
  const EnvSpec& spec = env.spec();
  const PolicyParams& policy = *actor.policy;
  std::vector<double> obs = env.initial_state();
  LatentDraw z;
  if (fixed_z != nullptr) {
    z = *fixed_z;
  } else {
    z = sample_latent_d(actor.embed(obs), policy, rng, greedy);
  }
  EpisodeStats out;
  for (int t = 0; t < spec.horizon; ++t) {
    if (fixed_z == nullptr && policy.latent.kind != LatentKind::none &&
        policy.resample_period >= 1 && t > 0 &&
        t % policy.resample_period == 0) {
      z = sample_latent_d(actor.embed(env.initial_state()), policy, rng, greedy);
    }
    std::vector<double> a =
        sample_action_d(actor.embed(obs), z, policy, rng, greedy);
    StepResultD step = env.step(obs, a, t);
    out.total_reward += step.reward;
    obs = step.next_state;
    if (visited != nullptr && spec.state_dim == 2) {
      visited->push_back({obs[0], obs[1]});
    }
    if (step.done) {
      out.terminal_action = a;
      break;
    }
    if (t + 1 == spec.horizon) out.terminal_action = a;
  }
  out.terminal_state = obs;
  return out;
}

}  // namespace

std::vector<double> Actor::embed(std::span<const double> obs) const {
  if (world_model != nullptr) return world_model->encode(obs);
  return std::vector<double>(obs.begin(), obs.end());
}

EvalResult evaluate(const Env& env, const Actor& actor, int episodes,
                    Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  const PolicyParams& policy = *actor.policy;
  EvalResult res;

  std::vector<double> returns;
  returns.reserve(static_cast<size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    EpisodeStats s = run_episode(env, actor, rng, false, nullptr);
    returns.push_back(s.total_reward);
  }
  for (double r : returns) res.mean += r;
  res.mean /= static_cast<double>(episodes);
  for (double r : returns) {
    res.stddev += (r - res.mean) * (r - res.mean);
  }
  res.stddev = std::sqrt(res.stddev / static_cast<double>(episodes));

  // Greedy-latent mode inventory.
  auto greedy_mode = [&](const LatentDraw& z) {
    Rng mode_rng = rng.child(0x6d6f6465);
    EpisodeStats s = run_episode(env, actor, mode_rng, true, &z);
    EvalMode m;
    m.z_index = z.index;
    m.z_value = z.value;
    m.greedy_return = s.total_reward;
    m.terminal_action = s.terminal_action;
    m.terminal_state = s.terminal_state;
    return m;
  };

  if (policy.latent.kind == LatentKind::categorical) {
    for (int k = 0; k < policy.latent.categories; ++k) {
      LatentDraw z;
      z.kind = LatentKind::categorical;
      z.index = k;
      z.value.assign(static_cast<size_t>(policy.latent.categories), 0.0);
      z.value[static_cast<size_t>(k)] = 1.0;
      res.modes.push_back(greedy_mode(z));
    }
    LatentDraw top = sample_latent_d(actor.embed(env.initial_state()), policy,
                                     rng, true);
    res.greedy_return =
        res.modes[static_cast<size_t>(top.index)].greedy_return;
  } else if (policy.latent.kind == LatentKind::gaussian) {
    Rng zrng = rng.child(0x7a7a);
    for (int k = 0; k < 8; ++k) {
      LatentDraw z = sample_latent_d(actor.embed(env.initial_state()), policy,
                                     zrng, false);
      res.modes.push_back(greedy_mode(z));
    }
    LatentDraw center = sample_latent_d(actor.embed(env.initial_state()),
                                        policy, rng, true);
    res.greedy_return = greedy_mode(center).greedy_return;
  } else {
    LatentDraw none;
    EvalMode m = greedy_mode(none);
    res.modes.push_back(m);
    res.greedy_return = m.greedy_return;
  }
  return res;
}

double mode_separation(const EvalResult& eval) {
  double best = 0.0;
  for (size_t i = 0; i < eval.modes.size(); ++i) {
    for (size_t j = i + 1; j < eval.modes.size(); ++j) {
      const auto& a = eval.modes[i].terminal_action;
      const auto& b = eval.modes[j].terminal_action;
      double d2 = 0.0;
      for (size_t d = 0; d < a.size() && d < b.size(); ++d) {
        d2 += (a[d] - b[d]) * (a[d] - b[d]);
      }
      best = std::max(best, std::sqrt(d2));
    }
  }
  return best;
}

TrainOutputs train_direct(const TrainConfig& cfg) {
  std::unique_ptr<Env> env = make_env(cfg.env_id);
  const EnvSpec& spec = env->spec();
  if ((cfg.estimator != EstimatorKind::score) && !spec.differentiable) {
    throw std::invalid_argument(
        "pathwise/hybrid direct training needs a differentiable env");
  }

  Rng master(cfg.seed);
  Rng init_rng = master.child(1);
  Rng rollout_rng = master.child(2);
  Rng eval_rng = master.child(3);

  LatentSpec latent = latent_spec_for(cfg);
  PolicyParams policy = make_policy(spec, latent, cfg.policy_hidden, init_rng);
  policy.resample_period = cfg.resample_period;
  policy.init_log_sigma = cfg.init_log_sigma;
  policy.train_sigma = cfg.train_sigma;

  std::optional<EncoderParams> encoder;
  if (latent.kind != LatentKind::none) {
    encoder = make_encoder(spec, latent, cfg.policy_hidden, init_rng);
  }

  Adam::Options aopt;
  aopt.lr = cfg.lr;
  aopt.beta1 = cfg.adam_beta1;
  Adam policy_opt(policy.param_count(), aopt);
  Adam encoder_opt(encoder ? encoder->net.param_count() : 1, aopt);

  double log_alpha = std::log(std::max(cfg.alpha_init, 1e-8));

  const long steps_per_iter =
      static_cast<long>(cfg.batch) * static_cast<long>(spec.horizon);
  const long iters = std::max<long>(1, cfg.total_env_steps / steps_per_iter);
  const long eval_every_iters =
      std::max<long>(1, cfg.eval_every_steps / steps_per_iter);

  TrainOutputs out;
  const GradMode mode = cfg.estimator == EstimatorKind::score
                            ? GradMode::score
                        : cfg.estimator == EstimatorKind::pathwise
                            ? GradMode::pathwise
                            : GradMode::hybrid;

  std::vector<double> grad(policy.param_count());
  std::vector<double> flat(policy.param_count());
  std::vector<Graph> graphs(static_cast<size_t>(cfg.batch));
  Graph encoder_graph;

  for (long iter = 0; iter < iters; ++iter) {
    const double progress =
        static_cast<double>(iter) / static_cast<double>(iters);

    std::vector<Trajectory> batch;
    batch.reserve(static_cast<size_t>(cfg.batch));
    diverge_guard("rollout", [&] {
      for (int b = 0; b < cfg.batch; ++b) {
        graphs[static_cast<size_t>(b)].clear();
        batch.push_back(rollout(graphs[static_cast<size_t>(b)], *env, policy,
                                rollout_rng, mode));
      }
    });

    ElboConfig ecfg;
    ecfg.temperature = cfg.temperature;
    ecfg.alpha = cfg.alpha_auto ? std::exp(log_alpha) : cfg.alpha_init;
    ecfg.alpha_z = alpha_z_at(cfg, progress);
    ecfg.beta = cfg.beta;
    if (encoder) ecfg.encoder = &*encoder;

    GradEstimate est;
    diverge_guard("estimator", [&] {
      switch (cfg.estimator) {
        case EstimatorKind::score:
          est = score_grad(batch, ecfg, policy, cfg.score_baseline);
          break;
        case EstimatorKind::pathwise:
          est = pathwise_grad(batch, ecfg, policy, *env);
          break;
        case EstimatorKind::hybrid:
          est = hybrid_grad(batch, ecfg, policy, *env, cfg.score_baseline);
          break;
      }
    });

    // Ascent on the ELBO.
    for (size_t j = 0; j < grad.size(); ++j) grad[j] = -est.gradient[j];
    const double gnorm = clip_global_norm(grad, cfg.grad_clip);
    require_finite(gnorm, "policy gradient");
    policy.copy_params_to(flat);
    policy_opt.step(flat, grad);
    policy.set_params(flat);

    // Encoder maximizes the per-step latent log-likelihood.
    if (encoder) {
      Graph& eg = encoder_graph;
      eg.clear();
      DenseNet::Binding ebind = encoder->net.bind(eg);
      std::vector<Value> terms;
      for (const Trajectory& traj : batch) {
        for (size_t t = 0; t < traj.actions.size(); ++t) {
          const LatentVariable* z = traj.latent_at(static_cast<int>(t));
          std::vector<Value> s, a;
          for (const Value& v : traj.states[t]) s.push_back(eg.constant(v.val()));
          for (const Value& v : traj.actions[t]) a.push_back(eg.constant(v.val()));
          LatentVariable zc;
          zc.kind = z->kind;
          zc.index = z->index;
          for (double zv : z->draw_num) zc.draw.push_back(eg.constant(zv));
          terms.push_back(
              encoder_log_density(eg, zc, s, a, *encoder, ebind));
        }
      }
      Value loss = -sum(terms) * (1.0 / static_cast<double>(terms.size()));
      eg.backward(loss);
      std::vector<double> egrad(encoder->net.param_count(), 0.0);
      encoder->net.accumulate_adjoints(ebind, eg, egrad);
      clip_global_norm(egrad, cfg.grad_clip);
      std::vector<double> eflat(encoder->net.param_count());
      encoder->net.copy_params_to(eflat);
      encoder_opt.step(eflat, egrad);
      encoder->net.set_params(eflat);
    }

    // Dual update of the action-entropy temperature.
    if (cfg.alpha_auto) {
      double mean_logp = 0.0;
      long count = 0;
      for (const Trajectory& traj : batch) {
        for (const Value& lp : traj.action_log_densities) {
          mean_logp += lp.val();
          ++count;
        }
      }
      mean_logp /= static_cast<double>(count);
      log_alpha +=
          cfg.alpha_lr * (mean_logp + entropy_target_for(cfg, spec, progress));
      log_alpha = std::min(std::max(log_alpha, std::log(1e-6)), std::log(10.0));
    }

    if (iter % eval_every_iters == 0 || iter + 1 == iters) {
      Actor actor{&policy, nullptr};
      Rng erng = eval_rng.child(static_cast<uint64_t>(iter));
      EvalResult ev = evaluate(*env, actor, cfg.eval_episodes, erng);

      // Term means over the batch for the log row.
      double rt = 0.0, pt = 0.0, ct = 0.0, et = 0.0;
      for (Trajectory& traj : batch) {
        traj.graph->zero_adjoints();
        ElboTerms t = elbo_terms(traj, ecfg);
        rt += t.reward_term.val();
        pt += t.prior_term.val();
        ct += t.cross_entropy_term.val();
        et += t.entropy_term.val();
      }
      RunRow row;
      row.step = iter;
      row.env_steps = (iter + 1) * steps_per_iter;
      row.return_mean = ev.mean;
      row.return_std = ev.stddev;
      row.coverage = 0.0;
      row.reward_term = rt / cfg.batch;
      row.prior_term = pt / cfg.batch;
      row.cross_entropy_term = ct / cfg.batch;
      row.entropy_term = et / cfg.batch;
      row.grad_norm = gnorm;
      for (double v : {row.return_mean, row.return_std, row.reward_term,
                       row.cross_entropy_term, row.entropy_term}) {
        require_finite(v, "logged quantity");
      }
      out.record.rows.push_back(row);
    }
  }

  Actor actor{&policy, nullptr};
  Rng final_rng = eval_rng.child(0xfffff);
  out.final_eval = evaluate(*env, actor, cfg.eval_episodes, final_rng);
  out.policy = std::move(policy);
  if (encoder) out.encoder = std::move(encoder);
  return out;
}

TrainOutputs train_model_based(const TrainConfig& cfg) {
  std::unique_ptr<Env> env_holder = make_env(cfg.env_id);
  Env& env = *env_holder;
  EnvSpec spec = env.spec();
  if (cfg.horizon_override > 0) spec.horizon = cfg.horizon_override;

  Rng master(cfg.seed);
  Rng init_rng = master.child(11);
  Rng act_rng = master.child(12);
  Rng update_rng = master.child(13);
  Rng eval_rng = master.child(14);

  LatentSpec latent = latent_spec_for(cfg);

  WorldModelConfig wcfg;
  wcfg.obs_dim = spec.state_dim;
  wcfg.action_dim = spec.action_dim;
  wcfg.z_embed_dim = latent.embed_dim();
  wcfg.state_dim = cfg.state_dim;
  wcfg.hidden = cfg.model_hidden;
  wcfg.gru_dynamics = cfg.gru_dynamics;
  wcfg.gamma = cfg.gamma;
  wcfg.polyak = cfg.polyak;
  WorldModelParams wm = make_world_model(wcfg, init_rng);

  // Policy and encoder operate on the latent state embedding.
  EnvSpec embed_spec = spec;
  embed_spec.state_dim = cfg.state_dim;
  PolicyParams policy =
      make_policy(embed_spec, latent, cfg.policy_hidden, init_rng);
  policy.resample_period = cfg.resample_period;
  policy.init_log_sigma = cfg.init_log_sigma;
  policy.train_sigma = cfg.train_sigma;

  std::optional<EncoderParams> encoder;
  if (latent.kind != LatentKind::none) {
    encoder = make_encoder(embed_spec, latent, cfg.policy_hidden, init_rng);
  }

  std::optional<RndEstimator> rnd;
  if (cfg.rnd_enabled) {
    rnd = make_rnd(spec.state_dim, cfg.rnd_levels, cfg.rnd_out_dim,
                   cfg.rnd_hidden, cfg.rnd_coef, init_rng);
  }

  Adam::Options mopt;
  mopt.lr = cfg.model_lr;
  Adam model_opt(wm.param_count(), mopt);
  Adam::Options aopt;
  aopt.lr = cfg.lr;
  aopt.beta1 = cfg.adam_beta1;
  Adam actor_opt(policy.action_head.param_count(), aopt);
  Adam latent_opt(policy.latent.kind != LatentKind::none && latent.learned_head
                      ? policy.latent_head.param_count()
                      : 1,
                  aopt);
  Adam encoder_opt(encoder ? encoder->net.param_count() : 1, mopt);
  Adam rnd_opt(rnd ? rnd->predictor.param_count() : 1, mopt);

  ReplayBuffer buffer(cfg.buffer_capacity);
  double log_alpha = std::log(std::max(cfg.alpha_init, 1e-8));

  TrainOutputs out;
  bool seen_rooms[kMazeRooms] = {};
  int rooms_covered = 0;
  const bool track_coverage = spec.id == "maze";
  if (track_coverage) {
    seen_rooms[maze_room_index(0.0, 0.0)] = true;
    rooms_covered = 1;
  }

  long env_steps = 0;
  long episode_id = 0;
  long model_updates = 0;
  double last_actor_norm = 0.0;
  double last_value_mean = 0.0;
  double last_logp_mean = 0.0;
  double last_logenc_mean = 0.0;
  long next_eval = 0;

  auto maybe_log = [&]() {
    if (env_steps < next_eval) return;
    next_eval += cfg.eval_every_steps;
    Actor actor{&policy, &wm};
    Rng erng = eval_rng.child(static_cast<uint64_t>(env_steps));
    EvalResult ev = evaluate(env, actor, cfg.eval_episodes, erng);
    RunRow row;
    row.step = model_updates;
    row.env_steps = env_steps;
    row.return_mean = ev.mean;
    row.return_std = ev.stddev;
    row.coverage = rooms_covered;
    row.reward_term = last_value_mean;
    row.prior_term = 0.0;
    row.cross_entropy_term = last_logenc_mean;
    row.entropy_term = -last_logp_mean;
    row.grad_norm = last_actor_norm;
    for (double v : {row.return_mean, row.return_std, row.reward_term,
                     row.cross_entropy_term, row.entropy_term}) {
      require_finite(v, "logged quantity");
    }
    out.record.rows.push_back(row);
  };

  // Update graphs are reused across iterations to keep their arenas.
  Graph model_graph, encoder_graph, rnd_graph, actor_graph;

  auto do_update = [&]() {
    const double progress = static_cast<double>(env_steps) /
                            static_cast<double>(cfg.total_env_steps);
    const int seg_len = cfg.k_horizon;
    ValueEstimateInputs vin;
    vin.policy = &policy;
    vin.encoder = encoder ? &*encoder : nullptr;
    vin.alpha = cfg.alpha_auto ? std::exp(log_alpha) : cfg.alpha_init;
    vin.beta = cfg.beta;
    vin.temperature = cfg.temperature;
    vin.gamma = cfg.gamma;
    vin.k = cfg.k_horizon;

    // --- world model update over a batch of segments ---
    {
      Graph& g = model_graph;
      g.clear();
      WmBindings wb = bind_world_model(g, wm);
      std::vector<Value> losses;
      for (int b = 0; b < cfg.model_batch; ++b) {
        std::vector<size_t> seg = buffer.sample_segment(update_rng, seg_len);
        if (rnd) relabel_intrinsic(buffer, seg, *rnd);
        losses.push_back(
            model_loss(g, buffer, seg, wm, wb, vin, update_rng));
      }
      Value loss = sum(losses) * (1.0 / static_cast<double>(losses.size()));
      require_finite(loss.val(), "model loss");
      g.backward(loss);
      std::vector<double> grad(wm.param_count(), 0.0);
      accumulate_wm_adjoints(wm, wb, g, grad);
      clip_global_norm(grad, cfg.grad_clip);
      std::vector<double> flat(wm.param_count());
      wm.copy_params_to(flat);
      model_opt.step(flat, grad);
      wm.set_params(flat);
      wm.polyak_update();
    }

    // --- encoder update on buffer samples ---
    if (encoder) {
      Graph& g = encoder_graph;
      g.clear();
      DenseNet::Binding ebind = encoder->net.bind(g);
      std::vector<Value> terms;
      double logenc_sum = 0.0;
      for (int b = 0; b < cfg.model_batch; ++b) {
        const Transition& tr = buffer.sample_one(update_rng);
        const std::vector<double> s = wm.encode(tr.obs);
        std::vector<Value> sv, av;
        for (double v : s) sv.push_back(g.constant(v));
        for (double v : tr.action) av.push_back(g.constant(v));
        LatentVariable z;
        z.kind = latent.kind;
        if (latent.kind == LatentKind::categorical) {
          for (size_t i = 0; i < tr.z.size(); ++i) {
            if (tr.z[i] > 0.5) z.index = static_cast<int>(i);
          }
        }
        for (double v : tr.z) z.draw.push_back(g.constant(v));
        Value lp = encoder_log_density(g, z, sv, av, *encoder, ebind);
        logenc_sum += lp.val();
        terms.push_back(lp);
      }
      Value loss = -sum(terms) * (1.0 / static_cast<double>(terms.size()));
      g.backward(loss);
      std::vector<double> egrad(encoder->net.param_count(), 0.0);
      encoder->net.accumulate_adjoints(ebind, g, egrad);
      clip_global_norm(egrad, cfg.grad_clip);
      std::vector<double> eflat(encoder->net.param_count());
      encoder->net.copy_params_to(eflat);
      encoder_opt.step(eflat, egrad);
      encoder->net.set_params(eflat);
      last_logenc_mean = logenc_sum / cfg.model_batch;
    }

    // --- RND predictor update ---
    if (rnd) {
      Graph& g = rnd_graph;
      g.clear();
      DenseNet::Binding pbind = rnd->predictor.bind(g);
      std::vector<Value> losses;
      for (int b = 0; b < cfg.model_batch; ++b) {
        const Transition& tr = buffer.sample_one(update_rng);
        const std::vector<double> enc = positional_encode(tr.obs, rnd->levels);
        const std::vector<double> tgt = rnd->target.forward(enc);
        std::vector<Value> ev;
        for (double v : enc) ev.push_back(g.constant(v));
        std::vector<Value> pred = rnd->predictor.apply(g, pbind, ev);
        std::vector<Value> sq;
        for (size_t i = 0; i < pred.size(); ++i) {
          sq.push_back(square(pred[i] - tgt[i]));
        }
        losses.push_back(sum(sq));
      }
      Value loss = sum(losses) * (1.0 / static_cast<double>(losses.size()));
      g.backward(loss);
      std::vector<double> rgrad(rnd->predictor.param_count(), 0.0);
      rnd->predictor.accumulate_adjoints(pbind, g, rgrad);
      clip_global_norm(rgrad, cfg.grad_clip);
      std::vector<double> rflat(rnd->predictor.param_count());
      rnd->predictor.copy_params_to(rflat);
      rnd_opt.step(rflat, rgrad);
      rnd->predictor.set_params(rflat);
    }

    ++model_updates;
    if (model_updates % cfg.actor_update_freq != 0) return;

    // --- action-policy update: ascend the model value estimate ---
    {
      Graph& g = actor_graph;
      g.clear();
      WmBindings wb = bind_world_model(g, wm);
      PolicyBindings pb = bind_policy(g, policy);
      DenseNet::Binding ebind;
      if (encoder) ebind = encoder->net.bind(g);
      std::vector<Value> values;
      std::vector<Value> logps;
      for (int b = 0; b < cfg.model_batch; ++b) {
        const Transition& tr = buffer.sample_one(update_rng);
        values.push_back(value_estimate(
            g, tr.obs, tr.z, wm, wb, pb, encoder ? &ebind : nullptr, vin,
            update_rng, &logps));
      }
      Value mean_v = sum(values) * (1.0 / static_cast<double>(values.size()));
      last_value_mean = mean_v.val();
      require_finite(last_value_mean, "value estimate");
      Value loss = -mean_v;
      g.backward(loss);
      std::vector<double> agrad(policy.action_head.param_count(), 0.0);
      policy.action_head.accumulate_adjoints(pb.action, g, agrad);
      last_actor_norm = clip_global_norm(agrad, cfg.grad_clip);
      std::vector<double> aflat(policy.action_head.param_count());
      policy.action_head.copy_params_to(aflat);
      actor_opt.step(aflat, agrad);
      policy.action_head.set_params(aflat);

      double mean_logp = 0.0;
      for (const Value& lp : logps) mean_logp += lp.val();
      mean_logp /= static_cast<double>(logps.size());
      last_logp_mean = mean_logp;
      if (cfg.alpha_auto) {
        log_alpha += cfg.alpha_lr *
                     (mean_logp + entropy_target_for(cfg, spec, progress));
        log_alpha =
            std::min(std::max(log_alpha, std::log(1e-6)), std::log(10.0));
      }
    }

    // --- latent-policy update by score gradient on the value ---
    if (latent.kind != LatentKind::none && latent.learned_head) {
      const double alpha_z = alpha_z_at(cfg, progress);
      const int nb = cfg.model_batch;
      std::vector<double> weights(static_cast<size_t>(nb));
      std::vector<Graph> graphs(static_cast<size_t>(nb));
      std::vector<PolicyBindings> binds(static_cast<size_t>(nb));
      std::vector<LatentVariable> draws(static_cast<size_t>(nb));
      double wsum = 0.0;
      for (int b = 0; b < nb; ++b) {
        const Transition& tr = buffer.sample_one(update_rng);
        Graph& g = graphs[static_cast<size_t>(b)];
        binds[static_cast<size_t>(b)] = bind_policy(g, policy);
        std::vector<double> s1 = wm.encode(tr.obs);
        std::vector<Value> s1v;
        for (double v : s1) s1v.push_back(g.constant(v));
        draws[static_cast<size_t>(b)] =
            sample_latent(g, s1v, policy, binds[static_cast<size_t>(b)],
                          update_rng, GradMode::hybrid);
        const LatentVariable& z = draws[static_cast<size_t>(b)];
        std::vector<double> z_embed = z.draw_num;
        Rng vrng = update_rng.child(0xabc0 + static_cast<uint64_t>(b));
        const double v = value_estimate_d(tr.obs, z_embed, wm, vin, vrng);
        weights[static_cast<size_t>(b)] =
            v - alpha_z * z.log_density_score.val();
        wsum += weights[static_cast<size_t>(b)];
      }
      std::vector<double> lgrad(policy.latent_head.param_count(), 0.0);
      for (int b = 0; b < nb; ++b) {
        Graph& g = graphs[static_cast<size_t>(b)];
        const double baseline =
            nb > 1 ? (wsum - weights[static_cast<size_t>(b)]) /
                         static_cast<double>(nb - 1)
                   : 0.0;
        Value root =
            g.constant(weights[static_cast<size_t>(b)] - baseline) *
            draws[static_cast<size_t>(b)].log_density_score;
        g.backward(root);
        std::vector<double> gi(policy.latent_head.param_count(), 0.0);
        policy.latent_head.accumulate_adjoints(
            binds[static_cast<size_t>(b)].latent, g, gi);
        for (size_t j = 0; j < lgrad.size(); ++j) {
          lgrad[j] += gi[j] / static_cast<double>(nb);
        }
      }
      for (double& v : lgrad) v = -v;  // ascent
      clip_global_norm(lgrad, cfg.grad_clip);
      std::vector<double> lflat(policy.latent_head.param_count());
      policy.latent_head.copy_params_to(lflat);
      latent_opt.step(lflat, lgrad);
      policy.latent_head.set_params(lflat);
    }
  };

  while (env_steps < cfg.total_env_steps) {
    // One episode.
    std::vector<double> obs = env.initial_state();
    LatentDraw z;
    {
      const std::vector<double> s1 = wm.encode(obs);
      z = sample_latent_d(s1, policy, act_rng, false);
    }
    for (int t = 0; t < spec.horizon && env_steps < cfg.total_env_steps; ++t) {
      if (policy.latent.kind != LatentKind::none &&
          policy.resample_period >= 1 && t > 0 &&
          t % policy.resample_period == 0) {
        z = sample_latent_d(wm.encode(env.initial_state()), policy, act_rng,
                            false);
      }
      std::vector<double> a;
      if (buffer.size() < static_cast<size_t>(cfg.seed_steps)) {
        a.resize(static_cast<size_t>(spec.action_dim));
        for (size_t d = 0; d < a.size(); ++d) {
          a[d] = act_rng.uniform(spec.action_bounds[d][0],
                                 spec.action_bounds[d][1]);
        }
      } else {
        a = sample_action_d(wm.encode(obs), z, policy, act_rng, false);
      }
      StepResultD step = env.step(obs, a, t);

      Transition tr;
      tr.obs = obs;
      tr.action = a;
      tr.reward_ext = step.reward;
      tr.next_obs = step.next_state;
      tr.z = z.value;
      tr.episode = episode_id;
      tr.step = t;
      tr.done = step.done;
      if (rnd) {
        const double raw = rnd->raw_error(step.next_state);
        rnd->observe(raw);
        tr.reward_int = rnd->normalized_bonus(raw);
      }
      buffer.push(std::move(tr));

      obs = step.next_state;
      ++env_steps;
      if (track_coverage) {
        const int room = maze_room_index(obs[0], obs[1]);
        if (!seen_rooms[room]) {
          seen_rooms[room] = true;
          ++rooms_covered;
        }
      }

      if (buffer.size() >= static_cast<size_t>(cfg.seed_steps) &&
          env_steps % cfg.update_every == 0) {
        diverge_guard("update", [&] { do_update(); });
      }
      maybe_log();
      if (step.done) break;
    }
    ++episode_id;
  }

  Actor actor{&policy, &wm};
  Rng final_rng = eval_rng.child(0xfffff);
  out.final_eval = evaluate(env, actor, cfg.eval_episodes, final_rng);
  out.policy = std::move(policy);
  if (encoder) out.encoder = std::move(encoder);
  out.world_model = std::move(wm);
  return out;
}

TrainOutputs train(const TrainConfig& cfg) {
  return cfg.model_based ? train_model_based(cfg) : train_direct(cfg);
}

TrainConfig default_maze_config(bool multimodal) {
  TrainConfig cfg;
  cfg.env_id = "maze";
  cfg.model_based = true;
  cfg.total_env_steps = 20000;
  cfg.eval_every_steps = 2000;
  cfg.eval_episodes = 4;
  if (multimodal) {
    cfg.latent_kind = LatentKind::gaussian;
    cfg.latent_dim = 12;
    cfg.latent_learned = false;  // fixed N(0, I) prior on sparse tasks
  } else {
    cfg.latent_kind = LatentKind::none;
  }
  cfg.beta = 0.005;
  cfg.alpha_init = 0.01;
  cfg.alpha_auto = true;
  cfg.alpha_lr = 3e-3;
  cfg.policy_hidden = {64};
  cfg.init_log_sigma = -1.0;
  cfg.lr = 1e-3;
  cfg.batch = 64;
  cfg.state_dim = 32;
  cfg.model_hidden = {64};
  cfg.gru_dynamics = true;
  cfg.model_batch = 32;
  cfg.k_horizon = 3;
  cfg.model_lr = 1e-3;
  cfg.update_every = 5;
  cfg.actor_update_freq = 2;
  cfg.seed_steps = 1000;
  cfg.rnd_enabled = true;
  cfg.rnd_coef = 0.1;
  cfg.rnd_levels = 6;
  cfg.rnd_out_dim = 32;
  cfg.rnd_hidden = {64, 64};
  cfg.rnd_lr = 1e-3;
  return cfg;
}

}  // namespace rpg
