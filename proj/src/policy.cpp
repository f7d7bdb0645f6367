#include "rpg/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "rpg/elbo.hpp"

namespace rpg {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kLogSigmaMax = 2.0;
const double kLogSigmaFloor = std::log(kSigmaFloor);

bool has_learned_latent(const PolicyParams& p) {
  return p.latent.kind != LatentKind::none && p.latent.learned_head;
}

// log softmax over graph logits, evaluated at one index.
Value log_softmax_at(Graph& g, std::span<const Value> logits, int index) {
  Value m = max(logits);
  std::vector<Value> exps;
  exps.reserve(logits.size());
  for (Value l : logits) exps.push_back(exp(l - m));
  Value log_z = log(sum(exps)) + m;
  return logits[static_cast<size_t>(index)] - log_z;
}

std::vector<double> softmax_d(std::span<const double> logits) {
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double clamp_d(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace

size_t PolicyParams::param_count() const {
  size_t n = action_head.param_count();
  if (has_learned_latent(*this)) n += latent_head.param_count();
  return n;
}

void PolicyParams::copy_params_to(std::span<double> out) const {
  size_t off = 0;
  if (has_learned_latent(*this)) {
    latent_head.copy_params_to(out.subspan(0, latent_head.param_count()));
    off = latent_head.param_count();
  }
  action_head.copy_params_to(out.subspan(off, action_head.param_count()));
}

void PolicyParams::set_params(std::span<const double> in) {
  size_t off = 0;
  if (has_learned_latent(*this)) {
    latent_head.set_params(in.subspan(0, latent_head.param_count()));
    off = latent_head.param_count();
  }
  action_head.set_params(in.subspan(off, action_head.param_count()));
}

PolicyParams make_policy(const EnvSpec& env, const LatentSpec& latent,
                         std::span<const size_t> hidden, Rng& rng) {
  PolicyParams p;
  p.latent = latent;
  p.action_bounds = env.action_bounds;
  if (latent.kind != LatentKind::none && latent.learned_head) {
    const size_t out = latent.kind == LatentKind::categorical
                           ? static_cast<size_t>(latent.categories)
                           : 2 * static_cast<size_t>(latent.dim);
    p.latent_head = DenseNet(static_cast<size_t>(env.state_dim), hidden, out,
                             Activation::elu, rng, 0.01);
  }
  const size_t in_dim =
      static_cast<size_t>(env.state_dim) + static_cast<size_t>(latent.embed_dim());
  p.action_head = DenseNet(in_dim, hidden, 2 * static_cast<size_t>(env.action_dim),
                           Activation::elu, rng, 0.01);
  return p;
}

EncoderParams make_encoder(const EnvSpec& env, const LatentSpec& latent,
                           std::span<const size_t> hidden, Rng& rng) {
  EncoderParams e;
  e.kind = latent.kind;
  e.categories = latent.categories;
  e.dim = latent.dim;
  if (latent.kind == LatentKind::none) return e;
  const size_t in_dim =
      static_cast<size_t>(env.state_dim) + static_cast<size_t>(env.action_dim);
  const size_t out = latent.kind == LatentKind::categorical
                         ? static_cast<size_t>(latent.categories)
                         : static_cast<size_t>(latent.dim);
  e.net = DenseNet(in_dim, hidden, out, Activation::elu, rng);
  return e;
}

PolicyBindings bind_policy(Graph& g, const PolicyParams& params) {
  PolicyBindings b;
  b.action = params.action_head.bind(g);
  if (has_learned_latent(params)) {
    b.latent = params.latent_head.bind(g);
    b.has_latent_head = true;
  }
  return b;
}

LatentVariable sample_latent(Graph& g, std::span<const Value> s1,
                             const PolicyParams& params,
                             const PolicyBindings& bindings, Rng& rng,
                             GradMode mode) {
  const LatentSpec& spec = params.latent;
  LatentVariable z;
  z.kind = spec.kind;
  if (spec.kind == LatentKind::none) {
    z.log_density = g.constant(0.0);
    z.log_density_score = z.log_density;
    return z;
  }

  if (spec.kind == LatentKind::categorical) {
    if (!spec.learned_head) {
      throw std::invalid_argument("categorical latent requires a learned head");
    }
    std::vector<Value> logits = params.latent_head.apply(g, bindings.latent, s1);
    std::vector<double> lv(logits.size());
    for (size_t i = 0; i < lv.size(); ++i) lv[i] = logits[i].val();
    std::vector<double> probs = softmax_d(lv);
    z.index = static_cast<int>(rng.categorical(probs));
    z.draw.reserve(probs.size());
    z.draw_num.assign(probs.size(), 0.0);
    z.draw_num[static_cast<size_t>(z.index)] = 1.0;
    for (double onehot : z.draw_num) z.draw.push_back(g.constant(onehot));
    z.log_density = log_softmax_at(g, logits, z.index);
    z.log_density_score = z.log_density;
    return z;
  }

  // Gaussian latent.
  const int d = spec.dim;
  z.noise.resize(static_cast<size_t>(d));
  for (double& e : z.noise) e = rng.normal();

  if (!spec.learned_head) {
    // Fixed standard-normal prior: no parameters to differentiate.
    z.draw_num.resize(static_cast<size_t>(d));
    double logp = 0.0;
    for (int i = 0; i < d; ++i) {
      z.draw_num[static_cast<size_t>(i)] = z.noise[static_cast<size_t>(i)];
      logp += -0.5 * kLogTwoPi -
              0.5 * z.noise[static_cast<size_t>(i)] * z.noise[static_cast<size_t>(i)];
    }
    for (double v : z.draw_num) z.draw.push_back(g.constant(v));
    z.log_density = g.constant(logp);
    z.log_density_score = z.log_density;
    return z;
  }

  std::vector<Value> out = params.latent_head.apply(g, bindings.latent, s1);
  std::vector<Value> mu(out.begin(), out.begin() + d);
  std::vector<Value> log_sigma;
  log_sigma.reserve(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    log_sigma.push_back(
        clamp(out[static_cast<size_t>(d + i)], kLogSigmaFloor, kLogSigmaMax));
  }

  std::vector<Value> draw_live;
  z.draw_num.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    Value x = mu[static_cast<size_t>(i)] +
              exp(log_sigma[static_cast<size_t>(i)]) * z.noise[static_cast<size_t>(i)];
    draw_live.push_back(x);
    z.draw_num[static_cast<size_t>(i)] = x.val();
  }

  std::vector<Value> draw_const;
  draw_const.reserve(static_cast<size_t>(d));
  for (double v : z.draw_num) draw_const.push_back(g.constant(v));

  z.log_density_score = gaussian_logpdf(draw_const, mu, log_sigma);
  if (mode == GradMode::pathwise) {
    z.draw = std::move(draw_live);
    z.log_density = gaussian_logpdf(z.draw, mu, log_sigma);
  } else {
    z.draw = std::move(draw_const);
    z.log_density = z.log_density_score;
  }
  return z;
}

ActionSample sample_action(Graph& g, std::span<const Value> state,
                           const LatentVariable* z, const PolicyParams& params,
                           const PolicyBindings& bindings, Rng& rng,
                           GradMode mode) {
  std::vector<Value> input(state.begin(), state.end());
  if (params.latent.kind != LatentKind::none) {
    if (z == nullptr) throw std::invalid_argument("latent policy needs a draw");
    input.insert(input.end(), z->draw.begin(), z->draw.end());
  }
  std::vector<Value> out = params.action_head.apply(g, bindings.action, input);
  const size_t dim = out.size() / 2;

  ActionSample res;
  std::vector<Value> log_density_terms;
  for (size_t i = 0; i < dim; ++i) {
    Value mu = out[i];
    Value log_sigma =
        params.train_sigma
            ? clamp(out[dim + i] + params.init_log_sigma, kLogSigmaFloor,
                    kLogSigmaMax)
            : g.constant(params.init_log_sigma);
    const double eps = rng.normal();

    Value x = mu + exp(log_sigma) * eps;
    if (mode == GradMode::score) x = g.constant(x.val());

    const Value xs[1] = {x};
    const Value mus[1] = {mu};
    const Value lss[1] = {log_sigma};
    Value logp = gaussian_logpdf(xs, mus, lss);

    if (params.squash) {
      const double lo = params.action_bounds[i][0];
      const double hi = params.action_bounds[i][1];
      const double half = 0.5 * (hi - lo);
      const double mid = 0.5 * (hi + lo);
      Value t = tanh(x);
      Value a = mid + half * t;
      logp = logp - log(half * (1.0 - square(t)) + kSquashDelta);
      res.action.push_back(a);
    } else {
      res.action.push_back(x);
    }
    log_density_terms.push_back(logp);
  }
  res.log_density = sum(log_density_terms);
  return res;
}

Trajectory rollout(Graph& g, const Env& env, const PolicyParams& params,
                   Rng& rng, GradMode mode) {
  const EnvSpec& spec = env.spec();
  if (spec.horizon < 1) throw std::invalid_argument("environment horizon < 1");

  Trajectory traj;
  traj.graph = &g;
  traj.mode = mode;
  traj.bindings = bind_policy(g, params);

  std::vector<Value> state;
  for (double v : env.initial_state()) state.push_back(g.constant(v));
  traj.states.push_back(state);

  const int period = params.resample_period;
  for (int t = 0; t < spec.horizon; ++t) {
    if (params.latent.kind != LatentKind::none &&
        (t == 0 || (period >= 1 && t % period == 0))) {
      traj.latents.emplace_back(
          t, sample_latent(g, traj.states.front(), params, traj.bindings, rng,
                           mode));
    }
    const LatentVariable* z =
        traj.latents.empty() ? nullptr : &traj.latents.back().second;
    ActionSample a = sample_action(g, state, z, params, traj.bindings, rng, mode);
    StepResultV step = env.step(g, state, a.action, t);

    traj.actions.push_back(a.action);
    traj.action_log_densities.push_back(a.log_density);
    traj.rewards.push_back(step.reward);
    traj.total_reward += step.reward.val();
    state = step.next_state;
    traj.states.push_back(state);
    if (step.done) break;
  }

  traj.log_prior_constant = uniform_action_log_prior(spec.action_bounds) *
                            static_cast<double>(traj.actions.size());
  return traj;
}

Value Trajectory::joint_log_density() const {
  std::vector<Value> terms;
  for (const auto& [t, z] : latents) terms.push_back(z.log_density);
  terms.insert(terms.end(), action_log_densities.begin(),
               action_log_densities.end());
  return sum(terms);
}

const LatentVariable* Trajectory::latent_at(int t) const {
  const LatentVariable* found = nullptr;
  for (const auto& [start, z] : latents) {
    if (start <= t) found = &z;
  }
  return found;
}

Value encoder_log_density(Graph& g, const LatentVariable& z,
                          std::span<const Value> state,
                          std::span<const Value> action,
                          const EncoderParams& enc,
                          const DenseNet::Binding& binding) {
  if (z.kind != enc.kind) {
    throw std::invalid_argument("latent/encoder kind mismatch");
  }
  std::vector<Value> input(state.begin(), state.end());
  input.insert(input.end(), action.begin(), action.end());
  std::vector<Value> out = enc.net.apply(g, binding, input);
  if (enc.kind == LatentKind::categorical) {
    return log_softmax_at(g, out, z.index);
  }
  if (enc.kind == LatentKind::gaussian) {
    std::vector<Value> log_sigma(out.size(),
                                 g.constant(std::log(enc.fixed_std)));
    return gaussian_logpdf(z.draw, out, log_sigma);
  }
  throw std::invalid_argument("encoder for latent-free policy");
}

LatentDraw sample_latent_d(std::span<const double> s1,
                           const PolicyParams& params, Rng& rng, bool greedy) {
  const LatentSpec& spec = params.latent;
  LatentDraw z;
  z.kind = spec.kind;
  if (spec.kind == LatentKind::none) return z;

  if (spec.kind == LatentKind::categorical) {
    std::vector<double> logits = params.latent_head.forward(s1);
    std::vector<double> probs = softmax_d(logits);
    if (greedy) {
      z.index = 0;
      for (size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[static_cast<size_t>(z.index)]) {
          z.index = static_cast<int>(i);
        }
      }
    } else {
      z.index = static_cast<int>(rng.categorical(probs));
    }
    z.value.assign(probs.size(), 0.0);
    z.value[static_cast<size_t>(z.index)] = 1.0;
    return z;
  }

  const size_t d = static_cast<size_t>(spec.dim);
  z.value.resize(d);
  if (!spec.learned_head) {
    for (size_t i = 0; i < d; ++i) z.value[i] = greedy ? 0.0 : rng.normal();
    return z;
  }
  std::vector<double> out = params.latent_head.forward(s1);
  for (size_t i = 0; i < d; ++i) {
    const double mu = out[i];
    const double ls = clamp_d(out[d + i], kLogSigmaFloor, kLogSigmaMax);
    z.value[i] = greedy ? mu : mu + std::exp(ls) * rng.normal();
  }
  return z;
}

std::vector<double> sample_action_d(std::span<const double> state,
                                    const LatentDraw& z,
                                    const PolicyParams& params, Rng& rng,
                                    bool greedy, double* log_density) {
  std::vector<double> input(state.begin(), state.end());
  if (params.latent.kind != LatentKind::none) {
    input.insert(input.end(), z.value.begin(), z.value.end());
  }
  std::vector<double> out = params.action_head.forward(input);
  const size_t dim = out.size() / 2;
  std::vector<double> action(dim);
  double logp = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    const double mu = out[i];
    const double ls = params.train_sigma
                          ? clamp_d(out[dim + i] + params.init_log_sigma,
                                    kLogSigmaFloor, kLogSigmaMax)
                          : params.init_log_sigma;
    const double eps = greedy ? 0.0 : rng.normal();
    const double x = mu + std::exp(ls) * eps;
    logp += -0.5 * kLogTwoPi - ls - 0.5 * eps * eps;
    if (params.squash) {
      const double lo = params.action_bounds[i][0];
      const double hi = params.action_bounds[i][1];
      const double half = 0.5 * (hi - lo);
      const double t = std::tanh(x);
      action[i] = 0.5 * (hi + lo) + half * t;
      logp -= std::log(half * (1.0 - t * t) + kSquashDelta);
    } else {
      action[i] = x;
    }
  }
  if (log_density != nullptr) *log_density = logp;
  return action;
}

}  // namespace rpg
