#include "rpg/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpg {

namespace {

std::vector<double> concat(std::span<const double> a,
                           std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<Value> concat_v(std::span<const Value> a,
                            std::span<const Value> b) {
  std::vector<Value> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double sigmoid_d(double x) { return 0.5 * (std::tanh(0.5 * x) + 1.0); }

Value vmin(Value a, Value b) { return -max(std::array<Value, 2>{-a, -b}); }

}  // namespace

GruCell::GruCell(size_t input_dim, size_t hidden_dim, Rng& rng)
    : in_(input_dim), hidden_(hidden_dim) {
  const std::vector<size_t> none;
  update_ = DenseNet(in_ + hidden_, none, hidden_, Activation::identity, rng);
  reset_ = DenseNet(in_ + hidden_, none, hidden_, Activation::identity, rng);
  candidate_ = DenseNet(in_ + hidden_, none, hidden_, Activation::identity, rng);
}

size_t GruCell::param_count() const {
  return update_.param_count() + reset_.param_count() +
         candidate_.param_count();
}

std::vector<double> GruCell::forward(std::span<const double> x,
                                     std::span<const double> h) const {
  std::vector<double> xh = concat(x, h);
  std::vector<double> u = update_.forward(xh);
  std::vector<double> r = reset_.forward(xh);
  std::vector<double> xrh = concat(x, h);
  for (size_t i = 0; i < hidden_; ++i) {
    xrh[in_ + i] *= sigmoid_d(r[i]);
  }
  std::vector<double> c = candidate_.forward(xrh);
  std::vector<double> out(hidden_);
  for (size_t i = 0; i < hidden_; ++i) {
    const double ui = sigmoid_d(u[i]);
    out[i] = (1.0 - ui) * h[i] + ui * std::tanh(c[i]);
  }
  return out;
}

GruCell::Binding GruCell::bind(Graph& g) const {
  return Binding{update_.bind(g), reset_.bind(g), candidate_.bind(g)};
}

std::vector<Value> GruCell::apply(Graph& g, const Binding& bind,
                                  std::span<const Value> x,
                                  std::span<const Value> h) const {
  std::vector<Value> xh = concat_v(x, h);
  std::vector<Value> u = update_.apply(g, bind.update, xh);
  std::vector<Value> r = reset_.apply(g, bind.reset, xh);
  std::vector<Value> xrh = xh;
  for (size_t i = 0; i < hidden_; ++i) {
    xrh[in_ + i] = xrh[in_ + i] * sigmoid(r[i]);
  }
  std::vector<Value> c = candidate_.apply(g, bind.candidate, xrh);
  std::vector<Value> out;
  out.reserve(hidden_);
  for (size_t i = 0; i < hidden_; ++i) {
    Value ui = sigmoid(u[i]);
    out.push_back((1.0 - ui) * h[i] + ui * tanh(c[i]));
  }
  return out;
}

void GruCell::copy_params_to(std::span<double> out) const {
  const size_t nu = update_.param_count(), nr = reset_.param_count();
  update_.copy_params_to(out.subspan(0, nu));
  reset_.copy_params_to(out.subspan(nu, nr));
  candidate_.copy_params_to(out.subspan(nu + nr, candidate_.param_count()));
}

void GruCell::set_params(std::span<const double> in) {
  const size_t nu = update_.param_count(), nr = reset_.param_count();
  update_.set_params(in.subspan(0, nu));
  reset_.set_params(in.subspan(nu, nr));
  candidate_.set_params(in.subspan(nu + nr, candidate_.param_count()));
}

void GruCell::accumulate_adjoints(const Binding& bind, const Graph& g,
                                  std::span<double> grad) const {
  const size_t nu = update_.param_count(), nr = reset_.param_count();
  update_.accumulate_adjoints(bind.update, g, grad.subspan(0, nu));
  reset_.accumulate_adjoints(bind.reset, g, grad.subspan(nu, nr));
  candidate_.accumulate_adjoints(bind.candidate, g,
                                 grad.subspan(nu + nr, candidate_.param_count()));
}

WorldModelParams make_world_model(const WorldModelConfig& cfg, Rng& rng) {
  if (cfg.obs_dim <= 0 || cfg.action_dim <= 0 || cfg.state_dim <= 0) {
    throw std::invalid_argument("world model needs positive dimensions");
  }
  WorldModelParams wm;
  wm.cfg = cfg;
  const size_t s = static_cast<size_t>(cfg.state_dim);
  const size_t a = static_cast<size_t>(cfg.action_dim);
  const size_t z = static_cast<size_t>(cfg.z_embed_dim);
  wm.encoder = DenseNet(static_cast<size_t>(cfg.obs_dim), cfg.hidden, s,
                        Activation::elu, rng);
  if (cfg.gru_dynamics) {
    wm.dynamics_gru = GruCell(a, s, rng);
  } else {
    wm.dynamics_mlp = DenseNet(s + a, cfg.hidden, s, Activation::elu, rng);
  }
  wm.reward_head = DenseNet(s + a, cfg.hidden, 1, Activation::elu, rng);
  wm.q1 = DenseNet(s + a + z, cfg.hidden, 1, Activation::elu, rng);
  wm.q2 = DenseNet(s + a + z, cfg.hidden, 1, Activation::elu, rng);
  wm.q1_target = wm.q1;
  wm.q2_target = wm.q2;
  return wm;
}

std::vector<double> WorldModelParams::encode(std::span<const double> obs) const {
  return encoder.forward(obs);
}

std::vector<double> WorldModelParams::dynamics(std::span<const double> s,
                                               std::span<const double> a) const {
  if (cfg.gru_dynamics) return dynamics_gru.forward(a, s);
  return dynamics_mlp.forward(concat(s, a));
}

double WorldModelParams::reward(std::span<const double> s,
                                std::span<const double> a) const {
  return reward_head.forward(concat(s, a))[0];
}

double WorldModelParams::q_min(std::span<const double> s,
                               std::span<const double> a,
                               std::span<const double> z, bool target) const {
  std::vector<double> in = concat(s, a);
  in.insert(in.end(), z.begin(), z.end());
  const double qa = (target ? q1_target : q1).forward(in)[0];
  const double qb = (target ? q2_target : q2).forward(in)[0];
  return std::min(qa, qb);
}

namespace {
void polyak_net(DenseNet& target, const DenseNet& online, double tau) {
  for (size_t l = 0; l < target.layers().size(); ++l) {
    auto& tl = target.layers()[l];
    const auto& ol = online.layers()[l];
    for (size_t i = 0; i < tl.w.size(); ++i) {
      tl.w[i] += tau * (ol.w[i] - tl.w[i]);
    }
    for (size_t i = 0; i < tl.b.size(); ++i) {
      tl.b[i] += tau * (ol.b[i] - tl.b[i]);
    }
  }
}
}  // namespace

void WorldModelParams::polyak_update() {
  polyak_net(q1_target, q1, cfg.polyak);
  polyak_net(q2_target, q2, cfg.polyak);
}

size_t WorldModelParams::param_count() const {
  size_t n = encoder.param_count() + reward_head.param_count() +
             q1.param_count() + q2.param_count();
  n += cfg.gru_dynamics ? dynamics_gru.param_count() : dynamics_mlp.param_count();
  return n;
}

void WorldModelParams::copy_params_to(std::span<double> out) const {
  size_t off = 0;
  auto put = [&](auto& net) {
    net.copy_params_to(out.subspan(off, net.param_count()));
    off += net.param_count();
  };
  put(encoder);
  if (cfg.gru_dynamics) {
    put(dynamics_gru);
  } else {
    put(dynamics_mlp);
  }
  put(reward_head);
  put(q1);
  put(q2);
}

void WorldModelParams::set_params(std::span<const double> in) {
  size_t off = 0;
  auto take = [&](auto& net) {
    net.set_params(in.subspan(off, net.param_count()));
    off += net.param_count();
  };
  take(encoder);
  if (cfg.gru_dynamics) {
    take(dynamics_gru);
  } else {
    take(dynamics_mlp);
  }
  take(reward_head);
  take(q1);
  take(q2);
}

WmBindings bind_world_model(Graph& g, const WorldModelParams& wm) {
  WmBindings b;
  b.encoder = wm.encoder.bind(g);
  if (wm.cfg.gru_dynamics) {
    b.gru = wm.dynamics_gru.bind(g);
  } else {
    b.dyn_mlp = wm.dynamics_mlp.bind(g);
  }
  b.reward = wm.reward_head.bind(g);
  b.q1 = wm.q1.bind(g);
  b.q2 = wm.q2.bind(g);
  return b;
}

void accumulate_wm_adjoints(const WorldModelParams& wm, const WmBindings& b,
                            const Graph& g, std::span<double> grad) {
  size_t off = 0;
  wm.encoder.accumulate_adjoints(b.encoder, g,
                                 grad.subspan(off, wm.encoder.param_count()));
  off += wm.encoder.param_count();
  if (wm.cfg.gru_dynamics) {
    wm.dynamics_gru.accumulate_adjoints(
        b.gru, g, grad.subspan(off, wm.dynamics_gru.param_count()));
    off += wm.dynamics_gru.param_count();
  } else {
    wm.dynamics_mlp.accumulate_adjoints(
        b.dyn_mlp, g, grad.subspan(off, wm.dynamics_mlp.param_count()));
    off += wm.dynamics_mlp.param_count();
  }
  wm.reward_head.accumulate_adjoints(
      b.reward, g, grad.subspan(off, wm.reward_head.param_count()));
  off += wm.reward_head.param_count();
  wm.q1.accumulate_adjoints(b.q1, g, grad.subspan(off, wm.q1.param_count()));
  off += wm.q1.param_count();
  wm.q2.accumulate_adjoints(b.q2, g, grad.subspan(off, wm.q2.param_count()));
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("zero-capacity buffer");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(t));
}

const Transition& ReplayBuffer::sample_one(Rng& rng) const {
  if (data_.empty()) throw std::logic_error("sampling from an empty buffer");
  return data_[rng.uniform_index(data_.size())];
}

std::vector<size_t> ReplayBuffer::sample_segment(Rng& rng, int len) const {
  if (len < 1 || data_.size() < static_cast<size_t>(len)) {
    throw std::invalid_argument("segment longer than the stored history");
  }
  for (int attempt = 0; attempt < 512; ++attempt) {
    const size_t start = rng.uniform_index(data_.size() - len + 1);
    bool ok = true;
    for (int i = 1; i < len; ++i) {
      const Transition& prev = data_[start + i - 1];
      const Transition& cur = data_[start + i];
      if (cur.episode != prev.episode || cur.step != prev.step + 1) {
        ok = false;
        break;
      }
    }
    if (ok) {
      std::vector<size_t> idx(static_cast<size_t>(len));
      for (int i = 0; i < len; ++i) idx[static_cast<size_t>(i)] = start + i;
      return idx;
    }
  }
  throw std::runtime_error("no contiguous segment found in the replay buffer");
}

std::vector<double> positional_encode(std::span<const double> x, int levels) {
  if (levels < 1) throw std::invalid_argument("positional levels must be >= 1");
  std::vector<double> out;
  out.reserve(x.size() * 2 * static_cast<size_t>(levels));
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite coordinate");
    double scale = 2.0;
    for (int i = 1; i <= levels; ++i) {
      out.push_back(std::sin(scale * v));
      out.push_back(std::cos(scale * v));
      scale *= 2.0;
    }
  }
  return out;
}

RndEstimator make_rnd(int obs_dim, int levels, int out_dim,
                      std::span<const size_t> hidden, double coef, Rng& rng) {
  RndEstimator rnd;
  rnd.levels = levels;
  rnd.coef = coef;
  const size_t in = static_cast<size_t>(obs_dim) * 2 * static_cast<size_t>(levels);
  rnd.target = DenseNet(in, hidden, static_cast<size_t>(out_dim),
                        Activation::relu, rng);
  rnd.predictor = DenseNet(in, hidden, static_cast<size_t>(out_dim),
                           Activation::relu, rng);
  return rnd;
}

double RndEstimator::raw_error(std::span<const double> obs) const {
  const std::vector<double> enc = positional_encode(obs, levels);
  const std::vector<double> t = target.forward(enc);
  const std::vector<double> p = predictor.forward(enc);
  double err = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    err += (p[i] - t[i]) * (p[i] - t[i]);
  }
  return err;
}

void RndEstimator::observe(double raw) {
  ++count;
  const double delta = raw - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (raw - mean);
}

double RndEstimator::running_std() const {
  if (count < 2) return 1.0;
  return std::sqrt(std::max(m2 / static_cast<double>(count - 1), 1e-12));
}

double RndEstimator::normalized_bonus(double raw) const {
  if (count < 2) return 0.0;
  return coef * (raw - mean) / running_std();
}

double RndEstimator::intrinsic(std::span<const double> obs) const {
  return normalized_bonus(raw_error(obs));
}

namespace {

std::vector<Value> as_constants(Graph& g, std::span<const double> xs) {
  std::vector<Value> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(g.constant(x));
  return out;
}

// Samples an action inside the learned model, reparameterized so
// gradients flow to the action head, and returns its log density.
struct ModelAction {
  std::vector<Value> action;
  Value log_density;
};

ModelAction model_action(Graph& g, std::span<const Value> state,
                         std::span<const Value> z_embed,
                         const PolicyParams& policy, const PolicyBindings& pb,
                         Rng& rng) {
  LatentVariable z;
  z.kind = policy.latent.kind;
  z.draw.assign(z_embed.begin(), z_embed.end());
  ActionSample a = sample_action(g, state, policy.latent.kind == LatentKind::none ? nullptr : &z,
                                 policy, pb, rng, GradMode::pathwise);
  return {std::move(a.action), a.log_density};
}

}  // namespace

Value value_estimate(Graph& g, std::span<const double> obs,
                     std::span<const double> z_embed,
                     const WorldModelParams& wm, const WmBindings& wb,
                     const PolicyBindings& pb,
                     const DenseNet::Binding* enc_binding,
                     const ValueEstimateInputs& in, Rng& rng,
                     std::vector<Value>* action_log_densities) {
  if (in.k < 0) throw std::invalid_argument("negative model rollout horizon");
  if (in.policy == nullptr) throw std::invalid_argument("missing policy");
  if (in.temperature <= 0.0) throw std::invalid_argument("bad temperature");

  std::vector<Value> obs_v = as_constants(g, obs);
  std::vector<Value> state = wm.encoder.apply(g, wb.encoder, obs_v);
  std::vector<Value> zv = as_constants(g, z_embed);

  Value total = g.constant(0.0);
  double discount = 1.0;
  for (int t = 0; t <= in.k; ++t) {
    ModelAction act = model_action(g, state, zv, *in.policy, pb, rng);
    if (action_log_densities != nullptr) {
      action_log_densities->push_back(act.log_density);
    }
    Value r_aux = -in.alpha * act.log_density;
    if (in.encoder != nullptr && enc_binding != nullptr &&
        in.encoder->kind != LatentKind::none) {
      LatentVariable z;
      z.kind = in.encoder->kind;
      z.draw = zv;
      if (z.kind == LatentKind::categorical) {
        // one-hot embedding: recover the index
        for (size_t i = 0; i < zv.size(); ++i) {
          if (zv[i].val() > 0.5) z.index = static_cast<int>(i);
        }
      }
      Value log_enc =
          encoder_log_density(g, z, state, act.action, *in.encoder, *enc_binding);
      r_aux = r_aux + in.beta * log_enc;
    }

    if (t == in.k) {
      std::vector<Value> q_in(state.begin(), state.end());
      q_in.insert(q_in.end(), act.action.begin(), act.action.end());
      q_in.insert(q_in.end(), zv.begin(), zv.end());
      Value q1v = wm.q1.apply(g, wb.q1, q_in)[0];
      Value q2v = wm.q2.apply(g, wb.q2, q_in)[0];
      total = total + discount * (vmin(q1v, q2v) + r_aux);
      break;
    }

    std::vector<Value> ra_in(state.begin(), state.end());
    ra_in.insert(ra_in.end(), act.action.begin(), act.action.end());
    Value r_t = wm.reward_head.apply(g, wb.reward, ra_in)[0] *
                (1.0 / in.temperature);
    total = total + discount * (r_t + r_aux);

    state = wm.cfg.gru_dynamics
                ? wm.dynamics_gru.apply(g, wb.gru, act.action, state)
                : wm.dynamics_mlp.apply(
                      g, wb.dyn_mlp,
                      concat_v(state, act.action));
    discount *= in.gamma;
  }
  return total;
}

double value_estimate_d(std::span<const double> obs,
                        std::span<const double> z_embed,
                        const WorldModelParams& wm,
                        const ValueEstimateInputs& in, Rng& rng) {
  if (in.k < 0) throw std::invalid_argument("negative model rollout horizon");
  std::vector<double> state = wm.encode(obs);
  double total = 0.0;
  double discount = 1.0;
  LatentDraw z;
  z.kind = in.policy->latent.kind;
  z.value.assign(z_embed.begin(), z_embed.end());
  for (int t = 0; t <= in.k; ++t) {
    double logp = 0.0;
    std::vector<double> a =
        sample_action_d(state, z, *in.policy, rng, false, &logp);
    double r_aux = -in.alpha * logp;
    if (in.encoder != nullptr && in.encoder->kind != LatentKind::none) {
      std::vector<double> enc_in = concat(state, a);
      if (in.encoder->kind == LatentKind::gaussian) {
        std::vector<double> mean = in.encoder->net.forward(enc_in);
        std::vector<double> ls(mean.size(), std::log(in.encoder->fixed_std));
        r_aux += in.beta * gaussian_logpdf(std::span<const double>(z_embed),
                                           std::span<const double>(mean),
                                           std::span<const double>(ls));
      } else {
        std::vector<double> logits = in.encoder->net.forward(enc_in);
        double m = logits[0];
        for (double l : logits) m = std::max(m, l);
        double zsum = 0.0;
        for (double l : logits) zsum += std::exp(l - m);
        int idx = 0;
        for (size_t i = 0; i < z_embed.size(); ++i) {
          if (z_embed[i] > 0.5) idx = static_cast<int>(i);
        }
        r_aux += in.beta * (logits[static_cast<size_t>(idx)] - m - std::log(zsum));
      }
    }
    if (t == in.k) {
      total += discount * (wm.q_min(state, a, z_embed, in.use_target_q) + r_aux);
      break;
    }
    total += discount * (wm.reward(state, a) / in.temperature + r_aux);
    state = wm.dynamics(state, a);
    discount *= in.gamma;
  }
  return total;
}

double relabeled_reward(const Transition& t) {
  return t.reward_ext + t.reward_int;
}

void relabel_intrinsic(ReplayBuffer& buffer, std::span<const size_t> segment,
                       const RndEstimator& rnd) {
  for (size_t idx : segment) {
    Transition& t = buffer.at_mut(idx);
    t.reward_int = rnd.intrinsic(t.obs);
  }
}

Value model_loss(Graph& g, const ReplayBuffer& buffer,
                 std::span<const size_t> segment, const WorldModelParams& wm,
                 const WmBindings& wb, const ValueEstimateInputs& in, Rng& rng,
                 const ModelLossWeights& w) {
  if (segment.empty()) throw std::invalid_argument("empty segment");
  for (size_t i = 1; i < segment.size(); ++i) {
    const Transition& prev = buffer.at(segment[i - 1]);
    const Transition& cur = buffer.at(segment[i]);
    if (cur.episode != prev.episode || cur.step != prev.step + 1) {
      throw std::invalid_argument("segment crosses an episode boundary");
    }
  }

  const Transition& head = buffer.at(segment[0]);
  std::vector<Value> state =
      wm.encoder.apply(g, wb.encoder, as_constants(g, head.obs));

  std::vector<Value> losses;
  for (size_t i = 0; i < segment.size(); ++i) {
    const Transition& tr = buffer.at(segment[i]);
    std::vector<Value> a = as_constants(g, tr.action);
    const double r_gt = relabeled_reward(tr);

    // Reward consistency.
    std::vector<Value> ra_in(state.begin(), state.end());
    ra_in.insert(ra_in.end(), a.begin(), a.end());
    Value r_pred = wm.reward_head.apply(g, wb.reward, ra_in)[0];
    losses.push_back(w.reward * square(r_pred - r_gt));

    // Q regression against the stop-gradient target.
    Rng tgt_rng = rng.child(0x7a11 + i);
    ValueEstimateInputs tin = in;
    tin.use_target_q = true;
    const double v_next =
        tr.done ? 0.0
                : value_estimate_d(tr.next_obs, tr.z, wm, tin, tgt_rng);
    const double y = r_gt + in.gamma * v_next;
    std::vector<Value> q_in(state.begin(), state.end());
    q_in.insert(q_in.end(), a.begin(), a.end());
    for (double zv : tr.z) q_in.push_back(g.constant(zv));
    Value q1v = wm.q1.apply(g, wb.q1, q_in)[0];
    Value q2v = wm.q2.apply(g, wb.q2, q_in)[0];
    losses.push_back(w.q * (square(q1v - y) + square(q2v - y)));

    // Latent state consistency against the stop-gradient encoding.
    std::vector<Value> next_state =
        wm.cfg.gru_dynamics ? wm.dynamics_gru.apply(g, wb.gru, a, state)
                            : wm.dynamics_mlp.apply(g, wb.dyn_mlp,
                                                    concat_v(state, a));
    const std::vector<double> target_state = wm.encode(tr.next_obs);
    std::vector<Value> diffs;
    diffs.reserve(next_state.size());
    for (size_t d = 0; d < next_state.size(); ++d) {
      diffs.push_back(square(next_state[d] - target_state[d]));
    }
    losses.push_back(w.state * sum(diffs));

    state = std::move(next_state);
  }
  return sum(losses);
}

}  // namespace rpg
