#include "rpg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpg {

namespace {

constexpr double kInvSqrtTwoPi = 0.3989422804014326779;

double std_normal_pdf(double x) {
  return kInvSqrtTwoPi * std::exp(-0.5 * x * x);
}

std::vector<double> softmax(std::span<const double> logits) {
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

GradMode mode_for(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::score: return GradMode::score;
    case EstimatorKind::pathwise: return GradMode::pathwise;
    case EstimatorKind::hybrid: return GradMode::hybrid;
  }
  return GradMode::score;
}

void extract_gradient(const Trajectory& traj, const PolicyParams& params,
                      std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  size_t off = 0;
  if (traj.bindings.has_latent_head) {
    params.latent_head.accumulate_adjoints(
        traj.bindings.latent, *traj.graph,
        out.subspan(0, params.latent_head.param_count()));
    off = params.latent_head.param_count();
  }
  params.action_head.accumulate_adjoints(
      traj.bindings.action, *traj.graph,
      out.subspan(off, params.action_head.param_count()));
}

GradEstimate run_estimator(std::span<Trajectory> batch, const ElboConfig& cfg,
                           const PolicyParams& params, EstimatorKind kind,
                           bool baseline) {
  if (batch.empty()) throw std::invalid_argument("empty estimator batch");
  const GradMode want = mode_for(kind);
  for (const Trajectory& t : batch) {
    if (t.mode != want) {
      throw std::invalid_argument(
          "trajectory gradient mode does not match the estimator");
    }
  }

  const size_t n = params.param_count();
  const size_t b_count = batch.size();

  std::vector<ElboTerms> terms;
  terms.reserve(b_count);
  std::vector<double> totals(b_count);
  for (size_t i = 0; i < b_count; ++i) {
    terms.push_back(elbo_terms(batch[i], cfg));
    totals[i] = terms[i].total.val();
  }
  // Leave-one-out baseline: unbiased even at small batch sizes.
  double total_sum = 0.0;
  for (double t : totals) total_sum += t;
  const bool use_baseline =
      baseline && b_count > 1 &&
      (kind == EstimatorKind::score || kind == EstimatorKind::hybrid);

  std::vector<double> per_sample(b_count * n);
  for (size_t i = 0; i < b_count; ++i) {
    Trajectory& traj = batch[i];
    Graph& g = *traj.graph;
    const double base =
        use_baseline
            ? (total_sum - totals[i]) / static_cast<double>(b_count - 1)
            : 0.0;
    Value root = terms[i].total;
    if (kind == EstimatorKind::score) {
      root = g.constant(totals[i] - base) * traj.joint_log_density();
    } else if (kind == EstimatorKind::hybrid && !traj.latents.empty()) {
      std::vector<Value> zs;
      for (const auto& [t, z] : traj.latents) zs.push_back(z.log_density_score);
      root = g.constant(totals[i] - base) * sum(zs) + terms[i].total;
    }
    g.backward(root);
    extract_gradient(traj, params, {per_sample.data() + i * n, n});
  }

  GradEstimate est;
  est.kind = kind;
  est.sample_count = static_cast<long>(b_count);
  est.gradient.assign(n, 0.0);
  est.per_sample_variance.assign(n, 0.0);
  for (size_t i = 0; i < b_count; ++i) {
    for (size_t j = 0; j < n; ++j) est.gradient[j] += per_sample[i * n + j];
  }
  for (double& gsum : est.gradient) gsum /= static_cast<double>(b_count);
  for (size_t i = 0; i < b_count; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double d = per_sample[i * n + j] - est.gradient[j];
      est.per_sample_variance[j] += d * d;
    }
  }
  for (double& v : est.per_sample_variance) v /= static_cast<double>(b_count);
  return est;
}

}  // namespace

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "score") return EstimatorKind::score;
  if (s == "pathwise") return EstimatorKind::pathwise;
  if (s == "hybrid") return EstimatorKind::hybrid;
  throw std::invalid_argument("unknown estimator: " + s);
}

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::score: return "score";
    case EstimatorKind::pathwise: return "pathwise";
    case EstimatorKind::hybrid: return "hybrid";
  }
  return "?";
}

GradEstimate combine(const GradEstimate& a, const GradEstimate& b) {
  if (a.sample_count == 0) return b;
  if (b.sample_count == 0) return a;
  if (a.gradient.size() != b.gradient.size() || a.kind != b.kind) {
    throw std::invalid_argument("incompatible gradient estimates");
  }
  GradEstimate out;
  out.kind = a.kind;
  out.sample_count = a.sample_count + b.sample_count;
  const double na = static_cast<double>(a.sample_count);
  const double nb = static_cast<double>(b.sample_count);
  const double nt = na + nb;
  out.gradient.resize(a.gradient.size());
  out.per_sample_variance.resize(a.gradient.size());
  for (size_t j = 0; j < a.gradient.size(); ++j) {
    const double m = (na * a.gradient[j] + nb * b.gradient[j]) / nt;
    const double e2 =
        (na * (a.per_sample_variance[j] + a.gradient[j] * a.gradient[j]) +
         nb * (b.per_sample_variance[j] + b.gradient[j] * b.gradient[j])) /
        nt;
    out.gradient[j] = m;
    out.per_sample_variance[j] = std::max(0.0, e2 - m * m);
  }
  return out;
}

GradEstimate score_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                        const PolicyParams& params, bool baseline) {
  return run_estimator(batch, cfg, params, EstimatorKind::score, baseline);
}

GradEstimate pathwise_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                           const PolicyParams& params, const Env& env) {
  if (!env.spec().differentiable) {
    throw std::invalid_argument("pathwise estimator needs a differentiable env");
  }
  return run_estimator(batch, cfg, params, EstimatorKind::pathwise, false);
}

GradEstimate hybrid_grad(std::span<Trajectory> batch, const ElboConfig& cfg,
                         const PolicyParams& params, const Env& env,
                         bool baseline) {
  if (!env.spec().differentiable) {
    throw std::invalid_argument("hybrid estimator needs a differentiable env");
  }
  return run_estimator(batch, cfg, params, EstimatorKind::hybrid, baseline);
}

size_t BanditPolicySpec::param_count() const {
  const size_t k = components();
  return (k > 1 ? k : 0) + 2 * k;
}

std::vector<std::string> BanditPolicySpec::param_names() const {
  std::vector<std::string> names;
  const size_t k = components();
  if (k > 1) {
    for (size_t i = 0; i < k; ++i) names.push_back("logit_" + std::to_string(i));
  }
  for (size_t i = 0; i < k; ++i) {
    names.push_back(k > 1 ? "mu_" + std::to_string(i) : "mu");
  }
  for (size_t i = 0; i < k; ++i) {
    names.push_back(k > 1 ? "log_sigma_" + std::to_string(i) : "log_sigma");
  }
  return names;
}

PolicyParams to_policy_params(const BanditPolicySpec& spec, const EnvSpec& env) {
  const size_t k = spec.components();
  if (k == 0 || spec.logits.size() != k || spec.log_sigma.size() != k) {
    throw std::invalid_argument("malformed bandit policy spec");
  }
  if (env.action_dim != 1 || env.state_dim != 1) {
    throw std::invalid_argument("bandit policy spec needs a 1-D bandit env");
  }

  PolicyParams p;
  p.squash = spec.squash;
  p.train_sigma = true;
  p.init_log_sigma = 0.0;
  p.action_bounds = env.action_bounds;

  if (k > 1) {
    p.latent.kind = LatentKind::categorical;
    p.latent.categories = static_cast<int>(k);
    p.latent.learned_head = true;
    DenseNet::Layer lat;
    lat.in = 1;
    lat.out = k;
    lat.w.assign(k, 0.0);
    lat.b = spec.logits;
    p.latent_head.layers().push_back(std::move(lat));
  }

  DenseNet::Layer act;
  act.in = 1 + (k > 1 ? k : 0);
  act.out = 2;
  act.w.assign(act.in * 2, 0.0);
  act.b.assign(2, 0.0);
  if (k == 1) {
    act.b[0] = spec.mu[0];
    act.b[1] = spec.log_sigma[0];
  } else {
    for (size_t j = 0; j < k; ++j) {
      act.w[1 + j] = spec.mu[j];
      act.w[act.in + 1 + j] = spec.log_sigma[j];
    }
  }
  p.action_head.layers().push_back(std::move(act));
  return p;
}

std::vector<size_t> oracle_param_indices(const BanditPolicySpec& spec,
                                         const PolicyParams& params) {
  const size_t k = spec.components();
  std::vector<size_t> idx;
  if (k == 1) {
    // action layout: [w(2), b(2)] -> mu = b0, log_sigma = b1
    idx.push_back(2);
    idx.push_back(3);
    return idx;
  }
  const size_t latent_count = params.latent_head.param_count();  // w(k)+b(k)
  const size_t in = 1 + k;
  for (size_t j = 0; j < k; ++j) idx.push_back(k + j);  // logits in latent bias
  for (size_t j = 0; j < k; ++j) idx.push_back(latent_count + 1 + j);
  for (size_t j = 0; j < k; ++j) idx.push_back(latent_count + in + 1 + j);
  return idx;
}

namespace {

struct IntegrandSample {
  double value = 0.0;   // phi(eps) R(a(eps))
  double d_mu = 0.0;    // phi(eps) dR/dmu
  double d_ls = 0.0;    // phi(eps) dR/dlog_sigma
};

IntegrandSample eval_integrand(const Env& env, const BanditPolicySpec& spec,
                               size_t comp, double eps) {
  Graph g;
  Value mu = g.leaf(spec.mu[comp]);
  Value ls = g.leaf(spec.log_sigma[comp]);
  Value x = mu + exp(ls) * eps;
  Value a = x;
  if (spec.squash) {
    const double lo = spec.bounds[0], hi = spec.bounds[1];
    a = 0.5 * (hi + lo) + 0.5 * (hi - lo) * tanh(x);
  }
  const Value state[1] = {g.constant(0.0)};
  const Value action[1] = {a};
  Value r = env.step(g, state, action, 0).reward;
  g.backward(r);
  const double w = std_normal_pdf(eps);
  IntegrandSample s;
  s.value = w * r.val();
  s.d_mu = w * g.adjoint(mu);
  s.d_ls = w * g.adjoint(ls);
  return s;
}

struct SegmentIntegral {
  double value = 0.0, d_mu = 0.0, d_ls = 0.0;
  long resolution = 0;
  bool converged = true;
};

struct AdaptCtx {
  const Env* env;
  const BanditPolicySpec* spec;
  size_t comp;
  long budget;
  long used = 0;
  bool converged = true;
};

IntegrandSample ctx_eval(AdaptCtx& ctx, double eps) {
  ++ctx.used;
  return eval_integrand(*ctx.env, *ctx.spec, ctx.comp, eps);
}

// Classic adaptive trapezoid: split the interval where the halved
// estimate still moves, stop where it is stable.
void adapt_trapezoid(AdaptCtx& ctx, double lo, const IntegrandSample& f_lo,
                     double hi, const IntegrandSample& f_hi, double tol,
                     int depth, SegmentIntegral& out) {
  const double h = hi - lo;
  const double mid = 0.5 * (lo + hi);
  if (ctx.used >= ctx.budget) {
    ctx.converged = false;
    out.value += 0.5 * h * (f_lo.value + f_hi.value);
    out.d_mu += 0.5 * h * (f_lo.d_mu + f_hi.d_mu);
    out.d_ls += 0.5 * h * (f_lo.d_ls + f_hi.d_ls);
    return;
  }
  const IntegrandSample f_mid = ctx_eval(ctx, mid);
  const double t1_v = 0.5 * h * (f_lo.value + f_hi.value);
  const double t1_m = 0.5 * h * (f_lo.d_mu + f_hi.d_mu);
  const double t1_s = 0.5 * h * (f_lo.d_ls + f_hi.d_ls);
  const double t2_v = 0.25 * h * (f_lo.value + 2.0 * f_mid.value + f_hi.value);
  const double t2_m = 0.25 * h * (f_lo.d_mu + 2.0 * f_mid.d_mu + f_hi.d_mu);
  const double t2_s = 0.25 * h * (f_lo.d_ls + 2.0 * f_mid.d_ls + f_hi.d_ls);
  const double delta =
      std::abs(t2_v - t1_v) + std::abs(t2_m - t1_m) + std::abs(t2_s - t1_s);
  // A few forced splits guard against accepting a spuriously flat
  // coarse estimate across an unsampled bump.
  if ((depth >= 6 && delta < tol) || depth >= 44) {
    if (depth >= 44 && delta >= tol) ctx.converged = false;
    out.value += t2_v;
    out.d_mu += t2_m;
    out.d_ls += t2_s;
    return;
  }
  adapt_trapezoid(ctx, lo, f_lo, mid, f_mid, 0.5 * tol, depth + 1, out);
  adapt_trapezoid(ctx, mid, f_mid, hi, f_hi, 0.5 * tol, depth + 1, out);
}

// Jump-adjacent endpoints are nudged into the segment so each side
// integrates its own branch of the landscape.
SegmentIntegral integrate_segment(const Env& env, const BanditPolicySpec& spec,
                                  size_t comp, double lo, double hi,
                                  bool lo_is_jump, bool hi_is_jump,
                                  long max_resolution, double abs_tol) {
  const double nudge = 1e-9 * std::max(1.0, std::abs(hi - lo));
  const double a = lo_is_jump ? lo + nudge : lo;
  const double b = hi_is_jump ? hi - nudge : hi;
  SegmentIntegral out;
  if (!(b > a)) return out;

  AdaptCtx ctx{&env, &spec, comp, max_resolution};
  const IntegrandSample f_lo = ctx_eval(ctx, a);
  const IntegrandSample f_hi = ctx_eval(ctx, b);
  adapt_trapezoid(ctx, a, f_lo, b, f_hi, abs_tol, 0, out);
  out.resolution = ctx.used;
  out.converged = ctx.converged;
  return out;
}

}  // namespace

OracleResult oracle_grad(const Env& env, const BanditPolicySpec& spec,
                         long max_resolution, double abs_tol) {
  const EnvSpec& es = env.spec();
  if (es.horizon != 1 || es.action_dim != 1) {
    throw std::invalid_argument(
        "oracle_grad handles one-step 1-D action landscapes only");
  }
  const size_t k = spec.components();
  if (k == 0) throw std::invalid_argument("empty policy spec");
  std::vector<double> weights = softmax(spec.logits);

  const double eps_range = 9.0;
  std::vector<double> jumps_a = env.reward_jumps();

  OracleResult res;
  res.true_gradient.assign(spec.param_count(), 0.0);
  res.boundary_term.assign(spec.param_count(), 0.0);
  res.expected_reward_per_component.assign(k, 0.0);
  res.converged = true;

  const size_t logit_off = k > 1 ? 0 : 0;
  const size_t mu_off = k > 1 ? k : 0;
  const size_t ls_off = mu_off + k;

  for (size_t comp = 0; comp < k; ++comp) {
    const double sigma = std::exp(spec.log_sigma[comp]);

    // Jump locations in eps-space for this component.
    std::vector<double> eps_jumps;
    for (double c : jumps_a) {
      double xc = c;
      if (spec.squash) {
        const double lo = spec.bounds[0], hi = spec.bounds[1];
        const double u = (c - 0.5 * (hi + lo)) / (0.5 * (hi - lo));
        if (u <= -1.0 || u >= 1.0) continue;
        xc = std::atanh(u);
      }
      const double ec = (xc - spec.mu[comp]) / sigma;
      if (ec > -eps_range && ec < eps_range) eps_jumps.push_back(ec);
    }
    std::sort(eps_jumps.begin(), eps_jumps.end());

    std::vector<double> cuts = {-eps_range};
    cuts.insert(cuts.end(), eps_jumps.begin(), eps_jumps.end());
    cuts.push_back(eps_range);

    double val = 0.0, d_mu = 0.0, d_ls = 0.0;
    for (size_t s = 0; s + 1 < cuts.size(); ++s) {
      const bool lo_jump = s > 0;
      const bool hi_jump = s + 2 < cuts.size();
      SegmentIntegral seg = integrate_segment(
          env, spec, comp, cuts[s], cuts[s + 1], lo_jump, hi_jump,
          max_resolution, abs_tol / static_cast<double>(cuts.size()));
      val += seg.value;
      d_mu += seg.d_mu;
      d_ls += seg.d_ls;
      res.quadrature_resolution += seg.resolution;
      res.converged = res.converged && seg.converged;
    }

    // Boundary contributions: reward jumps move with the density.
    double b_mu = 0.0, b_ls = 0.0;
    for (double ec : eps_jumps) {
      const double x_at = spec.mu[comp] + sigma * ec;
      double a_at = x_at;
      if (spec.squash) {
        const double lo = spec.bounds[0], hi = spec.bounds[1];
        a_at = 0.5 * (hi + lo) + 0.5 * (hi - lo) * std::tanh(x_at);
      }
      const double delta = 1e-9;
      const double s0[1] = {0.0};
      const double left[1] = {a_at - delta};
      const double right[1] = {a_at + delta};
      const double jump =
          env.step(s0, right, 0).reward - env.step(s0, left, 0).reward;
      const double phi = std_normal_pdf(ec);
      b_mu += phi * jump / sigma;
      b_ls += phi * jump * ec;
    }

    res.expected_reward_per_component[comp] = val;
    res.expected_reward += weights[comp] * val;
    res.true_gradient[mu_off + comp] = weights[comp] * (d_mu + b_mu);
    res.true_gradient[ls_off + comp] = weights[comp] * (d_ls + b_ls);
    res.boundary_term[mu_off + comp] = weights[comp] * b_mu;
    res.boundary_term[ls_off + comp] = weights[comp] * b_ls;
  }

  if (k > 1) {
    for (size_t j = 0; j < k; ++j) {
      res.true_gradient[logit_off + j] =
          weights[j] *
          (res.expected_reward_per_component[j] - res.expected_reward);
    }
  }
  return res;
}

BiasReport bias_report(const Env& env, const BanditPolicySpec& spec, long n,
                       uint64_t seed, const ElboConfig& cfg) {
  if (n < 1) throw std::invalid_argument("bias_report needs n >= 1");
  OracleResult oracle = oracle_grad(env, spec);
  PolicyParams params = to_policy_params(spec, env.spec());
  std::vector<size_t> map = oracle_param_indices(spec, params);
  std::vector<std::string> names = spec.param_names();

  BiasReport report;
  const EstimatorKind kinds[3] = {EstimatorKind::score, EstimatorKind::pathwise,
                                  EstimatorKind::hybrid};
  for (EstimatorKind kind : kinds) {
    Rng rng(seed ^ (static_cast<uint64_t>(kind) + 1) * 0x9e3779b9ull);
    GradEstimate acc;
    long remaining = n;
    const long chunk_size = 2000;
    while (remaining > 0) {
      const long take = std::min(chunk_size, remaining);
      std::vector<Graph> graphs(static_cast<size_t>(take));
      std::vector<Trajectory> batch;
      batch.reserve(static_cast<size_t>(take));
      for (long i = 0; i < take; ++i) {
        batch.push_back(rollout(graphs[static_cast<size_t>(i)], env, params,
                                rng, mode_for(kind)));
      }
      GradEstimate est =
          kind == EstimatorKind::score
              ? score_grad(batch, cfg, params)
              : kind == EstimatorKind::pathwise
                    ? pathwise_grad(batch, cfg, params, env)
                    : hybrid_grad(batch, cfg, params, env);
      acc = combine(acc, est);
      remaining -= take;
    }

    for (size_t j = 0; j < map.size(); ++j) {
      BiasRow row;
      row.param = names[j];
      row.estimator = to_string(kind);
      row.mean = acc.gradient[map[j]];
      row.std_error = std::sqrt(acc.per_sample_variance[map[j]] /
                                static_cast<double>(acc.sample_count));
      row.oracle = oracle.true_gradient[j];
      row.boundary = oracle.boundary_term[j];
      row.samples = acc.sample_count;
      if (row.std_error > 1e-300) {
        row.z_score = (row.mean - row.oracle) / row.std_error;
      } else {
        row.z_score = std::abs(row.mean - row.oracle) < 1e-12 ? 0.0 : 1e9;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

RegularityReport check_regularity(const std::function<double(double)>& f,
                                  double lo, double hi, long grid_points) {
  if (grid_points < 16) throw std::invalid_argument("grid too small");
  RegularityReport rep;
  const double span = hi - lo;
  const double scales[3] = {1e-2, 1e-3, 1e-4};

  for (long i = 0; i <= grid_points; ++i) {
    const double x =
        lo + span * static_cast<double>(i) / static_cast<double>(grid_points);
    rep.reward_bound = std::max(rep.reward_bound, std::abs(f(x)));
  }

  // Per-scale cell grids: a jump sits inside some cell at every scale,
  // so its cell ratio grows like 1/h while smooth cells stay put.
  double coarse_max = 0.0;
  std::vector<double> fine_delta;
  long fine_n = 0;
  for (int s = 0; s < 3; ++s) {
    const double h = scales[s];
    const long n = std::max<long>(16, std::lround(span / h));
    std::vector<double> vals(static_cast<size_t>(n) + 1);
    for (long i = 0; i <= n; ++i) {
      vals[static_cast<size_t>(i)] =
          f(lo + span * static_cast<double>(i) / static_cast<double>(n));
    }
    double max_ratio = 0.0;
    std::vector<double> deltas(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      const double d = std::abs(vals[static_cast<size_t>(i + 1)] -
                                vals[static_cast<size_t>(i)]);
      deltas[static_cast<size_t>(i)] = d;
      max_ratio = std::max(max_ratio, d / (span / static_cast<double>(n)));
    }
    rep.lipschitz_by_scale[h] = max_ratio;
    if (s == 0) coarse_max = max_ratio;
    if (s == 2) {
      fine_delta = std::move(deltas);
      fine_n = n;
    }
  }

  // Candidate cells: the finest-scale ratio dwarfs the coarse-scale
  // Lipschitz estimate and the raw jump is material.
  const double fine_h = span / static_cast<double>(fine_n);
  std::vector<char> flagged(static_cast<size_t>(fine_n), 0);
  for (long i = 0; i < fine_n; ++i) {
    const double ratio = fine_delta[static_cast<size_t>(i)] / fine_h;
    if (ratio > 10.0 * std::max(coarse_max, 1.0) &&
        fine_delta[static_cast<size_t>(i)] > 0.01) {
      flagged[static_cast<size_t>(i)] = 1;
    }
  }
  long i = 0;
  while (i < fine_n) {
    if (!flagged[static_cast<size_t>(i)]) {
      ++i;
      continue;
    }
    long best = i, j = i;
    while (j < fine_n && flagged[static_cast<size_t>(j)]) {
      if (fine_delta[static_cast<size_t>(j)] >
          fine_delta[static_cast<size_t>(best)]) {
        best = j;
      }
      ++j;
    }
    rep.jump_candidates.push_back(
        lo + fine_h * (static_cast<double>(best) + 0.5));
    i = j;
  }
  return rep;
}

RegularityReport check_regularity(const Env& env, long grid_points) {
  const EnvSpec& spec = env.spec();
  if (spec.horizon == 1 && spec.action_dim == 1) {
    const double lo = std::max(spec.action_bounds[0][0], -2.0);
    const double hi = std::min(spec.action_bounds[0][1], 2.0);
    return check_regularity(
        [&](double a) {
          const double s[1] = {0.0};
          const double act[1] = {a};
          return env.step(s, act, 0).reward;
        },
        lo, hi, grid_points);
  }
  MoveVariant variant;
  if (spec.id == "move1") {
    variant = MoveVariant::move1;
  } else if (spec.id == "move2") {
    variant = MoveVariant::move2;
  } else if (spec.id == "move3") {
    variant = MoveVariant::move3;
  } else {
    throw std::invalid_argument("regularity probe supports bandit/move envs");
  }
  // Probe the terminal landscape along axis-aligned slices.
  RegularityReport merged;
  const double slices[5] = {-0.7, -0.35, 0.0, 0.35, 0.7};
  const long per = std::max<long>(grid_points / 10, 64);
  for (double y : slices) {
    for (int axis = 0; axis < 2; ++axis) {
      RegularityReport rep = check_regularity(
          [&](double t) {
            const double s[2] = {axis == 0 ? t : y, axis == 0 ? y : t};
            return move_terminal_reward(s, variant);
          },
          -1.0, 1.0, per);
      merged.reward_bound = std::max(merged.reward_bound, rep.reward_bound);
      for (const auto& [h, v] : rep.lipschitz_by_scale) {
        merged.lipschitz_by_scale[h] =
            std::max(merged.lipschitz_by_scale[h], v);
      }
      merged.jump_candidates.insert(merged.jump_candidates.end(),
                                    rep.jump_candidates.begin(),
                                    rep.jump_candidates.end());
    }
  }
  return merged;
}

}  // namespace rpg
