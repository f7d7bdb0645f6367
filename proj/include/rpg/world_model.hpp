#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpg/elbo.hpp"
#include "rpg/nets.hpp"
#include "rpg/policy.hpp"
#include "rpg/rng.hpp"

namespace rpg {

// Single gated recurrent cell; the latent state is the hidden state.
class GruCell {
public:
  GruCell() = default;
  GruCell(size_t input_dim, size_t hidden_dim, Rng& rng);

  size_t input_dim() const { return in_; }
  size_t hidden_dim() const { return hidden_; }
  size_t param_count() const;

  std::vector<double> forward(std::span<const double> x,
                              std::span<const double> h) const;

  struct Binding {
    DenseNet::Binding update, reset, candidate;
  };
  Binding bind(Graph& g) const;
  std::vector<Value> apply(Graph& g, const Binding& bind,
                           std::span<const Value> x,
                           std::span<const Value> h) const;

  void copy_params_to(std::span<double> out) const;
  void set_params(std::span<const double> in);
  void accumulate_adjoints(const Binding& bind, const Graph& g,
                           std::span<double> grad) const;

private:
  size_t in_ = 0, hidden_ = 0;
  DenseNet update_, reset_, candidate_;  // single linear layers on (x, h)
};

struct WorldModelConfig {
  int obs_dim = 0;
  int action_dim = 0;
  int z_embed_dim = 0;
  int state_dim = 100;  // latent state embedding width
  std::vector<size_t> hidden = {64};
  bool gru_dynamics = true;
  double gamma = 0.99;
  double polyak = 0.005;
};

// Observation encoder, dynamics, reward predictor and double Q heads
// with Polyak-averaged targets.
struct WorldModelParams {
  WorldModelConfig cfg;
  DenseNet encoder;       // obs -> state
  GruCell dynamics_gru;   // (a; s) -> s'
  DenseNet dynamics_mlp;  // (s, a) -> s'  fallback for one-step toys
  DenseNet reward_head;   // (s, a) -> r
  DenseNet q1, q2;        // (s, a, z) -> q
  DenseNet q1_target, q2_target;

  std::vector<double> encode(std::span<const double> obs) const;
  std::vector<double> dynamics(std::span<const double> s,
                               std::span<const double> a) const;
  double reward(std::span<const double> s, std::span<const double> a) const;
  double q_min(std::span<const double> s, std::span<const double> a,
               std::span<const double> z, bool target) const;

  void polyak_update();

  // Flat layout: encoder, dynamics, reward, q1, q2 (targets excluded).
  size_t param_count() const;
  void copy_params_to(std::span<double> out) const;
  void set_params(std::span<const double> in);
};

WorldModelParams make_world_model(const WorldModelConfig& cfg, Rng& rng);

struct WmBindings {
  DenseNet::Binding encoder;
  GruCell::Binding gru;
  DenseNet::Binding dyn_mlp;
  DenseNet::Binding reward;
  DenseNet::Binding q1, q2;
};
WmBindings bind_world_model(Graph& g, const WorldModelParams& wm);
void accumulate_wm_adjoints(const WorldModelParams& wm, const WmBindings& b,
                            const Graph& g, std::span<double> grad);

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward_ext = 0.0;
  double reward_int = 0.0;
  std::vector<double> next_obs;
  std::vector<double> z;  // latent embedding active at this step
  long episode = 0;
  int step = 0;
  bool done = false;
};

// FIFO ring; sampled segments are contiguous and never straddle an
// episode boundary.
class ReplayBuffer {
public:
  explicit ReplayBuffer(size_t capacity = 800000);

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }

  const Transition& at(size_t i) const { return data_[i]; }
  Transition& at_mut(size_t i) { return data_[i]; }
  const Transition& sample_one(Rng& rng) const;
  // Indices of `len` consecutive same-episode transitions.
  std::vector<size_t> sample_segment(Rng& rng, int len) const;

private:
  size_t capacity_;
  std::deque<Transition> data_;
};

// {sin(2^i x), cos(2^i x)} for i = 1..levels per scalar.
std::vector<double> positional_encode(std::span<const double> x, int levels);

// Object-centric randomized network distillation: prediction error of
// a trained net against a frozen random net over positionally encoded
// coordinates, normalized by running statistics.
struct RndEstimator {
  DenseNet target;     // frozen
  DenseNet predictor;  // trained
  int levels = 6;
  double coef = 0.1;
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  double raw_error(std::span<const double> obs) const;
  void observe(double raw);
  double running_std() const;
  // coef * (raw - mean)/std under the running statistics.
  double normalized_bonus(double raw) const;
  double intrinsic(std::span<const double> obs) const;
};

RndEstimator make_rnd(int obs_dim, int levels, int out_dim,
                      std::span<const size_t> hidden, double coef, Rng& rng);

struct ValueEstimateInputs {
  const PolicyParams* policy = nullptr;
  const EncoderParams* encoder = nullptr;  // optional consistency term
  double alpha = 0.0;
  double beta = 0.0;
  double temperature = 1.0;
  double gamma = 0.99;
  int k = 3;  // model rollout horizon
  bool use_target_q = false;
};

// gamma^K (Q_K + r'_K) + sum_{t<K} gamma^t (r_t + r'_t), rolled out in
// the learned model with actions sampled from the policy.
Value value_estimate(Graph& g, std::span<const double> obs,
                     std::span<const double> z_embed,
                     const WorldModelParams& wm, const WmBindings& wb,
                     const PolicyBindings& pb,
                     const DenseNet::Binding* enc_binding,
                     const ValueEstimateInputs& in, Rng& rng,
                     std::vector<Value>* action_log_densities = nullptr);

// Double-path value estimate for stop-gradient targets.
double value_estimate_d(std::span<const double> obs,
                        std::span<const double> z_embed,
                        const WorldModelParams& wm,
                        const ValueEstimateInputs& in, Rng& rng);

struct ModelLossWeights {
  double state = 1000.0;
  double reward = 0.5;
  double q = 0.5;
};

// Eq-style consistency loss over one sampled segment; targets wrapped
// in stop-gradients are computed on the double path.
Value model_loss(Graph& g, const ReplayBuffer& buffer,
                 std::span<const size_t> segment, const WorldModelParams& wm,
                 const WmBindings& wb, const ValueEstimateInputs& in, Rng& rng,
                 const ModelLossWeights& w = ModelLossWeights());

// Replaces each transition's intrinsic component using the present
// predictor, leaving the extrinsic reward untouched.
void relabel_intrinsic(ReplayBuffer& buffer, std::span<const size_t> segment,
                       const RndEstimator& rnd);
double relabeled_reward(const Transition& t);

}  // namespace rpg
