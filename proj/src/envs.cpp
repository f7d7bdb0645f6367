#include "rpg/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

namespace {

// Scalar shims so the landscape math can be written once for doubles
// and graph values.
inline double num(double x) { return x; }
inline double num(Value v) { return v.val(); }
inline double shim_exp(double x) { return std::exp(x); }
inline Value shim_exp(Value x) { return exp(x); }
inline double shim_clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}
inline Value shim_clamp(Value x, double lo, double hi) {
  return clamp(x, lo, hi);
}
// Reciprocal and square root for strictly positive arguments, built
// from the elementary op set.
inline double recip_pos(double x) { return 1.0 / x; }
inline Value recip_pos(Value x) { return exp(-log(x)); }
inline double sqrt_pos(double x) { return std::sqrt(x); }
inline Value sqrt_pos(Value x) { return exp(0.5 * log(x)); }

inline double square_of(double x) { return x * x; }
inline Value square_of(Value x) { return square(x); }

template <class T>
T bandit_base(T a) {
  T left = 1.2 * shim_exp(-100.0 * square_of(a + 0.6));
  T right = 0.8 * shim_exp(-50.0 * square_of(a - 0.3));
  return left + right;
}

template <class T>
void check_bandit_action(T a) {
  if (num(a) < -1.0 || num(a) > 1.0) {
    throw std::invalid_argument("bandit action outside [-1, 1]");
  }
}

template <class T, class Const>
T bandit_a_impl(T a, Const constant) {
  check_bandit_action(a);
  if (num(a) > kBanditAJump) return constant(-0.5);
  return bandit_base(a);
}

template <class T, class Const>
T bandit_b_impl(T a, Const constant) {
  check_bandit_action(a);
  T base = bandit_base(a);
  if (num(a) < kBanditBJump) return base - 0.6;
  return base;
}

template <class T>
std::array<T, 2> move_step_core(std::span<const T> state,
                                std::span<const T> action,
                                const ObstacleSet& obstacles) {
  for (const T& ad : action) {
    if (std::abs(num(ad)) > kMoveActionMax + 1e-12) {
      throw std::invalid_argument("move action exceeds per-dimension bound");
    }
  }
  T px = state[0], py = state[1];
  T ax = action[0], ay = action[1];
  const double a2 = num(ax) * num(ax) + num(ay) * num(ay);
  std::array<T, 2> end = {px + ax, py + ay};

  if (a2 > 1e-16) {
    // First circle hit along the segment, if any. Step length stays
    // below the obstacle radius so at most one bounce can occur.
    double best_t = 2.0;
    const Circle* hit = nullptr;
    for (const Circle& c : obstacles.circles) {
      const double dx = num(px) - c.center[0];
      const double dy = num(py) - c.center[1];
      const double d2 = dx * dx + dy * dy;
      if (d2 < c.radius * c.radius) continue;  // already inside; no bounce
      const double da = dx * num(ax) + dy * num(ay);
      const double disc = da * da - a2 * (d2 - c.radius * c.radius);
      if (disc <= 0.0) continue;
      const double t = (-da - std::sqrt(disc)) / a2;
      if (t >= 0.0 && t <= 1.0 && t < best_t) {
        best_t = t;
        hit = &c;
      }
    }
    if (hit != nullptr) {
      // Contact time from the same quadratic, in graph arithmetic so
      // the bounce stays differentiable.
      T dx = px - hit->center[0];
      T dy = py - hit->center[1];
      T da = dx * ax + dy * ay;
      T aa = ax * ax + ay * ay;
      T disc = da * da - aa * (dx * dx + dy * dy - hit->radius * hit->radius);
      T t = (-da - sqrt_pos(disc)) * recip_pos(aa);
      T cx = px + t * ax;
      T cy = py + t * ay;
      T nx = (cx - hit->center[0]) * (1.0 / hit->radius);
      T ny = (cy - hit->center[1]) * (1.0 / hit->radius);
      T rest_x = (1.0 - t) * ax;
      T rest_y = (1.0 - t) * ay;
      T dot = rest_x * nx + rest_y * ny;
      end[0] = cx + rest_x - 2.0 * dot * nx;
      end[1] = cy + rest_y - 2.0 * dot * ny;
    }
  }
  end[0] = shim_clamp(end[0], -1.0, 1.0);
  end[1] = shim_clamp(end[1], -1.0, 1.0);
  return end;
}

// The global peak sits farther from the start than the three side
// modes, so nothing near the initialization points toward it.
constexpr std::array<MovePeak, 4> kMove1Peaks = {{
    {{0.0, 0.8}, 1.0},
    {{-0.55, 0.0}, 0.7},
    {{0.55, 0.0}, 0.65},
    {{0.0, -0.55}, 0.6},
}};
constexpr std::array<MovePeak, 4> kMove2Peaks = {{
    {{0.0, 0.8}, 1.0},
    {{-0.55, 0.0}, 0.8},
    {{0.55, 0.0}, 0.7},
    {{0.0, -0.55}, 0.6},
}};
// The global peak hides inside the obstacle cluster's far circle, so
// pushing straight at it wedges the agent in the dent between the
// circles at a much lower reward than approaching from behind.
constexpr std::array<MovePeak, 4> kMove3Peaks = {{
    {{0.0, 0.55}, 1.2},
    {{-0.7, 0.0}, 0.5},
    {{0.7, 0.0}, 0.5},
    {{0.0, -0.7}, 0.5},
}};

template <class T>
T bump(std::span<const T> state, const MovePeak& p) {
  const double inv_two_var = 1.0 / (2.0 * kMovePeakStd * kMovePeakStd);
  T dx = state[0] - p.center[0];
  T dy = state[1] - p.center[1];
  return p.amplitude * shim_exp(-inv_two_var * (dx * dx + dy * dy));
}

template <class T>
T move_reward_core(std::span<const T> state, MoveVariant v) {
  std::span<const MovePeak> peaks = move_peaks(v);
  T acc = bump(state, peaks[0]);
  for (size_t i = 1; i < peaks.size(); ++i) acc = acc + bump(state, peaks[i]);
  return acc;
}

// Interior wall lines of the 5x5 maze.
constexpr std::array<double, 4> kMazeWalls = {-0.6, -0.2, 0.2, 0.6};

int maze_band(double v) {
  int band = static_cast<int>(std::floor((v + 1.0) / kMazeRoomSide));
  return std::min(std::max(band, 0), 4);
}

// True when a move across wall line `w` is allowed at cross position
// `other` (the coordinate along the wall).
bool maze_passage_open(double other) {
  const double mid = -1.0 + kMazeRoomSide * (maze_band(other) + 0.5);
  return std::abs(other - mid) <= kMazePassageWidth / 2.0;
}

double maze_axis_move(double from, double to, double other) {
  for (double w : kMazeWalls) {
    const bool crosses = (from < w && to > w) || (from > w && to < w);
    if (crosses && !maze_passage_open(other)) return from;
  }
  return std::min(std::max(to, -1.0), 1.0);
}

class BanditEnv : public Env {
public:
  enum class Kind { a, b, linear, step, smooth };

  explicit BanditEnv(Kind kind) : kind_(kind) {
    spec_.state_dim = 1;
    spec_.action_dim = 1;
    spec_.horizon = 1;
    spec_.differentiable = true;
    switch (kind_) {
      case Kind::a:
        spec_.id = "bandit_a";
        spec_.discontinuous = true;
        spec_.action_bounds = {{-1.0, 1.0}};
        break;
      case Kind::b:
        spec_.id = "bandit_b";
        spec_.discontinuous = true;
        spec_.action_bounds = {{-1.0, 1.0}};
        break;
      case Kind::linear:
        spec_.id = "linear_bandit";
        spec_.action_bounds = {{-1e9, 1e9}};
        break;
      case Kind::step:
        spec_.id = "step_bandit";
        spec_.discontinuous = true;
        spec_.action_bounds = {{-1e9, 1e9}};
        break;
      case Kind::smooth:
        spec_.id = "smooth_bandit";
        spec_.action_bounds = {{-1e9, 1e9}};
        break;
    }
  }

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override { return {0.0}; }

  StepResultD step(std::span<const double> state,
                   std::span<const double> action, int) const override {
    (void)state;
    return {{0.0}, reward(action[0]), true};
  }

  StepResultV step(Graph& g, std::span<const Value> state,
                   std::span<const Value> action, int) const override {
    (void)state;
    return {{g.constant(0.0)}, reward(g, action[0]), true};
  }

  std::vector<double> reward_jumps() const override {
    switch (kind_) {
      case Kind::a: return {kBanditAJump};
      case Kind::b: return {kBanditBJump};
      case Kind::step: return {kStepBanditJump};
      default: return {};
    }
  }

private:
  double reward(double a) const {
    switch (kind_) {
      case Kind::a: return bandit_a_reward(a);
      case Kind::b: return bandit_b_reward(a);
      case Kind::linear: return a;
      case Kind::step: return a < kStepBanditJump ? 1.0 : 0.0;
      case Kind::smooth: return std::exp(-2.0 * (a - 0.25) * (a - 0.25));
    }
    return 0.0;
  }

  Value reward(Graph& g, Value a) const {
    switch (kind_) {
      case Kind::a: return bandit_a_reward(a);
      case Kind::b: return bandit_b_reward(a);
      case Kind::linear: return a + 0.0;
      case Kind::step: return g.constant(a.val() < kStepBanditJump ? 1.0 : 0.0);
      case Kind::smooth: return exp(-2.0 * square(a - 0.25));
    }
    return g.constant(0.0);
  }

  Kind kind_;
  EnvSpec spec_;
};

class MoveEnv : public Env {
public:
  explicit MoveEnv(MoveVariant v) : variant_(v) {
    spec_.id = v == MoveVariant::move1 ? "move1"
               : v == MoveVariant::move2 ? "move2"
                                         : "move3";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.horizon = kMoveHorizon;
    spec_.action_bounds = {{-kMoveActionMax, kMoveActionMax},
                           {-kMoveActionMax, kMoveActionMax}};
    spec_.differentiable = true;
    spec_.discontinuous = v != MoveVariant::move2;
  }

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override { return {0.0, 0.0}; }

  StepResultD step(std::span<const double> state,
                   std::span<const double> action, int t) const override {
    StepResultD r = move_step(state, action, obstacles());
    r.done = t + 1 >= spec_.horizon;
    if (r.done) r.reward = move_terminal_reward(r.next_state, variant_);
    return r;
  }

  StepResultV step(Graph& g, std::span<const Value> state,
                   std::span<const Value> action, int t) const override {
    StepResultV r = move_step(g, state, action, obstacles());
    r.done = t + 1 >= spec_.horizon;
    if (r.done) r.reward = move_terminal_reward(g, r.next_state, variant_);
    return r;
  }

private:
  const ObstacleSet& obstacles() const {
    static const ObstacleSet empty;
    return variant_ == MoveVariant::move3 ? move3_obstacles() : empty;
  }

  MoveVariant variant_;
  EnvSpec spec_;
};

class MazeEnv : public Env {
public:
  MazeEnv() {
    spec_.id = "maze";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.horizon = 200;
    spec_.action_bounds = {{-kMazeActionMax, kMazeActionMax},
                           {-kMazeActionMax, kMazeActionMax}};
    spec_.differentiable = false;
    spec_.discontinuous = true;
  }

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override { return {0.0, 0.0}; }

  StepResultD step(std::span<const double> state,
                   std::span<const double> action, int t) const override {
    StepResultD r = maze_step(state, action);
    r.done = t + 1 >= spec_.horizon;
    return r;
  }

  StepResultV step(Graph& g, std::span<const Value> state,
                   std::span<const Value> action, int t) const override {
    // Wall clipping is not differentiable; gradients do not flow here.
    const double s[2] = {state[0].val(), state[1].val()};
    const double a[2] = {action[0].val(), action[1].val()};
    StepResultD r = maze_step(s, a);
    r.done = t + 1 >= spec_.horizon;
    return {{g.constant(r.next_state[0]), g.constant(r.next_state[1])},
            g.constant(r.reward),
            r.done};
  }

private:
  EnvSpec spec_;
};

}  // namespace

double bandit_a_reward(double a) {
  return bandit_a_impl(a, [](double c) { return c; });
}
Value bandit_a_reward(Value a) {
  return bandit_a_impl(a, [g = a.g](double c) { return g->constant(c); });
}
double bandit_b_reward(double a) {
  return bandit_b_impl(a, [](double c) { return c; });
}
Value bandit_b_reward(Value a) {
  return bandit_b_impl(a, [g = a.g](double c) { return g->constant(c); });
}

StepResultD move_step(std::span<const double> state,
                      std::span<const double> action,
                      const ObstacleSet& obstacles) {
  auto end = move_step_core(state, action, obstacles);
  return {{end[0], end[1]}, 0.0, false};
}

StepResultV move_step(Graph& g, std::span<const Value> state,
                      std::span<const Value> action,
                      const ObstacleSet& obstacles) {
  auto end = move_step_core(state, action, obstacles);
  return {{end[0], end[1]}, g.constant(0.0), false};
}

std::span<const MovePeak> move_peaks(MoveVariant v) {
  switch (v) {
    case MoveVariant::move1: return kMove1Peaks;
    case MoveVariant::move2: return kMove2Peaks;
    case MoveVariant::move3: return kMove3Peaks;
  }
  return kMove1Peaks;
}

double move_terminal_reward(std::span<const double> state, MoveVariant v) {
  if (v == MoveVariant::move1) {
    const double r2 = state[0] * state[0] + state[1] * state[1];
    if (r2 <= kMove1ConstantDiscRadius * kMove1ConstantDiscRadius) return 0.0;
  }
  return move_reward_core(state, v);
}

Value move_terminal_reward(Graph& g, std::span<const Value> state,
                           MoveVariant v) {
  if (v == MoveVariant::move1) {
    const double x = state[0].val(), y = state[1].val();
    if (x * x + y * y <= kMove1ConstantDiscRadius * kMove1ConstantDiscRadius) {
      return g.constant(0.0);
    }
  }
  return move_reward_core(state, v);
}

const ObstacleSet& move3_obstacles() {
  static const ObstacleSet set{{
      {{-0.135, 0.30}, 0.12},
      {{0.135, 0.30}, 0.12},
      {{0.0, 0.50}, 0.12},
  }};
  return set;
}

StepResultD maze_step(std::span<const double> state,
                      std::span<const double> action) {
  for (double a : action) {
    if (std::abs(a) > kMazeActionMax + 1e-12) {
      throw std::invalid_argument("maze action exceeds per-dimension bound");
    }
  }
  const double x = state[0], y = state[1];
  const double nx = maze_axis_move(x, x + action[0], y);
  const double ny = maze_axis_move(y, y + action[1], nx);
  return {{nx, ny}, 0.0, false};
}

int maze_room_index(double x, double y) {
  return maze_band(y) * 5 + maze_band(x);
}

int coverage(std::span<const std::array<double, 2>> visited) {
  bool seen[kMazeRooms] = {};
  int count = 0;
  for (const auto& s : visited) {
    const int r = maze_room_index(s[0], s[1]);
    if (!seen[r]) {
      seen[r] = true;
      ++count;
    }
  }
  return count;
}

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "bandit_a") return std::make_unique<BanditEnv>(BanditEnv::Kind::a);
  if (id == "bandit_b") return std::make_unique<BanditEnv>(BanditEnv::Kind::b);
  if (id == "linear_bandit") {
    return std::make_unique<BanditEnv>(BanditEnv::Kind::linear);
  }
  if (id == "step_bandit") {
    return std::make_unique<BanditEnv>(BanditEnv::Kind::step);
  }
  if (id == "smooth_bandit") {
    return std::make_unique<BanditEnv>(BanditEnv::Kind::smooth);
  }
  if (id == "move1") return std::make_unique<MoveEnv>(MoveVariant::move1);
  if (id == "move2") return std::make_unique<MoveEnv>(MoveVariant::move2);
  if (id == "move3") return std::make_unique<MoveEnv>(MoveVariant::move3);
  if (id == "maze") return std::make_unique<MazeEnv>();
  throw std::invalid_argument("unknown env id: " + id);
}

bool env_id_known(const std::string& id) {
  static const char* ids[] = {"bandit_a", "bandit_b",     "linear_bandit",
                              "step_bandit", "smooth_bandit", "move1",
                              "move2",    "move3",        "maze"};
  for (const char* s : ids) {
    if (id == s) return true;
  }
  return false;
}

}  // namespace rpg
