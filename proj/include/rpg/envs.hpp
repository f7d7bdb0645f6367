#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rpg/graph.hpp"

namespace rpg {

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 1;
  std::vector<std::array<double, 2>> action_bounds;  // per-dim {lo, hi}
  bool discontinuous = false;
  bool differentiable = true;
};

struct StepResultV {
  std::vector<Value> next_state;
  Value reward;
  bool done = false;
};

struct StepResultD {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

struct Circle {
  std::array<double, 2> center;
  double radius;
};

struct ObstacleSet {
  std::vector<Circle> circles;
};

// Deterministic differentiable toy environment. Stateless: step is a
// pure function of (state, action, step index), safe to evaluate
// concurrently.
class Env {
public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> initial_state() const = 0;
  virtual StepResultD step(std::span<const double> state,
                           std::span<const double> action, int t) const = 0;
  virtual StepResultV step(Graph& g, std::span<const Value> state,
                           std::span<const Value> action, int t) const = 0;
  // Action-space reward jump coordinates (1-step landscapes only).
  virtual std::vector<double> reward_jumps() const { return {}; }
};

// ids: bandit_a, bandit_b, move1, move2, move3, maze, plus the
// diagnostic landscapes linear_bandit, step_bandit, smooth_bandit.
std::unique_ptr<Env> make_env(const std::string& id);
bool env_id_known(const std::string& id);

// Bandit landscapes on [-1, 1]. Bandit A drops onto a -0.5 plateau
// right of the local mode; bandit B keeps both modes smooth except for
// one interior jump on the far left.
double bandit_a_reward(double a);
Value bandit_a_reward(Value a);
double bandit_b_reward(double a);
Value bandit_b_reward(Value a);

inline constexpr double kBanditAJump = 0.45;
inline constexpr double kBanditBJump = -0.85;
inline constexpr double kStepBanditJump = 0.3;

// One elastic reflection per step, then clamp to the unit square.
StepResultD move_step(std::span<const double> state,
                      std::span<const double> action,
                      const ObstacleSet& obstacles);
StepResultV move_step(Graph& g, std::span<const Value> state,
                      std::span<const Value> action,
                      const ObstacleSet& obstacles);

enum class MoveVariant { move1, move2, move3 };

double move_terminal_reward(std::span<const double> state, MoveVariant v);
Value move_terminal_reward(Graph& g, std::span<const Value> state,
                           MoveVariant v);

const ObstacleSet& move3_obstacles();

// Move arena constants.
inline constexpr double kMoveActionMax = 0.12;
inline constexpr int kMoveHorizon = 20;
inline constexpr double kMovePeakStd = 0.08;
inline constexpr double kMove1ConstantDiscRadius = 0.3;

struct MovePeak {
  std::array<double, 2> center;
  double amplitude;
};
std::span<const MovePeak> move_peaks(MoveVariant v);

// 5x5 room maze: rooms of side 0.4, narrow passages between
// neighbors, agent starts in the center room. Blocked motion leaves
// the blocked component unchanged.
StepResultD maze_step(std::span<const double> state,
                      std::span<const double> action);

inline constexpr double kMazeRoomSide = 0.4;
inline constexpr double kMazePassageWidth = 0.08;
inline constexpr double kMazeActionMax = 0.1;
inline constexpr int kMazeRooms = 25;

// Room index in [0, 25) for a position in the arena.
int maze_room_index(double x, double y);
// Number of distinct rooms touched by the visited states.
int coverage(std::span<const std::array<double, 2>> visited);

}  // namespace rpg
