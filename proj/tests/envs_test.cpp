#include "rpg/envs.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rpg/rng.hpp"
#include "support/oracles.hpp"

using namespace rpg;

TEST_CASE("bandit A plateau sits at -0.5") {
  for (double a : {0.46, 0.6, 0.9, 1.0}) {
    CHECK(bandit_a_reward(a) == doctest::Approx(-0.5));
  }
}

TEST_CASE("bandit A argmax is the left mode (dense grid search)") {
  double best_a = -1.0, best_r = -1e9;
  const long n = 100000;
  for (long i = 0; i <= n; ++i) {
    const double a = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
    const double r = bandit_a_reward(a);
    if (r > best_r) {
      best_r = r;
      best_a = a;
    }
  }
  CHECK(best_a == doctest::Approx(-0.6).epsilon(1e-3));
  CHECK(best_r == doctest::Approx(1.2).epsilon(1e-3));
}

TEST_CASE("bandit rewards stay within the piecewise bound") {
  for (long i = 0; i <= 20000; ++i) {
    const double a = -1.0 + 2.0 * static_cast<double>(i) / 20000.0;
    CHECK(std::abs(bandit_a_reward(a)) <= 1.5);
    CHECK(std::abs(bandit_b_reward(a)) <= 1.5);
  }
}

TEST_CASE("bandit B valley near zero, left mode dominant, one jump") {
  CHECK(std::abs(bandit_b_reward(0.0)) < 0.02);

  double left_peak = -1e9, right_peak = -1e9;
  for (long i = 0; i <= 100000; ++i) {
    const double a = -1.0 + 2.0 * static_cast<double>(i) / 100000.0;
    const double r = bandit_b_reward(a);
    if (a < -0.1) left_peak = std::max(left_peak, r);
    if (a > 0.1) right_peak = std::max(right_peak, r);
  }
  CHECK(left_peak > right_peak);

  // Continuity except at the declared jump coordinate.
  for (long i = 0; i < 40000; ++i) {
    const double a = -0.999 + 1.998 * static_cast<double>(i) / 40000.0;
    if (std::abs(a - kBanditBJump) < 1e-3) continue;
    const double d = std::abs(bandit_b_reward(a + 1e-7) - bandit_b_reward(a - 1e-7));
    CHECK(d < 1e-4);
  }
  const double jump = bandit_b_reward(kBanditBJump + 1e-9) -
                      bandit_b_reward(kBanditBJump - 1e-9);
  CHECK(std::abs(jump) == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("bandit rejects out-of-bounds actions") {
  CHECK_THROWS_AS(bandit_a_reward(1.2), std::invalid_argument);
  CHECK_THROWS_AS(bandit_b_reward(-1.01), std::invalid_argument);
}

TEST_CASE("move: zero action leaves the state unchanged") {
  const double s[2] = {0.2, -0.3};
  const double a[2] = {0.0, 0.0};
  auto r = move_step(s, a, move3_obstacles());
  CHECK(r.next_state[0] == doctest::Approx(0.2));
  CHECK(r.next_state[1] == doctest::Approx(-0.3));
}

TEST_CASE("move: head-on bounce mirrors the displacement") {
  ObstacleSet obs{{{{0.5, 0.0}, 0.12}}};
  // Approach along the x-axis, straight at the circle's normal.
  const double s[2] = {0.3, 0.0};
  const double a[2] = {0.12, 0.0};
  auto r = move_step(s, a, obs);
  // Contact at x = 0.38, remaining 0.04 reflected back.
  CHECK(r.next_state[0] == doctest::Approx(0.34).epsilon(1e-9));
  CHECK(r.next_state[1] == doctest::Approx(0.0));
}

TEST_CASE("move: elastic bounce preserves displacement magnitude") {
  ObstacleSet obs{{{{0.5, 0.05}, 0.12}}};
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double s[2] = {0.3 + rng.uniform(-0.02, 0.02),
                         rng.uniform(-0.08, 0.08)};
    const double a[2] = {rng.uniform(0.06, 0.12), rng.uniform(-0.05, 0.05)};
    auto straight = move_step(s, a, ObstacleSet{});
    auto bounced = move_step(s, a, obs);
    // Skip trials that neither hit nor clamp.
    const double da = std::hypot(a[0], a[1]);
    // Path length start->contact->end must equal the commanded length.
    const double seg1 = std::hypot(bounced.next_state[0] - s[0],
                                   bounced.next_state[1] - s[1]);
    if (std::abs(bounced.next_state[0] - straight.next_state[0]) < 1e-15 &&
        std::abs(bounced.next_state[1] - straight.next_state[1]) < 1e-15) {
      continue;  // no collision on this draw
    }
    // Reconstruct the contact point to measure the two legs.
    // Elastic reflection preserves speed, so leg1 + leg2 == |a|.
    const double dx = s[0] - 0.5, dy = s[1] - 0.05;
    const double a2 = a[0] * a[0] + a[1] * a[1];
    const double da_ = dx * a[0] + dy * a[1];
    const double disc = da_ * da_ - a2 * (dx * dx + dy * dy - 0.12 * 0.12);
    REQUIRE(disc > 0.0);
    const double t = (-da_ - std::sqrt(disc)) / a2;
    const double cx = s[0] + t * a[0], cy = s[1] + t * a[1];
    const double leg1 = std::hypot(cx - s[0], cy - s[1]);
    const double leg2 = std::hypot(bounced.next_state[0] - cx,
                                   bounced.next_state[1] - cy);
    CHECK(std::abs(leg1 + leg2 - da) < 1e-12);
    (void)seg1;
  }
}

TEST_CASE("move: grazing path that misses all circles is pure translation") {
  Rng rng(17);
  const ObstacleSet& obs = move3_obstacles();
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double s[2] = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, -0.2)};
    const double a[2] = {rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12)};
    // Geometric oracle: sample the segment densely for intersection.
    bool intersects = false;
    for (int k = 0; k <= 200 && !intersects; ++k) {
      const double t = static_cast<double>(k) / 200.0;
      const double px = s[0] + t * a[0], py = s[1] + t * a[1];
      for (const Circle& c : obs.circles) {
        const double d = std::hypot(px - c.center[0], py - c.center[1]);
        if (d < c.radius - 1e-9) intersects = true;
      }
    }
    if (intersects) continue;
    const double ex = std::min(std::max(s[0] + a[0], -1.0), 1.0);
    const double ey = std::min(std::max(s[1] + a[1], -1.0), 1.0);
    auto r = move_step(s, a, obs);
    CHECK(r.next_state[0] == doctest::Approx(ex).epsilon(1e-12));
    CHECK(r.next_state[1] == doctest::Approx(ey).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("move terminal reward: peak centers score their amplitude") {
  for (MoveVariant v : {MoveVariant::move1, MoveVariant::move2}) {
    for (const MovePeak& p : move_peaks(v)) {
      const double s[2] = {p.center[0], p.center[1]};
      const double r = move_terminal_reward(s, v);
      CHECK(r == doctest::Approx(p.amplitude).epsilon(1e-6));
    }
  }
}

TEST_CASE("move terminal reward: far from peaks decays to zero") {
  const double s[2] = {0.99, -0.99};
  CHECK(std::abs(move_terminal_reward(s, MoveVariant::move2)) < 1e-6);
}

TEST_CASE("move1: constant disc zeroes value and gradient") {
  const double inside[2] = {0.1, 0.2};
  CHECK(move_terminal_reward(inside, MoveVariant::move1) == 0.0);

  Graph g;
  std::vector<Value> s = {g.leaf(0.1), g.leaf(0.2)};
  Value r = move_terminal_reward(g, s, MoveVariant::move1);
  g.backward(r);
  CHECK(g.adjoint(s[0]) == 0.0);
  CHECK(g.adjoint(s[1]) == 0.0);
}

TEST_CASE("move pathwise gradients match finite differences") {
  // Two chained steps into the move2 landscape, away from clamps.
  auto value = [](const std::vector<double>& a) {
    const double s0[2] = {0.0, 0.0};
    auto r1 = move_step(s0, std::array<double, 2>{a[0], a[1]}, ObstacleSet{});
    auto r2 = move_step(r1.next_state,
                        std::array<double, 2>{a[2], a[3]}, ObstacleSet{});
    return move_terminal_reward(std::span<const double>(r2.next_state),
                                MoveVariant::move2);
  };
  std::vector<double> actions = {0.08, 0.05, -0.04, 0.1};

  Graph g;
  std::vector<Value> a;
  for (double v : actions) a.push_back(g.leaf(v));
  std::vector<Value> s = {g.constant(0.0), g.constant(0.0)};
  auto r1 = move_step(g, s, std::vector<Value>{a[0], a[1]}, ObstacleSet{});
  auto r2 = move_step(g, r1.next_state, std::vector<Value>{a[2], a[3]},
                      ObstacleSet{});
  Value r = move_terminal_reward(g, r2.next_state, MoveVariant::move2);
  g.backward(r);

  for (size_t i = 0; i < actions.size(); ++i) {
    const double numeric = testing_oracles::central_diff(value, actions, i);
    const double analytic = g.adjoint(a[i]);
    const double denom = std::max({1e-10, std::abs(numeric), std::abs(analytic)});
    CHECK(std::abs(numeric - analytic) / denom < 1e-4);
  }
}

TEST_CASE("move bounce gradient flows and matches finite differences") {
  ObstacleSet obs{{{{0.5, 0.03}, 0.12}}};
  auto value = [&](const std::vector<double>& a) {
    const double s0[2] = {0.32, 0.0};
    auto r = move_step(s0, std::array<double, 2>{a[0], a[1]}, obs);
    return r.next_state[0] + 2.0 * r.next_state[1];
  };
  std::vector<double> actions = {0.11, 0.02};

  Graph g;
  std::vector<Value> a = {g.leaf(actions[0]), g.leaf(actions[1])};
  std::vector<Value> s = {g.constant(0.32), g.constant(0.0)};
  auto r = move_step(g, s, a, obs);
  Value root = r.next_state[0] + 2.0 * r.next_state[1];
  g.backward(root);
  for (size_t i = 0; i < 2; ++i) {
    const double numeric = testing_oracles::central_diff(value, actions, i);
    const double analytic = g.adjoint(a[i]);
    CHECK(analytic ==
          doctest::Approx(numeric).epsilon(1e-4));
  }
}

TEST_CASE("maze: blocked component is unchanged, passage center crosses") {
  // Straight into the wall at x = 0.2 from the center room, off-passage.
  const double s[2] = {0.15, 0.1};
  const double a[2] = {0.1, 0.0};
  auto r = maze_step(s, a);
  CHECK(r.next_state[0] == doctest::Approx(0.15));
  CHECK(r.next_state[1] == doctest::Approx(0.1));

  // Through the passage center of the same wall: the passage midline
  // for the center row sits at y = 0.
  const double s2[2] = {0.15, 0.0};
  auto r2 = maze_step(s2, a);
  CHECK(r2.next_state[0] == doctest::Approx(0.25));
  CHECK(maze_room_index(r2.next_state[0], r2.next_state[1]) ==
        maze_room_index(0.25, 0.0));
  CHECK(maze_room_index(s2[0], s2[1]) != maze_room_index(0.25, 0.0));
}

TEST_CASE("maze: zero action does not move") {
  const double s[2] = {-0.5, 0.77};
  const double a[2] = {0.0, 0.0};
  auto r = maze_step(s, a);
  CHECK(r.next_state[0] == s[0]);
  CHECK(r.next_state[1] == s[1]);
}

TEST_CASE("maze: passage geometry oracle on random walks") {
  Rng rng(23);
  double x = 0.0, y = 0.0;
  for (int step = 0; step < 4000; ++step) {
    const double a[2] = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    const double s[2] = {x, y};
    auto r = maze_step(s, a);
    const double nx = r.next_state[0], ny = r.next_state[1];
    // Oracle: a room change is only legal through an open passage.
    const int room_before = maze_room_index(x, y);
    const int room_after = maze_room_index(nx, ny);
    if (room_before != room_after) {
      const int dx = room_after % 5 - room_before % 5;
      const int dy = room_after / 5 - room_before / 5;
      CHECK(std::abs(dx) + std::abs(dy) == 1);
      if (dx != 0) {
        const double mid = -1.0 + 0.4 * (std::floor((y + 1.0) / 0.4) + 0.5);
        CHECK(std::abs(y - mid) <= 0.04 + 1e-12);
      } else {
        const double mid = -1.0 + 0.4 * (std::floor((nx + 1.0) / 0.4) + 0.5);
        CHECK(std::abs(nx - mid) <= 0.04 + 1e-12);
      }
    }
    CHECK(std::abs(nx) <= 1.0);
    CHECK(std::abs(ny) <= 1.0);
    x = nx;
    y = ny;
  }
}

TEST_CASE("coverage counts distinct rooms") {
  std::vector<std::array<double, 2>> one_room = {{0.0, 0.0}, {0.05, -0.1}};
  CHECK(coverage(one_room) == 1);

  std::vector<std::array<double, 2>> all;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      all.push_back({-0.8 + 0.4 * i, -0.8 + 0.4 * j});
    }
  }
  CHECK(coverage(all) == 25);
}

TEST_CASE("coverage matches per-state room lookup on a random rollout") {
  Rng rng(5);
  std::vector<std::array<double, 2>> visited;
  double x = 0.0, y = 0.0;
  visited.push_back({x, y});
  for (int step = 0; step < 1000; ++step) {
    const double a[2] = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    const double s[2] = {x, y};
    auto r = maze_step(s, a);
    x = r.next_state[0];
    y = r.next_state[1];
    visited.push_back({x, y});
  }
  bool seen[25] = {};
  int expect = 0;
  for (const auto& s : visited) {
    const int room = maze_room_index(s[0], s[1]);
    if (!seen[room]) {
      seen[room] = true;
      ++expect;
    }
  }
  CHECK(coverage(visited) == expect);
}

TEST_CASE("maze: every room is reachable within the displacement budget") {
  // BFS over rooms through passages; path lengths bound the required
  // displacement, which must fit within horizon * max step.
  auto env = make_env("maze");
  const int horizon = env->spec().horizon;
  std::vector<int> dist(25, -1);
  std::vector<int> queue = {maze_room_index(0.0, 0.0)};
  dist[static_cast<size_t>(queue[0])] = 0;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const int room = queue[qi];
    const int rx = room % 5, ry = room / 5;
    const int nbr[4][2] = {{rx + 1, ry}, {rx - 1, ry}, {rx, ry + 1}, {rx, ry - 1}};
    for (auto& n : nbr) {
      if (n[0] < 0 || n[0] > 4 || n[1] < 0 || n[1] > 4) continue;
      const int id = n[1] * 5 + n[0];
      if (dist[static_cast<size_t>(id)] < 0) {
        dist[static_cast<size_t>(id)] = dist[static_cast<size_t>(room)] + 1;
        queue.push_back(id);
      }
    }
  }
  for (int room = 0; room < 25; ++room) {
    REQUIRE(dist[static_cast<size_t>(room)] >= 0);
    // Each hop needs at most ~2 room diameters of displacement.
    const double needed = (dist[static_cast<size_t>(room)] + 1) * 2.0 * 0.4;
    CHECK(needed < horizon * kMazeActionMax);
  }
}

TEST_CASE("env registry serves the documented ids") {
  for (const char* id : {"bandit_a", "bandit_b", "move1", "move2", "move3",
                         "maze", "linear_bandit", "step_bandit",
                         "smooth_bandit"}) {
    auto env = make_env(id);
    CHECK(env->spec().id == id);
    CHECK(env->spec().horizon >= 1);
  }
  CHECK_THROWS_AS(make_env("nope"), std::invalid_argument);
}

TEST_CASE("declared jumps match the landscapes") {
  auto a = make_env("bandit_a");
  REQUIRE(a->reward_jumps().size() == 1);
  CHECK(a->reward_jumps()[0] == doctest::Approx(0.45));
  auto b = make_env("bandit_b");
  REQUIRE(b->reward_jumps().size() == 1);
  CHECK(b->reward_jumps()[0] == doctest::Approx(-0.85));
}
