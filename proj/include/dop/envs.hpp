#pragma once

// 4x4 grid environments: a 3-robot cooperative navigation task and a
// single-agent gridworld small enough for exact oracles (BFS distances,
// value iteration).

#include <algorithm>
#include <array>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dop/mdp.hpp"

namespace dop {

inline constexpr int kGridSide = 4;
inline constexpr int kGridCells = kGridSide * kGridSide;
// Primitive actions, in index order.
enum Primitive { kNoop = 0, kUp = 1, kDown = 2, kRight = 3, kLeft = 4 };
inline constexpr int kPrimitiveCount = 5;

struct Cell {
  int row = 0;
  int col = 0;
};

inline bool operator==(Cell a, Cell b) { return a.row == b.row && a.col == b.col; }
inline bool operator!=(Cell a, Cell b) { return !(a == b); }

inline bool on_grid(Cell c) {
  return c.row >= 0 && c.row < kGridSide && c.col >= 0 && c.col < kGridSide;
}

// Raw displacement; may leave the grid. Callers decide whether to clamp.
inline Cell raw_move(Cell c, int primitive) {
  switch (primitive) {
    case kNoop: return c;
    case kUp: return {c.row - 1, c.col};
    case kDown: return {c.row + 1, c.col};
    case kRight: return {c.row, c.col + 1};
    case kLeft: return {c.row, c.col - 1};
    default: throw std::invalid_argument("raw_move: bad primitive");
  }
}

// Shortest path length on the empty 4-connected grid.
inline int bfs_shortest_path(Cell from, Cell to) {
  if (!on_grid(from) || !on_grid(to)) throw std::invalid_argument("bfs_shortest_path: off-grid cell");
  if (from == to) return 0;
  std::array<int, kGridCells> dist;
  dist.fill(-1);
  auto idx = [](Cell c) { return c.row * kGridSide + c.col; };
  std::deque<Cell> frontier{from};
  dist[idx(from)] = 0;
  while (!frontier.empty()) {
    Cell c = frontier.front();
    frontier.pop_front();
    for (int p = kUp; p <= kLeft; ++p) {
      Cell n = raw_move(c, p);
      if (!on_grid(n) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      if (n == to) return dist[idx(n)];
      frontier.push_back(n);
    }
  }
  throw std::logic_error("bfs_shortest_path: unreachable");  // empty grid is connected
}

// Three robots on a 4x4 grid, one fixed target each. All robots move
// simultaneously; conflicting moves are blocked (movers stay put). The task
// is terminal exactly when every robot sits on its own target, and the reward
// of a state is 1 - (sum of BFS distances to targets) / 18, clamped to [0,1].
class CoopNavEnv : public Environment {
 public:
  static constexpr int kRobots = 3;
  static constexpr int kJointActions = 125;  // 5^3
  static constexpr double kDistanceScale = 18.0;

  struct Options {
    std::array<Cell, kRobots> targets{{{0, 3}, {3, 0}, {3, 3}}};
    bool randomize_targets = false;
  };

  CoopNavEnv() : CoopNavEnv(Options{}) {}
  explicit CoopNavEnv(Options opt) : opt_(opt) {
    for (int j = 0; j < kRobots; ++j) {
      if (!on_grid(opt_.targets[j])) throw std::invalid_argument("CoopNavEnv: target off grid");
      for (int k = j + 1; k < kRobots; ++k)
        if (opt_.targets[j] == opt_.targets[k])
          throw std::invalid_argument("CoopNavEnv: targets must be distinct");
    }
  }

  int action_count() const override { return kJointActions; }
  // Six 4x4 binary channels: robot 0..2 positions, then target 0..2 cells.
  int encoding_size() const override { return 2 * kRobots * kGridCells; }

  // Joint action index = a0*25 + a1*5 + a2.
  static std::array<int, kRobots> split_action(ActionId a) {
    return {a / 25, (a / 5) % 5, a % 5};
  }
  static ActionId join_action(const std::array<int, kRobots>& prim) {
    return prim[0] * 25 + prim[1] * 5 + prim[2];
  }

  StateId make_state(const std::array<Cell, kRobots>& robots,
                     const std::array<Cell, kRobots>& targets) const {
    std::vector<double> enc(encoding_size(), 0.0);
    std::string key(4 * kRobots, '0');
    for (int j = 0; j < kRobots; ++j) {
      enc[j * kGridCells + robots[j].row * kGridSide + robots[j].col] = 1.0;
      enc[(kRobots + j) * kGridCells + targets[j].row * kGridSide + targets[j].col] = 1.0;
      key[2 * j] = static_cast<char>('0' + robots[j].row);
      key[2 * j + 1] = static_cast<char>('0' + robots[j].col);
      key[2 * (kRobots + j)] = static_cast<char>('0' + targets[j].row);
      key[2 * (kRobots + j) + 1] = static_cast<char>('0' + targets[j].col);
    }
    return StateId{std::move(enc), std::move(key)};
  }

  static std::array<Cell, kRobots> robots_of(const StateId& s) { return decode_channels(s, 0); }
  static std::array<Cell, kRobots> targets_of(const StateId& s) { return decode_channels(s, kRobots); }

  // Uniform over non-overlapping robot placements that are not yet terminal.
  StateId initial_state(RandomSource& rng) const override {
    std::array<Cell, kRobots> targets = opt_.targets;
    if (opt_.randomize_targets) targets = draw_distinct_cells(rng);
    while (true) {
      std::array<Cell, kRobots> robots = draw_distinct_cells(rng);
      bool done = true;
      for (int j = 0; j < kRobots; ++j) done = done && robots[j] == targets[j];
      if (!done) return make_state(robots, targets);
    }
  }

  StepOutcome step(const StateId& s, ActionId a, RandomSource&) const override {
    if (a < 0 || a >= kJointActions) throw std::invalid_argument("CoopNavEnv::step: bad action");
    auto robots = robots_of(s);
    auto targets = targets_of(s);
    auto prim = split_action(a);

    // Desired cells; off-grid moves are already stays.
    std::array<Cell, kRobots> desired;
    for (int j = 0; j < kRobots; ++j) {
      Cell d = raw_move(robots[j], prim[j]);
      desired[j] = on_grid(d) ? d : robots[j];
    }

    std::array<bool, kRobots> blocked{};
    for (int j = 0; j < kRobots; ++j) {
      for (int k = j + 1; k < kRobots; ++k) {
        // Two robots aiming at the same cell block each other (a no-op for a
        // stationary one, which also covers moving onto a robot that stays).
        if (desired[j] == desired[k]) blocked[j] = blocked[k] = true;
        // Swapping positions is a conflict as well.
        if (desired[j] == robots[k] && desired[k] == robots[j]) blocked[j] = blocked[k] = true;
      }
    }
    // A blocked robot keeps occupying its cell, which can block others in
    // turn; iterate to the fixed point. The rules are symmetric, so the
    // result does not depend on robot order.
    bool changed = true;
    while (changed) {
      changed = false;
      for (int j = 0; j < kRobots; ++j) {
        if (blocked[j] || desired[j] == robots[j]) continue;
        for (int k = 0; k < kRobots; ++k) {
          if (k == j) continue;
          bool k_stays = blocked[k] || desired[k] == robots[k];
          if (k_stays && desired[j] == robots[k]) {
            blocked[j] = true;
            changed = true;
            break;
          }
        }
      }
    }

    std::array<Cell, kRobots> moved;
    for (int j = 0; j < kRobots; ++j) moved[j] = blocked[j] ? robots[j] : desired[j];

    StateId next = make_state(moved, targets);
    return StepOutcome{std::move(next), reward_of_cells(moved, targets), all_on_targets(moved, targets)};
  }

  double reward_of(const StateId& s) const override {
    return reward_of_cells(robots_of(s), targets_of(s));
  }

  bool terminal(const StateId& s) const override {
    return all_on_targets(robots_of(s), targets_of(s));
  }

  // All 16*15*14 distinct placements against the configured targets.
  // Only meaningful with fixed targets; used by exhaustive checks.
  std::vector<StateId> enumerate_states() const {
    if (opt_.randomize_targets)
      throw std::logic_error("CoopNavEnv::enumerate_states: targets are randomized");
    std::vector<StateId> out;
    out.reserve(kGridCells * (kGridCells - 1) * (kGridCells - 2));
    for (int i0 = 0; i0 < kGridCells; ++i0)
      for (int i1 = 0; i1 < kGridCells; ++i1)
        for (int i2 = 0; i2 < kGridCells; ++i2) {
          if (i0 == i1 || i0 == i2 || i1 == i2) continue;
          std::array<Cell, kRobots> robots{{{i0 / 4, i0 % 4}, {i1 / 4, i1 % 4}, {i2 / 4, i2 % 4}}};
          out.push_back(make_state(robots, opt_.targets));
        }
    return out;
  }

  const Options& options() const { return opt_; }

 private:
  static std::array<Cell, kRobots> decode_channels(const StateId& s, int first_channel) {
    if (s.encoding.size() != static_cast<std::size_t>(2 * kRobots * kGridCells))
      throw std::invalid_argument("CoopNavEnv: encoding size mismatch");
    std::array<Cell, kRobots> cells;
    for (int j = 0; j < kRobots; ++j) {
      int base = (first_channel + j) * kGridCells;
      int found = -1;
      for (int i = 0; i < kGridCells; ++i)
        if (s.encoding[base + i] != 0.0) {
          found = i;
          break;
        }
      if (found < 0) throw std::invalid_argument("CoopNavEnv: empty channel in encoding");
      cells[j] = {found / kGridSide, found % kGridSide};
    }
    return cells;
  }

  static std::array<Cell, kRobots> draw_distinct_cells(RandomSource& rng) {
    std::array<int, kRobots> idx{};
    idx[0] = rng.uniform_int(kGridCells);
    idx[1] = rng.uniform_int(kGridCells - 1);
    if (idx[1] >= idx[0]) ++idx[1];
    idx[2] = rng.uniform_int(kGridCells - 2);
    for (int taken : {std::min(idx[0], idx[1]), std::max(idx[0], idx[1])})
      if (idx[2] >= taken) ++idx[2];
    std::array<Cell, kRobots> cells;
    for (int j = 0; j < kRobots; ++j) cells[j] = {idx[j] / kGridSide, idx[j] % kGridSide};
    return cells;
  }

  static bool all_on_targets(const std::array<Cell, kRobots>& robots,
                             const std::array<Cell, kRobots>& targets) {
    for (int j = 0; j < kRobots; ++j)
      if (robots[j] != targets[j]) return false;
    return true;
  }

  static double reward_of_cells(const std::array<Cell, kRobots>& robots,
                                const std::array<Cell, kRobots>& targets) {
    int total = 0;
    for (int j = 0; j < kRobots; ++j) total += bfs_shortest_path(robots[j], targets[j]);
    double r = 1.0 - static_cast<double>(total) / kDistanceScale;
    return std::clamp(r, 0.0, 1.0);
  }

  Options opt_;
};

// Single agent on the same 4x4 grid, used for oracle-sized experiments.
// Reaching the target is terminal with reward 1; other states earn a small
// progress reward 0.1 * (1 - d/6) so the greedy optimum is to finish rather
// than to hover next to the target collecting shaping forever.
class GridWorld1Env : public Environment {
 public:
  static constexpr double kProgressScale = 0.1;

  explicit GridWorld1Env(Cell target = {3, 3}) : target_(target) {
    if (!on_grid(target_)) throw std::invalid_argument("GridWorld1Env: target off grid");
  }

  int action_count() const override { return kPrimitiveCount; }
  // Two 4x4 binary channels: agent position, target cell.
  int encoding_size() const override { return 2 * kGridCells; }

  StateId make_state(Cell agent) const {
    if (!on_grid(agent)) throw std::invalid_argument("GridWorld1Env: agent off grid");
    std::vector<double> enc(encoding_size(), 0.0);
    enc[agent.row * kGridSide + agent.col] = 1.0;
    enc[kGridCells + target_.row * kGridSide + target_.col] = 1.0;
    std::string key{static_cast<char>('0' + agent.row), static_cast<char>('0' + agent.col),
                    static_cast<char>('0' + target_.row), static_cast<char>('0' + target_.col)};
    return StateId{std::move(enc), std::move(key)};
  }

  static Cell agent_of(const StateId& s) {
    for (int i = 0; i < kGridCells; ++i)
      if (s.encoding.at(i) != 0.0) return {i / kGridSide, i % kGridSide};
    throw std::invalid_argument("GridWorld1Env: empty agent channel");
  }

  Cell target() const { return target_; }

  // Uniform over the 15 non-terminal cells.
  StateId initial_state(RandomSource& rng) const override {
    int t = target_.row * kGridSide + target_.col;
    int i = rng.uniform_int(kGridCells - 1);
    if (i >= t) ++i;
    return make_state({i / kGridSide, i % kGridSide});
  }

  StepOutcome step(const StateId& s, ActionId a, RandomSource&) const override {
    if (a < 0 || a >= kPrimitiveCount) throw std::invalid_argument("GridWorld1Env::step: bad action");
    Cell agent = agent_of(s);
    Cell moved = raw_move(agent, a);
    if (!on_grid(moved)) moved = agent;
    StateId next = make_state(moved);
    return StepOutcome{std::move(next), reward_of_cell(moved), moved == target_};
  }

  double reward_of(const StateId& s) const override { return reward_of_cell(agent_of(s)); }
  bool terminal(const StateId& s) const override { return agent_of(s) == target_; }

  std::vector<StateId> enumerate_states() const {
    std::vector<StateId> out;
    out.reserve(kGridCells);
    for (int i = 0; i < kGridCells; ++i) out.push_back(make_state({i / kGridSide, i % kGridSide}));
    return out;
  }

 private:
  double reward_of_cell(Cell agent) const {
    int d = bfs_shortest_path(agent, target_);
    if (d == 0) return 1.0;
    return kProgressScale * (1.0 - static_cast<double>(d) / 6.0);
  }

  Cell target_;
};

// Exact Q* for a deterministic, enumerable environment: synchronous Bellman
// sweeps until no entry moves by more than tol. Terminal states keep zero
// rows (episodes end there, so no further value accrues).
inline std::unordered_map<std::string, std::vector<double>> value_iteration_oracle(
    const Environment& env, const std::vector<StateId>& states, double gamma, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration_oracle: tol must be positive");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("value_iteration_oracle: gamma must be in [0,1)");
  const int actions = env.action_count();
  RandomSource rng(0);  // dynamics must be deterministic; the source is unused

  struct Arc {
    std::string next_key;
    double reward = 0.0;
    bool terminal = false;
  };
  std::unordered_map<std::string, std::vector<double>> q;
  std::unordered_map<std::string, std::vector<Arc>> arcs;
  for (const StateId& s : states) q[s.key] = std::vector<double>(actions, 0.0);
  for (const StateId& s : states) {
    if (env.terminal(s)) continue;
    std::vector<Arc> row(actions);
    for (int a = 0; a < actions; ++a) {
      StepOutcome out = env.step(s, a, rng);
      if (!q.count(out.next.key))
        throw std::invalid_argument("value_iteration_oracle: state list is not closed under step");
      row[a] = Arc{out.next.key, out.reward, out.terminal};
    }
    arcs.emplace(s.key, std::move(row));
  }

  while (true) {
    double delta = 0.0;
    auto prev = q;
    for (const auto& [key, row] : arcs) {
      std::vector<double>& target = q[key];
      for (int a = 0; a < actions; ++a) {
        const Arc& arc = row[a];
        double boot = 0.0;
        if (!arc.terminal) {
          const std::vector<double>& nx = prev.at(arc.next_key);
          boot = *std::max_element(nx.begin(), nx.end());
        }
        double updated = arc.reward + gamma * boot;
        delta = std::max(delta, std::abs(updated - target[a]));
        target[a] = updated;
      }
    }
    if (delta <= tol) break;
  }
  return q;
}

}  // namespace dop
