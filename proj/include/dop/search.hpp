#pragma once

// UCT-style tree search over an environment model, with the expansion set at
// each node either pruned by the learned Q function ("dop"), left as the full
// action set ("vanilla"), or replaced by a single random action ("random").

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "dop/qfunc.hpp"

namespace dop {

enum class SearchMode { kDop, kVanilla, kRandom };

inline SearchMode search_mode_from_string(const std::string& s) {
  if (s == "dop") return SearchMode::kDop;
  if (s == "vanilla") return SearchMode::kVanilla;
  if (s == "random") return SearchMode::kRandom;
  throw std::invalid_argument("unknown search mode '" + s + "'");
}

struct SearchConfig {
  int horizon = 4;        // tree depth H
  int rollouts = 3;       // rollouts per newly created node, M
  int n_sim = 32;         // search episodes per call
  int rollout_cap = 20;   // rollout step bound
  double c_explore = 0.7;
  double lambda = 0.5;    // admissibility threshold fraction
  double eps_admissible = 0.3;
  double eps_rollout = 0.2;
  double gamma = 0.8;
  double p_noise = 0.05;
  double xi = 0.0;        // state comparison threshold for node identity
  SearchMode mode = SearchMode::kDop;
  bool mc_backup = false;        // blend sampled returns into selection values
  bool collect_rollouts = false; // also return rollout transitions as data
};

// Cumulative registry of every distinct state touched by search and
// execution, keyed by canonical state key.
class ExplorationLedger {
 public:
  // Returns true when the state had not been seen before.
  bool record(const StateId& s) {
    bool fresh = seen_.insert(s.key).second;
    if (fresh) ++new_since_mark_;
    return fresh;
  }

  long total() const { return static_cast<long>(seen_.size()); }

  void mark_iteration() {
    per_iteration_new_.push_back(new_since_mark_);
    new_since_mark_ = 0;
  }
  const std::vector<long>& per_iteration_new() const { return per_iteration_new_; }
  long new_since_mark() const { return new_since_mark_; }

 private:
  std::unordered_set<std::string> seen_;
  std::vector<long> per_iteration_new_;
  long new_since_mark_ = 0;
};

// Admissible action set. With a non-negative maximum this is every action
// whose value reaches lambda * max; an all-negative value vector degenerates
// to the argmax ties. Independently, with probability eps_admissible one
// uniformly random action is added. The argmax is always a member.
inline std::vector<ActionId> admissible_actions(const std::vector<double>& q_values, double lambda,
                                                double eps_admissible, RandomSource& rng) {
  if (q_values.empty()) throw std::invalid_argument("admissible_actions: empty value vector");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("admissible_actions: lambda must be in [0,1]");
  const int n = static_cast<int>(q_values.size());
  double mx = q_values[0];
  for (int a = 1; a < n; ++a) mx = std::max(mx, q_values[a]);

  std::vector<ActionId> out;
  if (mx >= 0.0) {
    double threshold = lambda * mx;
    for (int a = 0; a < n; ++a)
      if (q_values[a] >= threshold) out.push_back(a);
  } else {
    for (int a = 0; a < n; ++a)
      if (q_values[a] == mx) out.push_back(a);
  }
  if (eps_admissible > 0.0 && rng.bernoulli(eps_admissible)) {
    ActionId extra = rng.uniform_int(n);
    auto it = std::lower_bound(out.begin(), out.end(), extra);
    if (it == out.end() || *it != extra) out.insert(it, extra);
  }
  return out;
}

struct SearchNode {
  StateId state;
  int depth = 0;
  std::vector<double> q_values;            // Q(s, .) cached at creation
  std::vector<ActionId> candidates;        // the mode's action set for this state
  std::vector<int> visits;                 // per-action visit counts
  std::vector<double> return_sums;         // sampled returns (mc_backup only)
  std::map<ActionId, std::vector<SearchNode*>> children;  // distinct children per action
};

// Exploration bonus. Unvisited actions are forced (+inf); while the node has
// at most one total visit the log term is taken as zero.
inline double ucb_bonus(double c, int visits_a, int total_visits) {
  if (visits_a < 0 || total_visits < 0) throw std::invalid_argument("ucb_bonus: negative count");
  if (visits_a == 0) return std::numeric_limits<double>::infinity();
  double log_term = total_visits <= 1 ? 0.0 : std::log(static_cast<double>(total_visits));
  return c * std::sqrt(log_term / static_cast<double>(visits_a));
}

// Picks the admissible action maximizing value + bonus (ties toward the
// lowest index, unvisited actions first) and counts the visit.
inline ActionId ucb_select(SearchNode& node, double c, const std::vector<ActionId>& admissible,
                           bool mc_backup = false) {
  if (admissible.empty()) throw std::invalid_argument("ucb_select: empty admissible set");
  int total = 0;
  for (int v : node.visits) total += v;
  ActionId best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (ActionId a : admissible) {
    double value = node.q_values[a];
    if (mc_backup && node.visits[a] > 0)
      value = node.return_sums[a] / static_cast<double>(node.visits[a]);
    double score = value + ucb_bonus(c, node.visits[a], total);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  ++node.visits[best];
  return best;
}

// Epsilon-greedy rollout from `start`, discounted return over at most
// rollout_cap steps (terminal cuts it short). Every visited state is
// recorded; transitions are optionally collected.
inline double rollout(const Environment& env, const StateId& start, const QFunction& q,
                      const SearchConfig& cfg, ExplorationLedger& ledger, RandomSource& rng,
                      std::vector<Transition>* collect = nullptr) {
  if (env.terminal(start)) return 0.0;
  double ret = 0.0;
  double discount = 1.0;
  StateId s = start;
  for (int step = 0; step < cfg.rollout_cap; ++step) {
    Transition tr = eps_greedy_step(env, s, q, cfg.eps_rollout, cfg.p_noise, rng);
    ledger.record(tr.s_next);
    ret += discount * tr.r;
    discount *= cfg.gamma;
    bool done = tr.terminal;
    s = tr.s_next;
    if (collect) collect->push_back(std::move(tr));
    if (done) break;
  }
  return ret;
}

struct SearchResult {
  ActionId best_action = 0;
  std::vector<Transition> collected;  // greedy-path transitions (plus rollouts when flagged)
  std::vector<int> root_visits;       // per-action visit counts at the root after all episodes
  std::vector<int> branching;         // admissible-set size at every in-tree selection
  long nodes_created = 0;
};

namespace detail {

// Root-action extraction and greedy descent score actions by cached value
// plus bonus, restricted to visited actions so the +inf of an unvisited one
// cannot win; visit counts are left untouched.
inline ActionId best_visited_action(const SearchNode& node, const SearchConfig& cfg) {
  int total = 0;
  for (int v : node.visits) total += v;
  ActionId best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(node.visits.size()); ++a) {
    if (node.visits[a] == 0) continue;
    double value = node.q_values[a];
    if (cfg.mc_backup)
      value = node.return_sums[a] / static_cast<double>(node.visits[a]);
    double score = value + ucb_bonus(cfg.c_explore, node.visits[a], total);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  if (best < 0) best = argmax_action(node.q_values);  // nothing visited (n_sim = 0)
  return best;
}

}  // namespace detail

// Monte-Carlo tree search from a non-terminal root. Runs cfg.n_sim episodes
// of depth at most cfg.horizon; each episode walks down selecting one action
// per node from the mode's admissible set and steps the environment model.
// The first newly created node ends its episode: M rollouts from it estimate
// the leaf value. Episodes that reach the horizon through known nodes expand
// nothing, which is what makes a sharply pruned tree stop touching new states
// once its admissible frontier is exhausted. Node identity is resolved per
// (depth, state) under the xi comparison, so revisiting an already expanded
// state reuses its statistics. Returns the recommended root action and the
// transitions of a final greedy descent (the data block the caller
// aggregates).
inline SearchResult uct_search(const StateId& root, const QFunction& q, const SearchConfig& cfg,
                               const Environment& env, ExplorationLedger& ledger,
                               RandomSource& rng) {
  if (cfg.horizon < 1) throw std::invalid_argument("uct_search: horizon must be >= 1");
  if (cfg.n_sim < 0 || cfg.rollouts < 0) throw std::invalid_argument("uct_search: negative budget");
  if (env.action_count() != q.action_count())
    throw std::invalid_argument("uct_search: action count mismatch");
  if (env.terminal(root)) throw std::invalid_argument("uct_search: root state is terminal");

  const int n_actions = env.action_count();
  std::vector<ActionId> all_actions(n_actions);
  for (int a = 0; a < n_actions; ++a) all_actions[a] = a;

  std::vector<std::unique_ptr<SearchNode>> nodes;
  auto find_node = [&](int depth, const StateId& s) -> SearchNode* {
    for (auto& n : nodes)
      if (n->depth == depth && states_equal(n->state, s, cfg.xi)) return n.get();
    return nullptr;
  };
  // The candidate set is a property of the state, fixed when the node enters
  // the tree: the admissible subset (dop), everything (vanilla), or a single
  // uniformly drawn action (random).
  auto make_node = [&](int depth, StateId s) -> SearchNode* {
    auto node = std::make_unique<SearchNode>();
    node->state = std::move(s);
    node->depth = depth;
    node->q_values = q.predict(node->state);
    switch (cfg.mode) {
      case SearchMode::kDop:
        node->candidates = admissible_actions(node->q_values, cfg.lambda, cfg.eps_admissible, rng);
        break;
      case SearchMode::kVanilla:
        node->candidates = all_actions;
        break;
      case SearchMode::kRandom:
        node->candidates = {rng.uniform_int(n_actions)};
        break;
    }
    node->visits.assign(n_actions, 0);
    node->return_sums.assign(n_actions, 0.0);
    nodes.push_back(std::move(node));
    return nodes.back().get();
  };

  ledger.record(root);
  SearchNode* root_node = make_node(0, root);
  SearchResult result;
  std::vector<Transition> rollout_pool;

  for (int ep = 0; ep < cfg.n_sim; ++ep) {
    SearchNode* node = root_node;
    std::vector<std::tuple<SearchNode*, ActionId, double>> path;  // mc_backup bookkeeping
    double leaf_value = 0.0;
    for (int h = 1; h <= cfg.horizon; ++h) {
      result.branching.push_back(static_cast<int>(node->candidates.size()));
      ActionId a = ucb_select(*node, cfg.c_explore, node->candidates, cfg.mc_backup);
      Transition tr = stochastic_step(env, node->state, a, cfg.p_noise, rng);
      ledger.record(tr.s_next);
      if (cfg.mc_backup) path.emplace_back(node, a, tr.r);
      if (tr.terminal) {
        leaf_value = 0.0;  // nothing beyond a terminal state
        break;
      }
      SearchNode* child = find_node(h, tr.s_next);
      const bool fresh = child == nullptr;
      if (fresh) {
        child = make_node(h, std::move(tr.s_next));
        double rollout_sum = 0.0;
        for (int m = 0; m < cfg.rollouts; ++m)
          rollout_sum += rollout(env, child->state, q, cfg, ledger, rng,
                                 cfg.collect_rollouts ? &rollout_pool : nullptr);
        leaf_value = cfg.rollouts > 0 ? rollout_sum / cfg.rollouts : 0.0;
      } else {
        leaf_value = *std::max_element(child->q_values.begin(), child->q_values.end());
      }
      auto& kids = node->children[a];
      if (std::find(kids.begin(), kids.end(), child) == kids.end()) kids.push_back(child);
      node = child;
      if (fresh) break;
    }
    if (cfg.mc_backup) {
      double g = leaf_value;
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        g = std::get<2>(*it) + cfg.gamma * g;
        std::get<0>(*it)->return_sums[std::get<1>(*it)] += g;
      }
    }
  }

  result.best_action = detail::best_visited_action(*root_node, cfg);
  result.root_visits = root_node->visits;
  result.nodes_created = static_cast<long>(nodes.size());

  // Greedy descent re-executing the chosen actions; its transitions become
  // this search's data block. Off-tree states fall back to the plain greedy
  // action.
  StateId s = root;
  SearchNode* node = root_node;
  for (int h = 1; h <= cfg.horizon; ++h) {
    ActionId a = node ? detail::best_visited_action(*node, cfg) : argmax_action(q.predict(s));
    Transition tr = stochastic_step(env, s, a, cfg.p_noise, rng);
    ledger.record(tr.s_next);
    s = tr.s_next;
    bool done = tr.terminal;
    result.collected.push_back(std::move(tr));
    if (done) break;
    node = h < cfg.horizon ? find_node(h, s) : nullptr;
  }
  if (cfg.collect_rollouts)
    for (Transition& tr : rollout_pool) result.collected.push_back(std::move(tr));
  return result;
}

}  // namespace dop
