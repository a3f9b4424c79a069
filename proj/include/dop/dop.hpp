#pragma once

// The outer planning-and-learning loop: walk the greedy policy through the
// real environment, run a pruned tree search at every visited state, append
// the search's transitions to the aggregated dataset, and refit the Q
// function on everything collected so far.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dop/qfunc.hpp"
#include "dop/run_record.hpp"
#include "dop/search.hpp"

namespace dop {

// Admissibility threshold for 1-based iteration i: lambda0 in the first
// iteration, then +0.2 per completed iteration, capped at 0.9.
inline double lambda_for_iteration(double lambda0, int iteration) {
  if (iteration < 1) throw std::invalid_argument("lambda_for_iteration: iteration is 1-based");
  return std::min(0.9, lambda0 + 0.2 * (iteration - 1));
}

// Frozen greedy policy over a cloned Q function.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(std::unique_ptr<QFunction> q) : q_(std::move(q)) {
    if (!q_) throw std::invalid_argument("PolicySnapshot: null Q function");
  }
  PolicySnapshot(const PolicySnapshot& o) : q_(o.q_->clone()) {}
  PolicySnapshot& operator=(const PolicySnapshot& o) {
    q_ = o.q_->clone();
    return *this;
  }
  PolicySnapshot(PolicySnapshot&&) = default;
  PolicySnapshot& operator=(PolicySnapshot&&) = default;

  ActionId act(const StateId& s) const { return argmax_action(q_->predict(s)); }
  const QFunction& q() const { return *q_; }

 private:
  std::unique_ptr<QFunction> q_;
};

// Evaluation episode seeds for iteration i; shared across algorithms so runs
// with the same run seed are compared on identical evaluation noise.
inline std::vector<std::uint64_t> eval_seeds_for(std::uint64_t eval_seed, int iteration,
                                                 int episodes) {
  std::vector<std::uint64_t> seeds(episodes);
  for (int j = 0; j < episodes; ++j)
    seeds[j] = derive_seed(eval_seed, static_cast<std::uint64_t>(iteration) * 4096 + j + 1);
  return seeds;
}

// Mean cumulative reward of the greedy policy over one episode per seed, each
// at most T steps (terminal ends the episode early). A terminal start state
// contributes its own reward exactly once.
inline double evaluate_policy(const Environment& env, const PolicySnapshot& policy, int T,
                              const std::vector<std::uint64_t>& seeds, double p_noise,
                              const StateId* start = nullptr) {
  if (T < 1) throw std::invalid_argument("evaluate_policy: T must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("evaluate_policy: no evaluation seeds");
  double total = 0.0;
  for (std::uint64_t seed : seeds) {
    RandomSource rng(seed);
    StateId s = start ? *start : env.initial_state(rng);
    if (env.terminal(s)) {
      total += env.reward_of(s);
      continue;
    }
    double episode = 0.0;
    for (int t = 0; t < T; ++t) {
      Transition tr = stochastic_step(env, s, policy.act(s), p_noise, rng);
      episode += tr.r;
      if (tr.terminal) break;
      s = std::move(tr.s_next);
    }
    total += episode;
  }
  return total / static_cast<double>(seeds.size());
}

struct DopConfig {
  int iterations = 10;  // outer iterations I
  int timesteps = 10;   // environment steps per iteration T
  double gamma = 0.8;
  double alpha = 0.15;
  double lambda0 = 0.5;
  double p_noise = 0.05;
  int batch_size = 32;
  int epochs_per_update = 1;
  int eval_episodes = 3;
  std::uint64_t eval_seed = 0;      // 0: drawn from the run's random source
  std::string checkpoint_dir;      // when set, one checkpoint per iteration
  SearchConfig search;             // gamma/p_noise are kept in sync by run_dop
};

struct DopResult {
  PolicySnapshot policy;
  std::vector<RunRecord> records;
  ExplorationLedger ledger;
  AggregatedDataset dataset;
};

// One run of the aggregating planner. Per iteration: T times, step the
// current greedy policy through the environment (fresh start draw whenever a
// terminal state is hit), search at the reached state, append the search's
// transitions, and train for epochs_per_update epochs over the whole
// aggregate. Each iteration ends with a greedy evaluation from a fixed
// per-run start state.
inline DopResult run_dop(const Environment& env, QFunction& q, DopConfig cfg, RandomSource& rng) {
  if (cfg.iterations < 1 || cfg.timesteps < 1)
    throw std::invalid_argument("run_dop: iterations and timesteps must be >= 1");
  if (env.action_count() != q.action_count())
    throw std::invalid_argument("run_dop: action count mismatch");
  cfg.search.gamma = cfg.gamma;
  cfg.search.p_noise = cfg.p_noise;

  const std::uint64_t eval_seed = cfg.eval_seed ? cfg.eval_seed : rng.raw();
  RandomSource start_rng(derive_seed(eval_seed, 0));
  const StateId eval_start = env.initial_state(start_rng);

  ExplorationLedger ledger;
  AggregatedDataset dataset;
  std::vector<RunRecord> records;

  for (int i = 1; i <= cfg.iterations; ++i) {
    auto tick = std::chrono::steady_clock::now();
    cfg.search.lambda = lambda_for_iteration(cfg.lambda0, i);

    StateId state = env.initial_state(rng);
    ledger.record(state);
    for (int t = 1; t <= cfg.timesteps; ++t) {
      Transition walk = stochastic_step(env, state, argmax_action(q.predict(state)), cfg.p_noise, rng);
      ledger.record(walk.s_next);
      state = std::move(walk.s_next);
      if (env.terminal(state)) {
        state = env.initial_state(rng);
        ledger.record(state);
      }
      SearchResult search = uct_search(state, q, cfg.search, env, ledger, rng);
      dataset.append(std::move(search.collected));
      for (int e = 0; e < cfg.epochs_per_update; ++e)
        train_epoch(q, dataset, cfg.gamma, cfg.alpha, cfg.batch_size, rng);
    }
    dataset.mark_iteration();
    ledger.mark_iteration();
    q.set_iteration(i);
    if (!cfg.checkpoint_dir.empty()) {
      std::string path = cfg.checkpoint_dir + "/iter_" + std::to_string(i) + ".qckpt";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("run_dop: cannot write checkpoint '" + path + "'");
      q.save(out);
    }

    PolicySnapshot snapshot(q.clone());
    double reward = evaluate_policy(env, snapshot, cfg.timesteps,
                                    eval_seeds_for(eval_seed, i, cfg.eval_episodes), cfg.p_noise,
                                    &eval_start);
    auto tock = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.iteration = i;
    rec.cumulative_reward = reward;
    rec.explored_total = ledger.total();
    rec.explored_new = ledger.per_iteration_new().back();
    rec.dataset_size = static_cast<long>(dataset.size());
    rec.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(tock - tick).count();
    records.push_back(rec);
  }

  return DopResult{PolicySnapshot(q.clone()), std::move(records), std::move(ledger),
                   std::move(dataset)};
}

}  // namespace dop
