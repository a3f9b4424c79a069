#pragma once

// Comparison baselines: a minimal replay-buffer DQN (no target network) and
// a TD-search planner that improves Q along simulated trajectories instead of
// building a pruned tree.

#include <chrono>
#include <stdexcept>
#include <vector>

#include "dop/qfunc.hpp"
#include "dop/run_record.hpp"
#include "dop/search.hpp"

namespace dop {

// Fixed-capacity ring buffer with FIFO eviction and uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : cap_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  }

  void push(Transition t) {
    std::size_t slot = static_cast<std::size_t>(pushed_ % static_cast<long>(cap_));
    if (buf_.size() < cap_)
      buf_.push_back(std::move(t));
    else
      buf_[slot] = std::move(t);
    ++pushed_;
  }

  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return cap_; }
  long total_pushed() const { return pushed_; }

  const Transition& sample(RandomSource& rng) const {
    if (buf_.empty()) throw std::logic_error("ReplayBuffer::sample: empty buffer");
    return buf_[rng.uniform_int(static_cast<int>(buf_.size()))];
  }

  // Uniform with replacement.
  std::vector<const Transition*> sample_batch(int n, RandomSource& rng) const {
    if (buf_.empty()) throw std::logic_error("ReplayBuffer::sample_batch: empty buffer");
    std::vector<const Transition*> out(n);
    for (int i = 0; i < n; ++i) out[i] = &buf_[rng.uniform_int(static_cast<int>(buf_.size()))];
    return out;
  }

 private:
  std::vector<Transition> buf_;
  std::size_t cap_;
  long pushed_ = 0;
};

// Linear decay from eps_start to eps_final over decay_episodes, then flat.
struct EpsSchedule {
  double eps_start = 1.0;
  double eps_final = 0.1;
  int decay_episodes = 30;

  double at(int episode) const {
    if (episode < 0) episode = 0;
    if (decay_episodes <= 0 || episode >= decay_episodes) return eps_final;
    return eps_start + (eps_final - eps_start) * static_cast<double>(episode) / decay_episodes;
  }
};

struct DqnConfig {
  int episodes = 50;
  int max_episode_steps = 25;
  EpsSchedule eps;
  int batch_size = 32;
  double gamma = 0.8;
  double alpha = 0.01;  // one mini-batch per step wants smaller steps than epoch training
  double p_noise = 0.05;
  int episode_offset = 0;  // continues the epsilon schedule across calls
};

// Replay-buffer Q-learning: act epsilon-greedily, store the transition, and
// after every step train on one uniform mini-batch (once the buffer holds a
// full batch). Returns one record per episode; cumulative_reward is the
// acting reward of that episode.
inline std::vector<RunRecord> run_dqn(const Environment& env, QFunction& q, const DqnConfig& cfg,
                                      ReplayBuffer& buffer, ExplorationLedger& ledger,
                                      RandomSource& rng) {
  if (cfg.episodes < 0 || cfg.max_episode_steps < 1)
    throw std::invalid_argument("run_dqn: bad episode budget");
  if (static_cast<std::size_t>(cfg.batch_size) > buffer.capacity())
    throw std::invalid_argument("run_dqn: buffer capacity below batch size");
  std::vector<RunRecord> records;
  for (int e = 0; e < cfg.episodes; ++e) {
    auto tick = std::chrono::steady_clock::now();
    double eps = cfg.eps.at(cfg.episode_offset + e);
    long seen_before = ledger.total();
    StateId s = env.initial_state(rng);
    ledger.record(s);
    double episode_reward = 0.0;
    for (int step = 0; step < cfg.max_episode_steps; ++step) {
      Transition tr = eps_greedy_step(env, s, q, eps, cfg.p_noise, rng);
      ledger.record(tr.s_next);
      episode_reward += tr.r;
      bool done = tr.terminal;
      s = tr.s_next;
      buffer.push(std::move(tr));
      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size))
        q.train_batch(buffer.sample_batch(cfg.batch_size, rng), cfg.gamma, cfg.alpha);
      if (done) break;
    }
    auto tock = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.iteration = cfg.episode_offset + e + 1;
    rec.cumulative_reward = episode_reward;
    rec.explored_total = ledger.total();
    rec.explored_new = ledger.total() - seen_before;
    rec.dataset_size = buffer.total_pushed();
    rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(tock - tick).count();
    records.push_back(rec);
  }
  return records;
}

struct TdSearchConfig {
  int simulations = 8;
  int depth_cap = 10;
  double eps = 0.2;
  double gamma = 0.8;
  double alpha = 0.1;  // one-sample TD updates want smaller steps than epoch training
  double p_noise = 0.05;
};

// TD-search: runs epsilon-greedy simulations from the root through the
// environment model, applying a one-step TD update to Q after every simulated
// transition, then returns the greedy root action under the improved Q. With
// zero simulations this is exactly the greedy action.
inline ActionId run_td_search(const Environment& env, QFunction& q, const TdSearchConfig& cfg,
                              const StateId& root, RandomSource& rng,
                              ExplorationLedger* ledger = nullptr, long* sim_steps = nullptr) {
  if (cfg.simulations < 0 || cfg.depth_cap < 1)
    throw std::invalid_argument("run_td_search: bad simulation budget");
  if (env.terminal(root)) throw std::invalid_argument("run_td_search: root state is terminal");
  std::vector<const Transition*> one(1);
  for (int sim = 0; sim < cfg.simulations; ++sim) {
    StateId s = root;
    for (int depth = 0; depth < cfg.depth_cap; ++depth) {
      Transition tr = eps_greedy_step(env, s, q, cfg.eps, cfg.p_noise, rng);
      if (ledger) ledger->record(tr.s_next);
      if (sim_steps) ++*sim_steps;
      one[0] = &tr;
      q.train_batch(one, cfg.gamma, cfg.alpha);
      if (tr.terminal) break;
      s = std::move(tr.s_next);
    }
  }
  return argmax_action(q.predict(root));
}

}  // namespace dop
