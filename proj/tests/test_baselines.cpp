#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dop/baselines.hpp"
#include "dop/envs.hpp"
#include "test_support.hpp"

using dop::ActionId;
using dop::DqnConfig;
using dop::EpsSchedule;
using dop::ExplorationLedger;
using dop::RandomSource;
using dop::ReplayBuffer;
using dop::run_dqn;
using dop::run_td_search;
using dop::StateId;
using dop::TabularQ;
using dop::TdSearchConfig;
using dop::Transition;
using dop_test::BanditEnv;
using dop_test::ChainEnv;

namespace {

// Pass-through environment that logs every (state, executed action) pair, so
// two different components can be compared step for step.
class RecordingEnv : public dop::Environment {
 public:
  explicit RecordingEnv(const dop::Environment& inner) : inner_(inner) {}
  int action_count() const override { return inner_.action_count(); }
  int encoding_size() const override { return inner_.encoding_size(); }
  StateId initial_state(RandomSource& rng) const override { return inner_.initial_state(rng); }
  dop::StepOutcome step(const StateId& s, ActionId a, RandomSource& rng) const override {
    calls.emplace_back(s.key, a);
    return inner_.step(s, a, rng);
  }
  double reward_of(const StateId& s) const override { return inner_.reward_of(s); }
  bool terminal(const StateId& s) const override { return inner_.terminal(s); }

  mutable std::vector<std::pair<std::string, ActionId>> calls;

 private:
  const dop::Environment& inner_;
};

Transition tagged_transition(const ChainEnv& env, double tag) {
  return Transition{env.at(0), 0, env.at(1), tag, false};
}

}  // namespace

TEST_CASE("replay buffer: size never exceeds capacity") {
  ChainEnv env({0.0, 1.0});
  ReplayBuffer buf(100);
  for (int i = 0; i < 100000; ++i) {
    buf.push(tagged_transition(env, i));
    REQUIRE(buf.size() <= 100);
  }
  CHECK(buf.size() == 100);
  CHECK(buf.total_pushed() == 100000);
}

TEST_CASE("replay buffer: eviction is oldest-first") {
  ChainEnv env({0.0, 1.0});
  ReplayBuffer buf(3);
  for (int i = 1; i <= 5; ++i) buf.push(tagged_transition(env, i));

  // 1 and 2 were evicted; exactly {3, 4, 5} remain.
  RandomSource rng(5);
  std::map<double, int> seen;
  for (int i = 0; i < 3000; ++i) seen[buf.sample(rng).r]++;
  REQUIRE(seen.size() == 3);
  CHECK(seen.count(3.0) == 1);
  CHECK(seen.count(4.0) == 1);
  CHECK(seen.count(5.0) == 1);
}

TEST_CASE("replay buffer: capacity one always holds the most recent push") {
  ChainEnv env({0.0, 1.0});
  ReplayBuffer buf(1);
  RandomSource rng(2);
  for (int i = 0; i < 50; ++i) {
    buf.push(tagged_transition(env, i));
    CHECK(buf.sample(rng).r == static_cast<double>(i));
  }
}

TEST_CASE("replay buffer: sampling is uniform over the stored items") {
  ChainEnv env({0.0, 1.0});
  ReplayBuffer buf(10);
  for (int i = 0; i < 10; ++i) buf.push(tagged_transition(env, i));
  RandomSource rng(77);
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[static_cast<int>(buf.sample(rng).r)]++;
  // Binomial(1e5, 0.1): mean 1e4, sigma ~ 94.9; 3 sigma on both sides.
  for (int c : counts) {
    CHECK(c > 10000 - 285);
    CHECK(c < 10000 + 285);
  }
}

TEST_CASE("replay buffer: rejects degenerate use") {
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
  ReplayBuffer buf(4);
  RandomSource rng(1);
  CHECK_THROWS_AS(buf.sample(rng), std::logic_error);
  CHECK_THROWS_AS(buf.sample_batch(2, rng), std::logic_error);
}

TEST_CASE("epsilon schedule: linear decay with a floor") {
  EpsSchedule eps{1.0, 0.1, 30};
  CHECK(eps.at(0) == Catch::Approx(1.0));
  CHECK(eps.at(15) == Catch::Approx(0.55));
  CHECK(eps.at(30) == Catch::Approx(0.1));
  CHECK(eps.at(500) == Catch::Approx(0.1));
  CHECK(eps.at(-3) == Catch::Approx(1.0));
  EpsSchedule flat{1.0, 0.25, 0};
  CHECK(flat.at(0) == Catch::Approx(0.25));
}

TEST_CASE("run_dqn: no training happens before the buffer holds a full batch") {
  dop::GridWorld1Env env;
  dop::NeuralQ q(env.encoding_size(), 8, env.action_count(), 4);
  std::vector<double> before = q.params();

  DqnConfig cfg;
  cfg.episodes = 1;
  cfg.max_episode_steps = 10;  // at most 10 pushes, below the batch size
  cfg.batch_size = 32;
  ReplayBuffer buf(100);
  ExplorationLedger ledger;
  RandomSource rng(9);
  auto records = run_dqn(env, q, cfg, buf, ledger, rng);

  REQUIRE(records.size() == 1);
  CHECK(q.params() == before);
  CHECK(buf.total_pushed() <= 10);
}

TEST_CASE("run_dqn: buffer capacity below the batch size is rejected") {
  dop::GridWorld1Env env;
  TabularQ q(env.action_count());
  DqnConfig cfg;
  cfg.batch_size = 8;
  ReplayBuffer buf(4);
  ExplorationLedger ledger;
  RandomSource rng(1);
  CHECK_THROWS_AS(run_dqn(env, q, cfg, buf, ledger, rng), std::invalid_argument);
}

TEST_CASE("run_dqn: records carry episode rewards and exploration deltas") {
  dop::GridWorld1Env env;
  TabularQ q(env.action_count());
  DqnConfig cfg;
  cfg.episodes = 6;
  cfg.max_episode_steps = 8;
  cfg.batch_size = 4;
  cfg.episode_offset = 10;
  ReplayBuffer buf(64);
  ExplorationLedger ledger;
  RandomSource rng(33);
  auto records = run_dqn(env, q, cfg, buf, ledger, rng);

  REQUIRE(records.size() == 6);
  long running_total = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].iteration == 11 + static_cast<int>(i));
    CHECK(records[i].explored_total >= running_total);
    CHECK(records[i].explored_new == records[i].explored_total - running_total);
    running_total = records[i].explored_total;
  }
  CHECK(records.back().dataset_size == buf.total_pushed());
}

TEST_CASE("run_dqn: with eps pinned to 1 acting matches a uniform random walker") {
  dop::GridWorld1Env env;
  const int episodes = 200;
  const int T = 12;

  DqnConfig cfg;
  cfg.episodes = episodes;
  cfg.max_episode_steps = T;
  cfg.batch_size = 8;
  cfg.eps = EpsSchedule{1.0, 1.0, 0};
  TabularQ q(env.action_count());
  ReplayBuffer buf(256);
  ExplorationLedger ledger;
  RandomSource rng(101);
  auto records = run_dqn(env, q, cfg, buf, ledger, rng);

  double dqn_mean = 0.0, dqn_second = 0.0;
  for (const auto& rec : records) {
    dqn_mean += rec.cumulative_reward / episodes;
    dqn_second += rec.cumulative_reward * rec.cumulative_reward / episodes;
  }

  // Reference walker: same episode shape, uniformly random actions.
  RandomSource ref_rng(202);
  double ref_mean = 0.0, ref_second = 0.0;
  for (int e = 0; e < episodes; ++e) {
    StateId s = env.initial_state(ref_rng);
    double episode = 0.0;
    for (int t = 0; t < T; ++t) {
      ActionId a = ref_rng.uniform_int(env.action_count());
      Transition tr = dop::stochastic_step(env, s, a, cfg.p_noise, ref_rng);
      episode += tr.r;
      if (tr.terminal) break;
      s = tr.s_next;
    }
    ref_mean += episode / episodes;
    ref_second += episode * episode / episodes;
  }

  double dqn_var = dqn_second - dqn_mean * dqn_mean;
  double ref_var = ref_second - ref_mean * ref_mean;
  double margin = 4.0 * std::sqrt(dqn_var / episodes + ref_var / episodes);
  CHECK(std::abs(dqn_mean - ref_mean) <= margin);
}

TEST_CASE("run_dqn: gridworld policy becomes optimal from most cells") {
  dop::GridWorld1Env env;
  dop::NeuralQ q(env.encoding_size(), 64, env.action_count(), 12);
  DqnConfig cfg;
  cfg.episodes = 500;
  cfg.alpha = 0.01;  // small enough for Adam to settle within 500 episodes
  ReplayBuffer buf(10000);
  ExplorationLedger ledger;
  RandomSource rng(55);
  run_dqn(env, q, cfg, buf, ledger, rng);

  RandomSource scratch(0);
  int optimal_cells = 0, total_cells = 0;
  for (const StateId& start : env.enumerate_states()) {
    if (env.terminal(start)) continue;
    ++total_cells;
    int optimal = dop::bfs_shortest_path(dop::GridWorld1Env::agent_of(start), env.target());
    StateId s = start;
    bool reached = false;
    for (int t = 0; t < optimal && !reached; ++t) {
      auto out = env.step(s, dop::argmax_action(q.predict(s)), scratch);
      reached = out.terminal;
      s = out.next;
    }
    if (reached) ++optimal_cells;
  }
  REQUIRE(total_cells == 15);
  CHECK(optimal_cells >= 12);  // optimal-length path from at least 80% of cells
}

TEST_CASE("run_td_search: zero simulations return the greedy action untouched") {
  BanditEnv env({0.3, 0.9, 0.1});
  TabularQ q(env.action_count());
  q.set_row(env.start().key, {0.05, 0.6, 0.2});
  TdSearchConfig cfg;
  cfg.simulations = 0;
  RandomSource rng(1);
  CHECK(run_td_search(env, q, cfg, env.start(), rng) == 1);
  CHECK(q.entry_count() == 1);  // nothing new was written
}

TEST_CASE("run_td_search: eps 0 in a deterministic world updates one path only") {
  ChainEnv env({0.0, 0.1, 0.2, 1.0});
  TabularQ q(env.action_count());
  // Make "advance" the greedy action everywhere up front.
  q.set_row("0", {0.5, 0.0});
  q.set_row("1", {0.5, 0.0});
  q.set_row("2", {0.5, 0.0});

  TdSearchConfig cfg;
  cfg.simulations = 4;
  cfg.depth_cap = 10;
  cfg.eps = 0.0;
  cfg.p_noise = 0.0;
  cfg.alpha = 0.1;
  ExplorationLedger ledger;
  long sim_steps = 0;
  RandomSource rng(3);
  ActionId best = run_td_search(env, q, cfg, env.at(0), rng, &ledger, &sim_steps);

  CHECK(best == 0);
  CHECK(sim_steps == 12);       // 4 identical simulations of 3 steps each
  CHECK(ledger.total() == 3);   // states 1, 2, 3 and nothing else
  CHECK(q.entry_count() == 3);  // no rows beyond the pre-seeded path

  // The last chain step is terminal with reward 1, so its entry contracts
  // toward 1 by factor (1 - alpha) per simulation.
  double expected = 1.0 - (1.0 - 0.5) * std::pow(0.9, 4);
  CHECK(q.predict(env.at(2))[0] == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("run_td_search: picks the better bandit arm and matches a hand-rolled TD replay") {
  BanditEnv env({0.2, 0.8});
  TabularQ q(env.action_count());
  TdSearchConfig cfg;
  cfg.simulations = 100;
  cfg.eps = 0.3;
  cfg.p_noise = 0.0;
  cfg.alpha = 0.15;
  const std::uint64_t seed = 2718;
  RandomSource rng(seed);
  ActionId best = run_td_search(env, q, cfg, env.start(), rng);

  // Independent replay of the same epsilon-greedy TD recurrence: one draw
  // decides explore-vs-greedy, one more picks the explored arm; the pulled
  // arm's estimate moves alpha of the way to its terminal reward.
  double table[2] = {0.0, 0.0};
  RandomSource replay(seed);
  for (int sim = 0; sim < cfg.simulations; ++sim) {
    int arm;
    if (replay.uniform_real() < cfg.eps)
      arm = static_cast<int>(replay.uniform_int(2));
    else
      arm = table[1] > table[0] ? 1 : 0;
    double reward = arm == 0 ? 0.2 : 0.8;
    table[arm] += cfg.alpha * (reward - table[arm]);
  }

  CHECK(best == 1);
  CHECK(table[1] > table[0]);
  auto row = q.predict(env.start());
  CHECK(row[0] == Catch::Approx(table[0]).margin(1e-12));
  CHECK(row[1] == Catch::Approx(table[1]).margin(1e-12));
}

TEST_CASE("run_td_search: with eps 1 simulations walk exactly like rollouts") {
  ChainEnv inner({0.0, 0.1, 0.2, 0.3, 0.4, 1.0});
  const std::uint64_t seed = 424242;
  const int cap = 4;
  const int sims = 3;
  const double p_noise = 0.05;

  RecordingEnv td_env(inner);
  TabularQ td_q(inner.action_count());
  TdSearchConfig td_cfg;
  td_cfg.simulations = sims;
  td_cfg.depth_cap = cap;
  td_cfg.eps = 1.0;
  td_cfg.p_noise = p_noise;
  RandomSource td_rng(seed);
  run_td_search(td_env, td_q, td_cfg, inner.at(0), td_rng);

  RecordingEnv ro_env(inner);
  TabularQ ro_q(inner.action_count());
  dop::SearchConfig ro_cfg;
  ro_cfg.eps_rollout = 1.0;
  ro_cfg.p_noise = p_noise;
  ro_cfg.rollout_cap = cap;
  ExplorationLedger ledger;
  RandomSource ro_rng(seed);
  for (int sim = 0; sim < sims; ++sim)
    dop::rollout(ro_env, inner.at(0), ro_q, ro_cfg, ledger, ro_rng);

  REQUIRE(td_env.calls.size() == ro_env.calls.size());
  for (std::size_t i = 0; i < td_env.calls.size(); ++i) {
    CHECK(td_env.calls[i].first == ro_env.calls[i].first);
    CHECK(td_env.calls[i].second == ro_env.calls[i].second);
  }
}

TEST_CASE("run_td_search: rejects terminal roots and bad budgets") {
  ChainEnv env({0.0, 1.0});
  TabularQ q(env.action_count());
  RandomSource rng(1);
  TdSearchConfig cfg;
  CHECK_THROWS_AS(run_td_search(env, q, cfg, env.at(1), rng), std::invalid_argument);
  cfg.simulations = -1;
  CHECK_THROWS_AS(run_td_search(env, q, cfg, env.at(0), rng), std::invalid_argument);
  cfg.simulations = 1;
  cfg.depth_cap = 0;
  CHECK_THROWS_AS(run_td_search(env, q, cfg, env.at(0), rng), std::invalid_argument);
}
