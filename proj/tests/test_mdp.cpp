#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <vector>

#include "dop/envs.hpp"
#include "dop/mdp.hpp"
#include "test_support.hpp"

using dop::RandomSource;
using dop::StateId;
using dop::states_equal;
using dop::stochastic_step;

TEST_CASE("states_equal: identical states match at any threshold") {
  dop::GridWorld1Env env;
  StateId s = env.make_state({1, 2});
  CHECK(states_equal(s, s, 0.0));
  CHECK(states_equal(s, s, 0.5));
}

TEST_CASE("states_equal: thresholding is an inclusive L1 bound") {
  StateId a = dop::make_state({0.0, 0.0, 0.0, 0.0});
  StateId off_by_half = dop::make_state({0.5, 0.0, 0.0, 0.0});
  CHECK_FALSE(states_equal(a, off_by_half, 0.4));
  CHECK(states_equal(a, off_by_half, 0.5));

  // Four coordinates off by 0.1: total L1 distance 0.4, exactly the bound.
  StateId spread = dop::make_state({0.1, 0.1, 0.1, 0.1});
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.encoding.size(); ++i)
    l1 += std::abs(a.encoding[i] - spread.encoding[i]);
  REQUIRE(l1 == Catch::Approx(0.4));
  CHECK(states_equal(a, spread, 0.4));
  CHECK_FALSE(states_equal(a, spread, 0.39));
}

TEST_CASE("states_equal: mismatched encoding sizes are rejected") {
  StateId a = dop::make_state({0.0, 0.0});
  StateId b = dop::make_state({0.0, 0.0, 0.0});
  CHECK_THROWS_AS(states_equal(a, b, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(states_equal(a, a, -0.1), std::invalid_argument);
}

TEST_CASE("states_equal at xi=0 agrees with key equality on grid states") {
  dop::CoopNavEnv env;
  RandomSource rng(7);
  StateId prev = env.initial_state(rng);
  for (int i = 0; i < 10000; ++i) {
    StateId next = env.initial_state(rng);
    bool by_value = states_equal(prev, next, 0.0);
    bool by_key = prev.key == next.key;
    REQUIRE(by_value == by_key);
    prev = std::move(next);
  }
}

TEST_CASE("quantized keys bucket coordinates to multiples of xi") {
  CHECK(dop::quantized_key({0.12, 0.16}, 0.1) == dop::quantized_key({0.1, 0.24}, 0.1));
  CHECK(dop::quantized_key({0.12, 0.16}, 0.1) != dop::quantized_key({0.12, 0.26}, 0.1));
  CHECK_THROWS_AS(dop::quantized_key({0.1}, 0.0), std::invalid_argument);
  StateId q = dop::make_state({0.12, 0.16}, 0.1);
  CHECK(q.key == dop::quantized_key({0.12, 0.16}, 0.1));
}

TEST_CASE("stochastic_step: zero noise reproduces env.step exactly") {
  dop::CoopNavEnv env;
  RandomSource rng(11);
  for (int i = 0; i < 2000; ++i) {
    StateId s = env.initial_state(rng);
    dop::ActionId a = rng.uniform_int(env.action_count());
    RandomSource step_rng(0);
    dop::StepOutcome direct = env.step(s, a, step_rng);
    dop::Transition noisy = stochastic_step(env, s, a, 0.0, rng);
    REQUIRE(noisy.s_next.key == direct.next.key);
    REQUIRE(noisy.r == direct.reward);
    REQUIRE(noisy.terminal == direct.terminal);
    REQUIRE(noisy.a == a);
  }
}

TEST_CASE("stochastic_step: full noise executes each action uniformly") {
  // From (1,1) every primitive leads to a distinct cell, so the executed
  // action can be read off the successor. With p_noise = 1 each of the 5
  // actions should appear 2000 +/- 3 sigma times in 10^4 draws
  // (sigma = sqrt(10^4 * 0.2 * 0.8) = 40).
  dop::GridWorld1Env env;
  StateId s = env.make_state({1, 1});
  RandomSource rng(13);
  std::map<std::string, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[stochastic_step(env, s, dop::kNoop, 1.0, rng).s_next.key]++;
  REQUIRE(counts.size() == 5);
  for (const auto& [key, c] : counts) {
    INFO("successor " << key << " count " << c);
    CHECK(c >= 2000 - 120);
    CHECK(c <= 2000 + 120);
  }
}

TEST_CASE("stochastic_step: default noise rate keeps the commanded action ~96% of the time") {
  // P(executed == commanded) = 0.95 + 0.05/5 = 0.96; 3 sigma of 10^4
  // Bernoulli(0.96) draws is ~59.
  dop::GridWorld1Env env;
  StateId s = env.make_state({1, 1});
  StateId commanded_next = env.make_state({0, 1});  // kUp from (1,1)
  RandomSource rng(17);
  int kept = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    if (stochastic_step(env, s, dop::kUp, 0.05, rng).s_next.key == commanded_next.key) ++kept;
  CHECK(kept >= 9600 - 59);
  CHECK(kept <= 9600 + 59);
}

TEST_CASE("stochastic_step: out-of-range actions are rejected") {
  dop::GridWorld1Env env;
  RandomSource rng(1);
  StateId s = env.initial_state(rng);
  CHECK_THROWS_AS(stochastic_step(env, s, -1, 0.05, rng), std::invalid_argument);
  CHECK_THROWS_AS(stochastic_step(env, s, env.action_count(), 0.05, rng), std::invalid_argument);
}

TEST_CASE("stochastic_step: transitions record the commanded action, reward in [0,1]") {
  dop::CoopNavEnv env;
  RandomSource rng(19);
  StateId s = env.initial_state(rng);
  for (int i = 0; i < 10000; ++i) {
    dop::ActionId a = rng.uniform_int(env.action_count());
    dop::Transition tr = stochastic_step(env, s, a, 0.3, rng);
    REQUIRE(tr.a == a);
    REQUIRE(tr.r >= 0.0);
    REQUIRE(tr.r <= 1.0);
    s = tr.terminal ? env.initial_state(rng) : tr.s_next;
  }
}

TEST_CASE("fixed seeds reproduce transition sequences bit for bit") {
  dop::CoopNavEnv env;
  auto trace = [&env](std::uint64_t seed) {
    RandomSource rng(seed);
    StateId s = env.initial_state(rng);
    std::vector<std::pair<std::string, double>> out;
    for (int i = 0; i < 500; ++i) {
      dop::Transition tr = stochastic_step(env, s, rng.uniform_int(env.action_count()), 0.05, rng);
      out.emplace_back(tr.s_next.key, tr.r);
      s = tr.terminal ? env.initial_state(rng) : tr.s_next;
    }
    return out;
  };
  CHECK(trace(99) == trace(99));
  CHECK(trace(99) != trace(100));
}

TEST_CASE("derive_seed mixes base and salt") {
  CHECK(dop::derive_seed(42, 1) == dop::derive_seed(42, 1));
  CHECK(dop::derive_seed(42, 1) != dop::derive_seed(42, 2));
  CHECK(dop::derive_seed(42, 1) != dop::derive_seed(43, 1));
}

TEST_CASE("RandomSource::uniform_int stays in range") {
  RandomSource rng(3);
  for (int i = 0; i < 100000; ++i) {
    int v = rng.uniform_int(125);
    REQUIRE(v >= 0);
    REQUIRE(v < 125);
  }
  for (int i = 0; i < 1000; ++i) REQUIRE(rng.uniform_int(1) == 0);
}
