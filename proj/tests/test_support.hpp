#pragma once

// Tiny deterministic environments used as oracles in the unit tests.

#include <stdexcept>
#include <string>
#include <vector>

#include "dop/mdp.hpp"

namespace dop_test {

// Linear chain of n states with per-state rewards; the last state is
// terminal. Action 0 advances, action 1 retreats (clamped at the ends), any
// further action stays put. Episodes start at state 0.
class ChainEnv : public dop::Environment {
 public:
  explicit ChainEnv(std::vector<double> rewards, int actions = 2)
      : rewards_(std::move(rewards)), actions_(actions) {
    if (rewards_.size() < 2) throw std::invalid_argument("ChainEnv: need at least two states");
    if (actions_ < 1) throw std::invalid_argument("ChainEnv: need at least one action");
  }

  int action_count() const override { return actions_; }
  int encoding_size() const override { return static_cast<int>(rewards_.size()); }

  dop::StateId at(int i) const {
    if (i < 0 || i >= static_cast<int>(rewards_.size()))
      throw std::invalid_argument("ChainEnv::at: index out of range");
    std::vector<double> enc(rewards_.size(), 0.0);
    enc[i] = 1.0;
    return dop::StateId{std::move(enc), std::string(1, static_cast<char>('0' + i))};
  }

  static int index_of(const dop::StateId& s) {
    for (std::size_t i = 0; i < s.encoding.size(); ++i)
      if (s.encoding[i] != 0.0) return static_cast<int>(i);
    throw std::invalid_argument("ChainEnv: empty encoding");
  }

  dop::StateId initial_state(dop::RandomSource&) const override { return at(0); }

  dop::StepOutcome step(const dop::StateId& s, dop::ActionId a, dop::RandomSource&) const override {
    if (a < 0 || a >= actions_) throw std::invalid_argument("ChainEnv::step: bad action");
    int pos = index_of(s);
    int next = pos;
    if (a == 0) next = pos + 1;
    if (a == 1) next = pos - 1;
    next = std::max(0, std::min(next, static_cast<int>(rewards_.size()) - 1));
    return dop::StepOutcome{at(next), rewards_[next], next == static_cast<int>(rewards_.size()) - 1};
  }

  double reward_of(const dop::StateId& s) const override { return rewards_[index_of(s)]; }
  bool terminal(const dop::StateId& s) const override {
    return index_of(s) == static_cast<int>(rewards_.size()) - 1;
  }

  std::vector<dop::StateId> enumerate_states() const {
    std::vector<dop::StateId> out;
    for (int i = 0; i < static_cast<int>(rewards_.size()); ++i) out.push_back(at(i));
    return out;
  }

 private:
  std::vector<double> rewards_;
  int actions_;
};

// One-shot bandit: from the single decision state every arm leads to the
// terminal state with that arm's fixed reward.
class BanditEnv : public dop::Environment {
 public:
  explicit BanditEnv(std::vector<double> arms) : arms_(std::move(arms)) {
    if (arms_.empty()) throw std::invalid_argument("BanditEnv: need at least one arm");
  }

  int action_count() const override { return static_cast<int>(arms_.size()); }
  int encoding_size() const override { return 2; }

  dop::StateId start() const { return dop::StateId{{1.0, 0.0}, "s"}; }
  dop::StateId done() const { return dop::StateId{{0.0, 1.0}, "d"}; }

  dop::StateId initial_state(dop::RandomSource&) const override { return start(); }

  dop::StepOutcome step(const dop::StateId& s, dop::ActionId a, dop::RandomSource&) const override {
    if (a < 0 || a >= action_count()) throw std::invalid_argument("BanditEnv::step: bad action");
    double r = terminal(s) ? 0.0 : arms_[a];
    return dop::StepOutcome{done(), r, true};
  }

  double reward_of(const dop::StateId&) const override { return 0.0; }
  bool terminal(const dop::StateId& s) const override { return s.encoding[1] != 0.0; }

 private:
  std::vector<double> arms_;
};

}  // namespace dop_test
