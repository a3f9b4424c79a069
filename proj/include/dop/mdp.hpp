#pragma once

// Core MDP vocabulary: states with canonical keys, transitions, the
// environment interface, and the noisy execution step shared by every
// algorithm in the toolkit.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dop/rng.hpp"

namespace dop {

using ActionId = int;

// A state is its feature encoding plus a canonical key. Identical encodings
// always map to identical keys, so key equality can stand in for exact state
// equality in hash sets and tabular lookups.
struct StateId {
  std::vector<double> encoding;
  std::string key;
};

// Byte-level canonicalization of an encoding (exact keying).
inline std::string exact_key(const std::vector<double>& enc) {
  std::string k(enc.size() * sizeof(double), '\0');
  if (!enc.empty()) std::memcpy(k.data(), enc.data(), k.size());
  return k;
}

// Continuous encodings are keyed by quantizing each coordinate to multiples
// of xi, so states within the comparison threshold share buckets.
inline std::string quantized_key(const std::vector<double>& enc, double xi) {
  if (!(xi > 0.0)) throw std::invalid_argument("quantized_key: xi must be positive");
  std::string k(enc.size() * sizeof(std::int64_t), '\0');
  for (std::size_t i = 0; i < enc.size(); ++i) {
    std::int64_t q = static_cast<std::int64_t>(std::llround(enc[i] / xi));
    std::memcpy(k.data() + i * sizeof(q), &q, sizeof(q));
  }
  return k;
}

inline StateId make_state(std::vector<double> enc, double xi = 0.0) {
  std::string key = xi > 0.0 ? quantized_key(enc, xi) : exact_key(enc);
  return StateId{std::move(enc), std::move(key)};
}

// L1 comparison with inclusive threshold; xi = 0 is exact equality.
inline bool states_equal(const StateId& a, const StateId& b, double xi) {
  if (a.encoding.size() != b.encoding.size())
    throw std::invalid_argument("states_equal: encoding size mismatch");
  if (xi < 0.0) throw std::invalid_argument("states_equal: xi must be >= 0");
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.encoding.size(); ++i) {
    l1 += std::abs(a.encoding[i] - b.encoding[i]);
    if (l1 > xi) return false;
  }
  return true;
}

// One executed step. `a` is the commanded action; under execution noise the
// environment may have carried out a different one.
struct Transition {
  StateId s;
  ActionId a = 0;
  StateId s_next;
  double r = 0.0;
  bool terminal = false;
};

struct StepOutcome {
  StateId next;
  double reward = 0.0;
  bool terminal = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int action_count() const = 0;
  virtual int encoding_size() const = 0;

  // Draw from the start-state distribution.
  virtual StateId initial_state(RandomSource& rng) const = 0;

  // Deterministic environments ignore the random source; stochastic ones must
  // be a pure function of (state, action, draw sequence).
  virtual StepOutcome step(const StateId& s, ActionId a, RandomSource& rng) const = 0;

  virtual double reward_of(const StateId& s) const = 0;
  virtual bool terminal(const StateId& s) const = 0;
};

// Executes `a` except that with probability p_noise a uniformly random action
// (possibly `a` again) is carried out instead. The returned transition records
// the commanded action, not the executed one.
inline Transition stochastic_step(const Environment& env, const StateId& s, ActionId a,
                                  double p_noise, RandomSource& rng) {
  if (a < 0 || a >= env.action_count())
    throw std::invalid_argument("stochastic_step: action index out of range");
  ActionId executed = a;
  // Short-circuit keeps p_noise = 0 draw-for-draw identical to env.step.
  if (p_noise > 0.0 && rng.bernoulli(p_noise)) executed = rng.uniform_int(env.action_count());
  StepOutcome out = env.step(s, executed, rng);
  return Transition{s, a, std::move(out.next), out.reward, out.terminal};
}

}  // namespace dop
