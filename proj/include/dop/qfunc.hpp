#pragma once

// Action-value learners: a tabular map and a small dense network, both
// trained toward one-step bootstrapped targets on an append-only aggregated
// dataset. Checkpoints are versioned text files that round-trip exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dop/mdp.hpp"

namespace dop {

// Argmax with ties broken toward the lowest index.
inline ActionId argmax_action(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax_action: empty value vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

class QFunction {
 public:
  virtual ~QFunction() = default;

  virtual int action_count() const = 0;
  virtual std::vector<double> predict(const StateId& s) const = 0;

  // One optimizer step on the mini-batch. Targets are recomputed from the
  // current parameters before the step and held fixed during it. Returns the
  // mean squared error against those targets before the step.
  virtual double train_batch(const std::vector<const Transition*>& batch, double gamma,
                             double alpha) = 0;

  virtual std::unique_ptr<QFunction> clone() const = 0;
  virtual void save(std::ostream& out) const = 0;

  virtual long iteration() const = 0;
  virtual void set_iteration(long it) = 0;
};

// Bootstrapped one-step target: r + gamma * max_a' Q(s', a'), or just r when
// the transition ended the episode.
inline double td_target(const Transition& t, const QFunction& q, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("td_target: gamma must be in [0,1)");
  if (t.terminal) return t.r;
  std::vector<double> next = q.predict(t.s_next);
  return t.r + gamma * *std::max_element(next.begin(), next.end());
}

// Append-only transition store. Aggregation replaces a replay buffer: nothing
// is ever evicted, and iteration marks record where each outer iteration's
// block ends.
class AggregatedDataset {
 public:
  void append(Transition t) { items_.push_back(std::move(t)); }
  void append(std::vector<Transition> ts) {
    for (Transition& t : ts) items_.push_back(std::move(t));
  }
  void mark_iteration() { marks_.push_back(items_.size()); }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<std::size_t>& iteration_marks() const { return marks_; }

 private:
  std::vector<Transition> items_;
  std::vector<std::size_t> marks_;
};

// One pass over the whole dataset in shuffled order, split into mini-batches
// of at most batch_size (the tail batch may be short). Every stored
// transition is visited exactly once. Returns the size-weighted mean batch
// loss.
inline double train_epoch(QFunction& q, const AggregatedDataset& data, double gamma, double alpha,
                          int batch_size, RandomSource& rng) {
  if (data.empty()) throw std::invalid_argument("train_epoch: dataset is empty");
  if (batch_size < 1) throw std::invalid_argument("train_epoch: batch_size must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("train_epoch: alpha must be positive");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(static_cast<int>(i + 1))]);

  double loss_sum = 0.0;
  std::vector<const Transition*> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    batch.clear();
    std::size_t end = std::min(order.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
    loss_sum += q.train_batch(batch, gamma, alpha) * static_cast<double>(batch.size());
  }
  return loss_sum / static_cast<double>(data.size());
}

namespace detail {

inline void write_hex_string(std::ostream& out, const std::string& s) {
  static const char* digits = "0123456789abcdef";
  for (unsigned char c : s) out << digits[c >> 4] << digits[c & 0xF];
}

inline std::string read_hex_string(const std::string& hex) {
  if (hex.size() % 2 != 0) throw std::runtime_error("checkpoint: odd hex key length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw std::runtime_error("checkpoint: bad hex digit");
  };
  std::string out(hex.size() / 2, '\0');
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<char>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

// Hexfloat text serialization round-trips doubles exactly.
inline void write_double(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  out << buf;
}

inline double parse_double(const std::string& tok) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("checkpoint: malformed number '" + tok + "'");
  }
  if (pos != tok.size()) throw std::runtime_error("checkpoint: malformed number '" + tok + "'");
  return v;
}

}  // namespace detail

// Exact table over canonical state keys; unseen states read as zero for every
// action. The per-sample update is the usual TD rule
//   Q(s,a) += alpha * (target - Q(s,a)),
// so alpha = 1 fits each target exactly.
class TabularQ : public QFunction {
 public:
  explicit TabularQ(int action_count, std::uint64_t seed = 0) : actions_(action_count), seed_(seed) {
    if (action_count < 1) throw std::invalid_argument("TabularQ: action_count must be >= 1");
  }

  int action_count() const override { return actions_; }

  std::vector<double> predict(const StateId& s) const override {
    auto it = table_.find(s.key);
    if (it == table_.end()) return std::vector<double>(actions_, 0.0);
    return it->second;
  }

  double train_batch(const std::vector<const Transition*>& batch, double gamma,
                     double alpha) override {
    if (batch.empty()) throw std::invalid_argument("TabularQ::train_batch: empty batch");
    std::vector<double> targets(batch.size());
    std::vector<double> before(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      targets[i] = td_target(*batch[i], *this, gamma);
      before[i] = value(batch[i]->s.key, batch[i]->a);
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double err = targets[i] - before[i];
      loss += err * err;
      double& qsa = row(batch[i]->s.key)[batch[i]->a];
      qsa += alpha * (targets[i] - qsa);
    }
    return loss / static_cast<double>(batch.size());
  }

  std::unique_ptr<QFunction> clone() const override { return std::make_unique<TabularQ>(*this); }

  void save(std::ostream& out) const override {
    out << "dop-qfunc v1 tabular\n";
    out << "actions " << actions_ << "\n";
    out << "meta seed " << seed_ << " iteration " << iteration_ << "\n";
    // Sorted keys make the output canonical.
    std::map<std::string, const std::vector<double>*> sorted;
    for (const auto& [key, vals] : table_) sorted.emplace(key, &vals);
    out << "entries " << sorted.size() << "\n";
    for (const auto& [key, vals] : sorted) {
      detail::write_hex_string(out, key);
      for (double v : *vals) {
        out << ' ';
        detail::write_double(out, v);
      }
      out << "\n";
    }
  }

  long iteration() const override { return iteration_; }
  void set_iteration(long it) override { iteration_ = it; }

  std::size_t entry_count() const { return table_.size(); }
  std::uint64_t seed() const { return seed_; }

  // Used by checkpoint loading.
  void set_row(const std::string& key, std::vector<double> vals) {
    if (vals.size() != static_cast<std::size_t>(actions_))
      throw std::invalid_argument("TabularQ::set_row: wrong row width");
    table_[key] = std::move(vals);
  }

 private:
  std::vector<double>& row(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) it = table_.emplace(key, std::vector<double>(actions_, 0.0)).first;
    return it->second;
  }
  double value(const std::string& key, ActionId a) const {
    auto it = table_.find(key);
    return it == table_.end() ? 0.0 : it->second[a];
  }

  int actions_;
  std::uint64_t seed_;
  long iteration_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long steps = 0;
};

// Bias-corrected Adam update, applied in place.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& st,
                      double alpha, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: stale moment vectors");
  ++st.steps;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.steps));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grads[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    params[i] -= alpha * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps);
  }
}

// A (state, action, frozen target) triple for supervised fitting; used by the
// gradient path and by gradient checks.
struct QBatchSample {
  const StateId* s = nullptr;
  ActionId a = 0;
  double target = 0.0;
};

// One hidden ReLU layer, linear output head, one output per action. The batch
// loss is L = (1/B) * sum (target - Q(s,a))^2, so only the taken action's
// output row receives gradient.
class NeuralQ : public QFunction {
 public:
  NeuralQ(int input, int hidden, int actions, std::uint64_t seed)
      : input_(input), hidden_(hidden), actions_(actions), seed_(seed) {
    if (input < 1 || hidden < 1 || actions < 1)
      throw std::invalid_argument("NeuralQ: sizes must be >= 1");
    params_.resize(param_count());
    RandomSource rng(seed);
    auto init = [&rng](double* p, std::size_t n, int fan_in) {
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < n; ++i) p[i] = (2.0 * rng.uniform_real() - 1.0) * bound;
    };
    init(params_.data() + w1_off(), static_cast<std::size_t>(hidden_) * input_, input_);
    init(params_.data() + b1_off(), hidden_, input_);
    init(params_.data() + w2_off(), static_cast<std::size_t>(actions_) * hidden_, hidden_);
    init(params_.data() + b2_off(), actions_, hidden_);
  }

  int action_count() const override { return actions_; }
  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }

  std::vector<double> predict(const StateId& s) const override {
    check_input(s);
    std::vector<double> h(hidden_);
    forward_hidden(s.encoding.data(), h.data());
    std::vector<double> out(actions_);
    forward_output(h.data(), out.data());
    return out;
  }

  double train_batch(const std::vector<const Transition*>& batch, double gamma,
                     double alpha) override {
    if (batch.empty()) throw std::invalid_argument("NeuralQ::train_batch: empty batch");
    // Freeze targets for the whole batch before touching the parameters.
    std::vector<QBatchSample> samples(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      samples[i] = QBatchSample{&batch[i]->s, batch[i]->a, td_target(*batch[i], *this, gamma)};
    double pre_loss = 0.0;
    std::vector<double> grads = loss_gradients(samples, &pre_loss);
    adam_step(params_, grads, adam_, alpha);
    return pre_loss;
  }

  // Batch mean squared error against fixed targets.
  double loss(const std::vector<QBatchSample>& samples) const {
    if (samples.empty()) throw std::invalid_argument("NeuralQ::loss: empty batch");
    double total = 0.0;
    std::vector<double> h(hidden_);
    for (const QBatchSample& sm : samples) {
      check_input(*sm.s);
      forward_hidden(sm.s->encoding.data(), h.data());
      double qa = output_one(h.data(), sm.a);
      double err = qa - sm.target;
      total += err * err;
    }
    return total / static_cast<double>(samples.size());
  }

  // Gradient of loss() with respect to the flat parameter vector.
  std::vector<double> loss_gradients(const std::vector<QBatchSample>& samples,
                                     double* loss_out = nullptr) const {
    if (samples.empty()) throw std::invalid_argument("NeuralQ::loss_gradients: empty batch");
    std::vector<double> grads(params_.size(), 0.0);
    std::vector<double> h(hidden_);
    const double inv_b = 1.0 / static_cast<double>(samples.size());
    double total = 0.0;
    for (const QBatchSample& sm : samples) {
      check_input(*sm.s);
      const double* x = sm.s->encoding.data();
      forward_hidden(x, h.data());
      double qa = output_one(h.data(), sm.a);
      double err = qa - sm.target;
      total += err * err;
      double g = 2.0 * inv_b * err;
      const double* w2row = params_.data() + w2_off() + static_cast<std::size_t>(sm.a) * hidden_;
      double* gw2row = grads.data() + w2_off() + static_cast<std::size_t>(sm.a) * hidden_;
      for (int j = 0; j < hidden_; ++j) gw2row[j] += g * h[j];
      grads[b2_off() + sm.a] += g;
      for (int j = 0; j < hidden_; ++j) {
        if (h[j] <= 0.0) continue;  // ReLU gate: h[j] > 0 iff pre-activation > 0
        double dz = g * w2row[j];
        double* gw1row = grads.data() + w1_off() + static_cast<std::size_t>(j) * input_;
        for (int i = 0; i < input_; ++i) gw1row[i] += dz * x[i];
        grads[b1_off() + j] += dz;
      }
    }
    if (loss_out) *loss_out = total * inv_b;
    return grads;
  }

  std::unique_ptr<QFunction> clone() const override { return std::make_unique<NeuralQ>(*this); }

  void save(std::ostream& out) const override {
    out << "dop-qfunc v1 neural\n";
    out << "dims " << input_ << ' ' << hidden_ << ' ' << actions_ << "\n";
    out << "meta seed " << seed_ << " iteration " << iteration_ << "\n";
    out << "params " << params_.size() << "\n";
    for (double p : params_) {
      detail::write_double(out, p);
      out << "\n";
    }
  }

  long iteration() const override { return iteration_; }
  void set_iteration(long it) override { iteration_ = it; }

  const std::vector<double>& params() const { return params_; }
  void set_params(std::vector<double> p) {
    if (p.size() != params_.size()) throw std::invalid_argument("NeuralQ::set_params: size mismatch");
    params_ = std::move(p);
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return static_cast<std::size_t>(hidden_) * input_; }
  std::size_t w2_off() const { return b1_off() + hidden_; }
  std::size_t b2_off() const { return w2_off() + static_cast<std::size_t>(actions_) * hidden_; }
  std::size_t param_count() const { return b2_off() + actions_; }

  void check_input(const StateId& s) const {
    if (s.encoding.size() != static_cast<std::size_t>(input_))
      throw std::invalid_argument("NeuralQ: encoding size mismatch");
  }

  void forward_hidden(const double* x, double* h) const {
    const double* w1 = params_.data() + w1_off();
    const double* b1 = params_.data() + b1_off();
    for (int j = 0; j < hidden_; ++j) {
      double z = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * input_;
      for (int i = 0; i < input_; ++i) z += row[i] * x[i];
      h[j] = z > 0.0 ? z : 0.0;
    }
  }

  void forward_output(const double* h, double* out) const {
    const double* w2 = params_.data() + w2_off();
    const double* b2 = params_.data() + b2_off();
    for (int a = 0; a < actions_; ++a) {
      double z = b2[a];
      const double* row = w2 + static_cast<std::size_t>(a) * hidden_;
      for (int j = 0; j < hidden_; ++j) z += row[j] * h[j];
      out[a] = z;
    }
  }

  double output_one(const double* h, ActionId a) const {
    const double* row = params_.data() + w2_off() + static_cast<std::size_t>(a) * hidden_;
    const double* b2 = params_.data() + b2_off();
    double z = b2[a];
    for (int j = 0; j < hidden_; ++j) z += row[j] * h[j];
    return z;
  }

  int input_;
  int hidden_;
  int actions_;
  std::uint64_t seed_;
  long iteration_ = 0;
  std::vector<double> params_;
  AdamState adam_;
};

// Loads a checkpoint written by QFunction::save. Rejects unknown versions
// and kinds with a one-line diagnostic.
inline std::unique_ptr<QFunction> load_qfunction(std::istream& in) {
  std::string magic, version, kind;
  if (!(in >> magic >> version >> kind) || magic != "dop-qfunc")
    throw std::runtime_error("checkpoint: not a dop-qfunc file");
  if (version != "v1") throw std::runtime_error("checkpoint: unsupported version '" + version + "'");

  auto expect = [&in](const char* word) {
    std::string tok;
    if (!(in >> tok) || tok != word)
      throw std::runtime_error(std::string("checkpoint: expected '") + word + "'");
  };

  if (kind == "neural") {
    int input, hidden, actions;
    expect("dims");
    if (!(in >> input >> hidden >> actions)) throw std::runtime_error("checkpoint: bad dims");
    std::uint64_t seed;
    long iter;
    expect("meta");
    expect("seed");
    if (!(in >> seed)) throw std::runtime_error("checkpoint: bad seed");
    expect("iteration");
    if (!(in >> iter)) throw std::runtime_error("checkpoint: bad iteration");
    std::size_t n;
    expect("params");
    if (!(in >> n)) throw std::runtime_error("checkpoint: bad param count");
    auto q = std::make_unique<NeuralQ>(input, hidden, actions, seed);
    if (n != q->params().size()) throw std::runtime_error("checkpoint: param count mismatch");
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated params");
      p[i] = detail::parse_double(tok);
    }
    q->set_params(std::move(p));
    q->set_iteration(iter);
    return q;
  }
  if (kind == "tabular") {
    int actions;
    expect("actions");
    if (!(in >> actions)) throw std::runtime_error("checkpoint: bad action count");
    std::uint64_t seed;
    long iter;
    expect("meta");
    expect("seed");
    if (!(in >> seed)) throw std::runtime_error("checkpoint: bad seed");
    expect("iteration");
    if (!(in >> iter)) throw std::runtime_error("checkpoint: bad iteration");
    std::size_t n;
    expect("entries");
    if (!(in >> n)) throw std::runtime_error("checkpoint: bad entry count");
    auto q = std::make_unique<TabularQ>(actions, seed);
    for (std::size_t i = 0; i < n; ++i) {
      std::string hexkey;
      if (!(in >> hexkey)) throw std::runtime_error("checkpoint: truncated entries");
      std::vector<double> row(actions);
      for (int a = 0; a < actions; ++a) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated row");
        row[a] = detail::parse_double(tok);
      }
      q->set_row(detail::read_hex_string(hexkey), std::move(row));
    }
    q->set_iteration(iter);
    return q;
  }
  throw std::runtime_error("checkpoint: unknown kind '" + kind + "'");
}

// Epsilon-greedy acting plus noisy execution; the single step shape shared by
// rollouts, TD-search simulations and replay-buffer acting, so their
// trajectory distributions match by construction.
inline Transition eps_greedy_step(const Environment& env, const StateId& s, const QFunction& q,
                                  double eps, double p_noise, RandomSource& rng) {
  ActionId a = (eps > 0.0 && rng.bernoulli(eps)) ? rng.uniform_int(env.action_count())
                                                 : argmax_action(q.predict(s));
  return stochastic_step(env, s, a, p_noise, rng);
}

}  // namespace dop
