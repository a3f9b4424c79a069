#pragma once

// Benchmark harness: flat key=value experiment configs, seeded multi-run
// execution of every algorithm behind one evaluation protocol, CSV run
// records, and cross-run summaries.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dop/baselines.hpp"
#include "dop/dop.hpp"
#include "dop/envs.hpp"

namespace dop {

struct ExperimentConfig {
  // what to run
  std::string algorithm = "dop";    // dop | vanilla-uct | random-uct | qcp-tabular | dqn | td-search
  std::string environment = "coopnav";  // coopnav | gridworld1
  int runs = 10;
  std::uint64_t seed = 1;
  std::string out = "runs.csv";
  int threads = 0;  // 0: one worker per hardware thread, capped by runs
  // outer loop
  int iterations = 10;
  int timesteps = 15;
  double gamma = 0.8;
  double alpha = 0.15;
  double lambda0 = 0.5;
  double p_noise = 0.05;
  int batch_size = 32;
  int epochs_per_update = 1;
  int eval_episodes = 5;
  int hidden_width = 64;
  std::string checkpoint_dir;
  // search
  int horizon = 4;
  int rollouts = 3;
  int n_sim = 32;
  int rollout_cap = 20;
  double c_explore = 0.7;
  double eps_admissible = 0.3;
  double eps_rollout = 0.2;
  double xi = 0.0;
  bool mc_backup = false;
  bool collect_rollouts = false;
  // environment options
  bool randomize_targets = false;
  std::string target_cells = "0:3,3:0,3:3";  // coopnav targets, row:col triples
  std::string gw_target = "3:3";             // gridworld1 target, row:col
  // dqn baseline; the benchmark runs it at the protocol's learning rate,
  // while the standalone DqnConfig default favors small-data convergence
  int dqn_episodes_per_iteration = 5;
  int dqn_max_episode_steps = 25;
  int dqn_buffer_capacity = 10000;
  double dqn_alpha = 0.15;
  double dqn_eps_start = 1.0;
  double dqn_eps_final = 0.1;
  int dqn_eps_decay_episodes = 30;
  // td-search baseline; one-sample TD updates want a smaller step than the
  // epoch trainer, hence a separate learning rate
  int td_simulations = 8;
  int td_depth_cap = 10;
  double td_alpha = 0.1;
  double td_eps = 0.2;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest exact form
  return std::string(buf, res.ptr);
}

inline double parse_config_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid number for key '" + key + "': '" + value + "'");
  }
}

inline long parse_config_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: invalid integer for key '" + key + "': '" + value + "'");
  }
}

struct ConfigKey {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline ConfigKey key_of(const char* name, std::string ExperimentConfig::* member) {
  return {name, [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}
inline ConfigKey key_of(const char* name, int ExperimentConfig::* member) {
  return {name,
          [member, name](ExperimentConfig& c, const std::string& v) {
            c.*member = static_cast<int>(parse_config_int(name, v));
          },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}
inline ConfigKey key_of(const char* name, std::uint64_t ExperimentConfig::* member) {
  return {name,
          [member, name](ExperimentConfig& c, const std::string& v) {
            try {
              std::size_t pos = 0;
              c.*member = std::stoull(v, &pos);
              if (pos != v.size()) throw std::invalid_argument(v);
            } catch (const std::exception&) {
              throw std::invalid_argument("config: invalid integer for key '" + std::string(name) +
                                          "': '" + v + "'");
            }
          },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}
inline ConfigKey key_of(const char* name, double ExperimentConfig::* member) {
  return {name,
          [member, name](ExperimentConfig& c, const std::string& v) {
            c.*member = parse_config_double(name, v);
          },
          [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}
inline ConfigKey key_of(const char* name, bool ExperimentConfig::* member) {
  return {name,
          [member, name](ExperimentConfig& c, const std::string& v) {
            if (v == "true")
              c.*member = true;
            else if (v == "false")
              c.*member = false;
            else
              throw std::invalid_argument("config: key '" + std::string(name) +
                                          "' expects true or false, got '" + v + "'");
          },
          [member](const ExperimentConfig& c) { return c.*member ? "true" : "false"; }};
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      key_of("algorithm", &ExperimentConfig::algorithm),
      key_of("environment", &ExperimentConfig::environment),
      key_of("runs", &ExperimentConfig::runs),
      key_of("seed", &ExperimentConfig::seed),
      key_of("out", &ExperimentConfig::out),
      key_of("threads", &ExperimentConfig::threads),
      key_of("iterations", &ExperimentConfig::iterations),
      key_of("timesteps", &ExperimentConfig::timesteps),
      key_of("gamma", &ExperimentConfig::gamma),
      key_of("alpha", &ExperimentConfig::alpha),
      key_of("lambda0", &ExperimentConfig::lambda0),
      key_of("p_noise", &ExperimentConfig::p_noise),
      key_of("batch_size", &ExperimentConfig::batch_size),
      key_of("epochs_per_update", &ExperimentConfig::epochs_per_update),
      key_of("eval_episodes", &ExperimentConfig::eval_episodes),
      key_of("hidden_width", &ExperimentConfig::hidden_width),
      key_of("checkpoint_dir", &ExperimentConfig::checkpoint_dir),
      key_of("horizon", &ExperimentConfig::horizon),
      key_of("rollouts", &ExperimentConfig::rollouts),
      key_of("n_sim", &ExperimentConfig::n_sim),
      key_of("rollout_cap", &ExperimentConfig::rollout_cap),
      key_of("c_explore", &ExperimentConfig::c_explore),
      key_of("eps_admissible", &ExperimentConfig::eps_admissible),
      key_of("eps_rollout", &ExperimentConfig::eps_rollout),
      key_of("xi", &ExperimentConfig::xi),
      key_of("mc_backup", &ExperimentConfig::mc_backup),
      key_of("collect_rollouts", &ExperimentConfig::collect_rollouts),
      key_of("randomize_targets", &ExperimentConfig::randomize_targets),
      key_of("target_cells", &ExperimentConfig::target_cells),
      key_of("gw_target", &ExperimentConfig::gw_target),
      key_of("dqn_episodes_per_iteration", &ExperimentConfig::dqn_episodes_per_iteration),
      key_of("dqn_max_episode_steps", &ExperimentConfig::dqn_max_episode_steps),
      key_of("dqn_buffer_capacity", &ExperimentConfig::dqn_buffer_capacity),
      key_of("dqn_alpha", &ExperimentConfig::dqn_alpha),
      key_of("dqn_eps_start", &ExperimentConfig::dqn_eps_start),
      key_of("dqn_eps_final", &ExperimentConfig::dqn_eps_final),
      key_of("dqn_eps_decay_episodes", &ExperimentConfig::dqn_eps_decay_episodes),
      key_of("td_simulations", &ExperimentConfig::td_simulations),
      key_of("td_depth_cap", &ExperimentConfig::td_depth_cap),
      key_of("td_alpha", &ExperimentConfig::td_alpha),
      key_of("td_eps", &ExperimentConfig::td_eps),
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Parses `key = value` lines; blank lines and '#' comments are skipped.
// Unknown keys are rejected by name.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& k : detail::config_keys()) {
      if (key == k.name) {
        k.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : detail::config_keys()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += "\n";
  }
  return out;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace detail {

inline Cell parse_cell(const std::string& spec) {
  std::size_t colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("config: cell '" + spec + "' is not row:col");
  Cell c{static_cast<int>(parse_config_int("cell", trim(spec.substr(0, colon)))),
         static_cast<int>(parse_config_int("cell", trim(spec.substr(colon + 1))))};
  if (!on_grid(c)) throw std::invalid_argument("config: cell '" + spec + "' is off the 4x4 grid");
  return c;
}

}  // namespace detail

inline std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
  if (cfg.environment == "coopnav") {
    CoopNavEnv::Options opt;
    opt.randomize_targets = cfg.randomize_targets;
    std::string spec = cfg.target_cells;
    for (int j = 0; j < CoopNavEnv::kRobots; ++j) {
      std::size_t comma = spec.find(',');
      std::string one = comma == std::string::npos ? spec : spec.substr(0, comma);
      if (detail::trim(one).empty())
        throw std::invalid_argument("config: target_cells needs three row:col entries");
      opt.targets[j] = detail::parse_cell(detail::trim(one));
      spec = comma == std::string::npos ? "" : spec.substr(comma + 1);
    }
    if (!detail::trim(spec).empty())
      throw std::invalid_argument("config: target_cells has more than three entries");
    return std::make_unique<CoopNavEnv>(opt);
  }
  if (cfg.environment == "gridworld1")
    return std::make_unique<GridWorld1Env>(detail::parse_cell(cfg.gw_target));
  throw std::invalid_argument("unknown environment '" + cfg.environment + "'");
}

inline bool algorithm_is_tree(const std::string& algo) {
  return algo == "dop" || algo == "vanilla-uct" || algo == "random-uct" || algo == "qcp-tabular";
}

inline std::unique_ptr<QFunction> make_qfunction(const ExperimentConfig& cfg,
                                                 const Environment& env, std::uint64_t seed) {
  if (cfg.algorithm == "qcp-tabular")
    return std::make_unique<TabularQ>(env.action_count(), seed);
  return std::make_unique<NeuralQ>(env.encoding_size(), cfg.hidden_width, env.action_count(), seed);
}

namespace detail {

inline DopConfig to_dop_config(const ExperimentConfig& cfg, std::uint64_t run_seed,
                               const std::string& run_checkpoint_dir) {
  DopConfig dc;
  dc.iterations = cfg.iterations;
  dc.timesteps = cfg.timesteps;
  dc.gamma = cfg.gamma;
  dc.alpha = cfg.alpha;
  dc.lambda0 = cfg.lambda0;
  dc.p_noise = cfg.p_noise;
  dc.batch_size = cfg.batch_size;
  dc.epochs_per_update = cfg.epochs_per_update;
  dc.eval_episodes = cfg.eval_episodes;
  dc.eval_seed = derive_seed(run_seed, 0xE7A1);
  dc.checkpoint_dir = run_checkpoint_dir;
  dc.search.horizon = cfg.horizon;
  dc.search.rollouts = cfg.rollouts;
  dc.search.n_sim = cfg.n_sim;
  dc.search.rollout_cap = cfg.rollout_cap;
  dc.search.c_explore = cfg.c_explore;
  dc.search.eps_admissible = cfg.eps_admissible;
  dc.search.eps_rollout = cfg.eps_rollout;
  dc.search.xi = cfg.xi;
  dc.search.mc_backup = cfg.mc_backup;
  dc.search.collect_rollouts = cfg.collect_rollouts;
  if (cfg.algorithm == "vanilla-uct")
    dc.search.mode = SearchMode::kVanilla;
  else if (cfg.algorithm == "random-uct")
    dc.search.mode = SearchMode::kRandom;
  else
    dc.search.mode = SearchMode::kDop;
  return dc;
}

// DQN runs a block of acting episodes per outer iteration, then is scored
// with the shared greedy-evaluation protocol so its records line up with the
// planners'.
inline std::vector<RunRecord> run_dqn_experiment(const ExperimentConfig& cfg,
                                                 const Environment& env, std::uint64_t run_seed) {
  RandomSource rng(run_seed);
  NeuralQ q(env.encoding_size(), cfg.hidden_width, env.action_count(), derive_seed(run_seed, 0x51));
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.dqn_buffer_capacity));
  ExplorationLedger ledger;
  const std::uint64_t eval_seed = derive_seed(run_seed, 0xE7A1);
  RandomSource start_rng(derive_seed(eval_seed, 0));
  const StateId eval_start = env.initial_state(start_rng);

  std::vector<RunRecord> records;
  for (int i = 1; i <= cfg.iterations; ++i) {
    auto tick = std::chrono::steady_clock::now();
    long seen_before = ledger.total();
    DqnConfig dcfg;
    dcfg.episodes = cfg.dqn_episodes_per_iteration;
    dcfg.max_episode_steps = cfg.dqn_max_episode_steps;
    dcfg.eps = EpsSchedule{cfg.dqn_eps_start, cfg.dqn_eps_final, cfg.dqn_eps_decay_episodes};
    dcfg.batch_size = cfg.batch_size;
    dcfg.gamma = cfg.gamma;
    dcfg.alpha = cfg.dqn_alpha;
    dcfg.p_noise = cfg.p_noise;
    dcfg.episode_offset = (i - 1) * cfg.dqn_episodes_per_iteration;
    run_dqn(env, q, dcfg, buffer, ledger, rng);

    PolicySnapshot snapshot(q.clone());
    double reward = evaluate_policy(env, snapshot, cfg.timesteps,
                                    eval_seeds_for(eval_seed, i, cfg.eval_episodes), cfg.p_noise,
                                    &eval_start);
    auto tock = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.iteration = i;
    rec.cumulative_reward = reward;
    rec.explored_total = ledger.total();
    rec.explored_new = ledger.total() - seen_before;
    rec.dataset_size = buffer.total_pushed();
    rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(tock - tick).count();
    records.push_back(rec);
  }
  return records;
}

// TD-search mirrors the planner loop: greedy walk through the environment
// with a TD-search call at every visited state, evaluated the same way.
inline std::vector<RunRecord> run_td_experiment(const ExperimentConfig& cfg, const Environment& env,
                                                std::uint64_t run_seed) {
  RandomSource rng(run_seed);
  NeuralQ q(env.encoding_size(), cfg.hidden_width, env.action_count(), derive_seed(run_seed, 0x51));
  ExplorationLedger ledger;
  const std::uint64_t eval_seed = derive_seed(run_seed, 0xE7A1);
  RandomSource start_rng(derive_seed(eval_seed, 0));
  const StateId eval_start = env.initial_state(start_rng);

  TdSearchConfig tcfg;
  tcfg.simulations = cfg.td_simulations;
  tcfg.depth_cap = cfg.td_depth_cap;
  tcfg.eps = cfg.td_eps;
  tcfg.gamma = cfg.gamma;
  tcfg.alpha = cfg.td_alpha;
  tcfg.p_noise = cfg.p_noise;

  long sim_steps = 0;
  std::vector<RunRecord> records;
  for (int i = 1; i <= cfg.iterations; ++i) {
    auto tick = std::chrono::steady_clock::now();
    long seen_before = ledger.total();
    StateId state = env.initial_state(rng);
    ledger.record(state);
    for (int t = 1; t <= cfg.timesteps; ++t) {
      Transition walk =
          stochastic_step(env, state, argmax_action(q.predict(state)), cfg.p_noise, rng);
      ledger.record(walk.s_next);
      state = std::move(walk.s_next);
      if (env.terminal(state)) {
        state = env.initial_state(rng);
        ledger.record(state);
      }
      run_td_search(env, q, tcfg, state, rng, &ledger, &sim_steps);
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
    rec.explored_new = ledger.total() - seen_before;
    rec.dataset_size = sim_steps;
    rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(tock - tick).count();
    records.push_back(rec);
  }
  return records;
}

}  // namespace detail

// One complete run of cfg.algorithm under the given seed; records carry
// run_index. Runs are fully isolated: the output depends only on the config
// and run_seed.
inline std::vector<RunRecord> run_single(const ExperimentConfig& cfg, int run_index,
                                         std::uint64_t run_seed) {
  auto env = make_environment(cfg);
  std::vector<RunRecord> records;
  if (algorithm_is_tree(cfg.algorithm)) {
    std::string ckpt;
    if (!cfg.checkpoint_dir.empty())
      ckpt = cfg.checkpoint_dir + "/run" + std::to_string(run_index);
    RandomSource rng(run_seed);
    auto q = make_qfunction(cfg, *env, derive_seed(run_seed, 0x51));
    DopResult res = run_dop(*env, *q, detail::to_dop_config(cfg, run_seed, ckpt), rng);
    records = std::move(res.records);
  } else if (cfg.algorithm == "dqn") {
    records = detail::run_dqn_experiment(cfg, *env, run_seed);
  } else if (cfg.algorithm == "td-search") {
    records = detail::run_td_experiment(cfg, *env, run_seed);
  } else {
    throw std::invalid_argument("unknown algorithm '" + cfg.algorithm + "'");
  }
  for (RunRecord& r : records) r.run = run_index;
  return records;
}

// All runs, rows sorted by (run, iteration). Run k's seed is
// derive_seed(master, k), so runs are reproducible individually.
inline std::vector<RunRecord> run_all(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("run_all: runs must be >= 1");
  std::vector<std::vector<RunRecord>> per_run(cfg.runs);
  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, cfg.runs);

  auto work_one = [&cfg, &per_run](int k) {
    per_run[k - 1] = run_single(cfg, k, derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
  };
  if (workers == 1) {
    for (int k = 1; k <= cfg.runs; ++k) work_one(k);
  } else {
    std::atomic<int> next{1};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&next, &cfg, &work_one] {
        for (int k = next.fetch_add(1); k <= cfg.runs; k = next.fetch_add(1)) work_one(k);
      });
    for (std::thread& t : pool) t.join();
  }

  std::vector<RunRecord> all;
  for (auto& rs : per_run)
    for (RunRecord& r : rs) all.push_back(r);
  return all;
}

inline const char* kCsvHeader = "iteration,run,cumulative_reward,explored_total,explored_new,dataset_size,wall_time_ms";

inline void write_csv(std::ostream& out, const std::vector<RunRecord>& records,
                      const std::string& algorithm, const std::string& environment) {
  out << "# dop-bench csv v1 algorithm=" << algorithm << " environment=" << environment << "\n";
  out << kCsvHeader << "\n";
  char buf[32];
  for (const RunRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", r.cumulative_reward);
    out << r.iteration << ',' << r.run << ',' << buf << ',' << r.explored_total << ','
        << r.explored_new << ',' << r.dataset_size << ',' << r.wall_time_ms << "\n";
  }
}

// Runs the experiment and writes cfg.out. Returns the records for callers
// that want them in memory.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  std::vector<RunRecord> records = run_all(cfg);
  std::ofstream out(cfg.out);
  if (!out) throw std::runtime_error("cannot open output file '" + cfg.out + "'");
  write_csv(out, records, cfg.algorithm, cfg.environment);
  return records;
}

struct CsvRun {
  std::string algorithm;
  std::string environment;
  std::vector<RunRecord> records;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// Reads a run-record CSV, validating the version line and the header column
// by column so a mismatch names the offending column.
inline CsvRun read_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": empty file");
  if (line.size() && line.back() == '\r') line.pop_back();
  const std::string prefix = "# dop-bench csv v1 ";
  if (line.rfind(prefix, 0) != 0)
    throw std::runtime_error(source + ": missing 'dop-bench csv v1' version line");
  CsvRun run;
  std::istringstream meta(line.substr(prefix.size()));
  std::string field;
  while (meta >> field) {
    if (field.rfind("algorithm=", 0) == 0) run.algorithm = field.substr(10);
    if (field.rfind("environment=", 0) == 0) run.environment = field.substr(12);
  }
  if (run.algorithm.empty()) throw std::runtime_error(source + ": version line lacks algorithm=");

  if (!std::getline(in, line)) throw std::runtime_error(source + ": missing header row");
  if (line.size() && line.back() == '\r') line.pop_back();
  std::vector<std::string> have = detail::split_csv_line(line);
  std::vector<std::string> want = detail::split_csv_line(kCsvHeader);
  for (std::size_t i = 0; i < want.size() || i < have.size(); ++i) {
    if (i >= have.size())
      throw std::runtime_error(source + ": schema mismatch, missing column '" + want[i] + "'");
    if (i >= want.size())
      throw std::runtime_error(source + ": schema mismatch, unexpected column '" + have[i] + "'");
    if (have[i] != want[i])
      throw std::runtime_error(source + ": schema mismatch, expected column '" + want[i] +
                               "', found '" + have[i] + "'");
  }

  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cols = detail::split_csv_line(line);
    if (cols.size() != want.size())
      throw std::runtime_error(source + ": line " + std::to_string(lineno) + " has " +
                               std::to_string(cols.size()) + " columns, expected " +
                               std::to_string(want.size()));
    RunRecord r;
    try {
      r.iteration = static_cast<int>(std::stol(cols[0]));
      r.run = static_cast<int>(std::stol(cols[1]));
      r.cumulative_reward = std::stod(cols[2]);
      r.explored_total = std::stol(cols[3]);
      r.explored_new = std::stol(cols[4]);
      r.dataset_size = std::stol(cols[5]);
      r.wall_time_ms = std::stol(cols[6]);
    } catch (const std::exception&) {
      throw std::runtime_error(source + ": line " + std::to_string(lineno) + " has a malformed value");
    }
    run.records.push_back(r);
  }
  return run;
}

// Per (algorithm, iteration) aggregation across runs: mean and population
// standard deviation of reward and explored-state totals.
inline std::string summarize_csv(const std::vector<CsvRun>& runs) {
  struct Bucket {
    std::vector<double> rewards;
    std::vector<double> explored;
  };
  std::map<std::pair<std::string, int>, Bucket> buckets;
  for (const CsvRun& run : runs)
    for (const RunRecord& r : run.records) {
      Bucket& b = buckets[{run.algorithm, r.iteration}];
      b.rewards.push_back(r.cumulative_reward);
      b.explored.push_back(static_cast<double>(r.explored_total));
    }

  auto mean_of = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  auto std_of = [&mean_of](const std::vector<double>& xs) {
    double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
  };

  std::ostringstream out;
  out << "# dop-bench summary v1\n";
  out << "algorithm,iteration,mean_reward,std_reward,mean_explored_total,std_explored_total,runs\n";
  char buf[32];
  for (const auto& [key, b] : buckets) {
    out << key.first << ',' << key.second;
    for (double v : {mean_of(b.rewards), std_of(b.rewards), mean_of(b.explored), std_of(b.explored)}) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    }
    out << ',' << b.rewards.size() << "\n";
  }
  return out.str();
}

inline std::string summarize_files(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("summarize: no input files");
  std::vector<CsvRun> runs;
  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
    runs.push_back(read_csv(in, path));
  }
  return summarize_csv(runs);
}

}  // namespace dop
