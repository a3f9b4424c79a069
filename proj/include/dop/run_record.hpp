#pragma once

// One benchmark measurement row: per (run, outer iteration).

namespace dop {

struct RunRecord {
  int iteration = 0;
  int run = 0;
  double cumulative_reward = 0.0;  // greedy evaluation from the run's fixed start
  long explored_total = 0;         // distinct states seen so far, cumulative
  long explored_new = 0;           // newly seen this iteration
  long dataset_size = 0;           // stored transitions after this iteration
  long wall_time_ms = 0;
};

}  // namespace dop
