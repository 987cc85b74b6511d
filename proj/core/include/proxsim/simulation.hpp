/// Closed-loop run driver: fixed-step truth integration with nearest-tick
/// sensor/guidance scheduling, measurement synthesis, fusion, and logging.
#pragma once

#include <cstdint>

#include "proxsim/logging.hpp"
#include "proxsim/metrics.hpp"
#include "proxsim/scenario.hpp"

namespace proxsim {

/// Maps a fixed-rate sample stream onto simulation ticks: sample n lands on
/// tick round(n * sim_rate / rate).  due() must be polled every tick.
class TickSchedule {
 public:
  TickSchedule(double rate_hz, double sim_rate_hz)
      : ratio_(sim_rate_hz / rate_hz) {}

  long tick_for(long index) const { return std::llround(double(index) * ratio_); }

  bool due(long tick) {
    if (tick != tick_for(next_index_)) return false;
    ++next_index_;
    return true;
  }

  long fired() const { return next_index_; }

 private:
  double ratio_;
  long next_index_{0};
};

struct RunResult {
  RunLogs logs;
  RunMetrics metrics;
};

/// Simulate one scenario end to end.  Start randomization (when configured)
/// draws from the scenario seed, so a Monte Carlo batch of one run reproduces
/// a single run bit for bit.  Estimator failures and NaNs end the run early
/// with a FAILED record in the phase log; configuration problems throw
/// ConfigError before anything runs.
RunResult run_scenario(const Scenario& sc);

}  // namespace proxsim
