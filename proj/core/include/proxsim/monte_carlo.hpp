/// Monte Carlo batches: repeated runs of one scenario with per-run seeds.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "proxsim/metrics.hpp"
#include "proxsim/scenario.hpp"

namespace proxsim {

struct BatchResult {
  std::vector<BatchRunRow> rows;
  BatchAggregate aggregate;
};

/// Run `runs` copies of the scenario with seed_base + i.  Runs are isolated
/// (fresh RNG per run) and ordered, so the batch is deterministic and a
/// one-run batch reproduces run_scenario with the same seed.  Per-run
/// failures land as flagged rows, they do not stop the batch.
/// `on_run` (optional) is invoked after each run with its row.
BatchResult run_monte_carlo(const Scenario& base, int runs, std::uint64_t seed_base,
                            const std::function<void(const BatchRunRow&)>& on_run = {});

}  // namespace proxsim
