#include "proxsim/monte_carlo.hpp"

#include "proxsim/simulation.hpp"

namespace proxsim {

BatchResult run_monte_carlo(const Scenario& base, int runs, std::uint64_t seed_base,
                            const std::function<void(const BatchRunRow&)>& on_run) {
  BatchResult result;
  result.rows.reserve(size_t(std::max(runs, 0)));
  for (int i = 0; i < runs; ++i) {
    Scenario sc = base;
    sc.seed = seed_base + std::uint64_t(i);
    BatchRunRow row;
    row.run = i;
    row.seed = sc.seed;
    row.metrics = run_scenario(sc).metrics;
    if (on_run) on_run(row);
    result.rows.push_back(std::move(row));
  }
  result.aggregate = aggregate_metrics(result.rows);
  return result;
}

}  // namespace proxsim
