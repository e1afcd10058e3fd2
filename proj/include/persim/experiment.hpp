#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "persim/config.hpp"
#include "persim/evaluation.hpp"

namespace persim {

struct RunKey {
  int repetition = 0;
  Algorithm algorithm = Algorithm::Uniform;
  TrainMode mode = TrainMode::Full;
  int agent_seed = 0;
};

// Canonical ordering of runs in every output: repetition, then algorithm and
// mode by name, then agent seed.
bool run_key_less(const RunKey& a, const RunKey& b);

struct RunSeries {
  RunKey key;
  std::vector<EvalRecord> records;
  bool aborted = false;
  std::string error;
};

struct AggregateRow {
  std::string algorithm;
  std::string mode;
  long step = 0;
  double mean_r = 0;  // mean of per-run mean_r
  double min_r = 0;   // min of per-run min_r
  double max_r = 0;   // max of per-run max_r
  int n_runs = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunSeries> runs;  // sorted by run_key_less
  std::vector<AggregateRow> aggregates;
  double wall_seconds = 0;
};

// Test instrumentation; hooks may fire concurrently from worker threads.
struct RunHooks {
  std::function<void(const RunKey&, long step, std::span<const real> state)> on_state;
};

// Stream labels for one run. The state stream depends only on (master seed,
// repetition): every algorithm, mode and agent seed within a repetition sees
// the identical state sequence. All other streams are private to the run.
std::string run_label(const RunKey& key);
std::string state_stream_label(int repetition);

// One training run: interact for `budget` steps (sample state -> observe ->
// act -> reward -> store -> update), greedy-evaluating every `cadence` steps.
std::vector<EvalRecord> train_run(const EnvView& view, Agent& agent, const EvalContext& eval_ctx,
                                  RngStream& state_rng, RngStream& act_rng,
                                  RngStream& update_rng, RngStream& eval_rng, long budget,
                                  long cadence, const RunKey& key, const RunHooks* hooks);

// The full protocol: per repetition, generate an environment, fit the
// clustering, then train every (algorithm, mode, agent seed) combination on
// the shared state stream; aborted runs are recorded, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks = nullptr);

std::vector<AggregateRow> aggregate_runs(const std::vector<RunSeries>& runs);

}  // namespace persim
