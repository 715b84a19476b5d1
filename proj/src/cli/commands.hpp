#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mctslab/algos.hpp"
#include "mctslab/env.hpp"
#include "mctslab/framework.hpp"

namespace mctslab::cli {

// Exit codes: 0 success, 2 configuration error, 3 invariant violation,
// 4 noisy-timing flag.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitNoisy = 4;

struct ExperimentConfig {
  std::string algo = "uct";
  std::vector<std::string> envs;  // presets or @file.json
  int workers = 1;
  std::int64_t rollouts = 128;
  int repetitions = 1;
  std::uint64_t seed = 1;
  std::string mode = "virtual";
  int tau_sim = 0;
  int tau_sim_lower = 0;
  int tau_sim_upper = 0;
  std::int64_t tau_syn = -1;  // -1 keeps the algorithm's own interval
  double delay_ms = 10.0;
  std::optional<double> r_vl;
  std::optional<double> n_vl;
  std::optional<double> m_max;
  std::string c_policy = "std";  // "std" (per-node) or "fixed"
  double c_value = 1.0;
  int max_depth = 100;
  int max_width = 20;
  std::string out_dir = "out";
  int gap_trials = 32;
  std::int64_t gap_min_weight = 1;
  // sweep
  std::vector<std::string> algos;
  std::vector<int> workers_list;
  int seeds = 1;
  int rand_configs = 0;
  // speedup
  int speedup_reps = 3;
  double noise_threshold = 0.25;
};

// Parses "depth2:K=4,gaps=0+0.2,sigma=1,seed=1", "rtree:D=4,K=4,seed=3,..."
// or "@file.json".
Mdp parse_env(const std::string& preset);

SpecializationConfig build_config(const ExperimentConfig& cfg, const std::string& algo,
                                  int workers);
std::string resolved_config_json(const ExperimentConfig& cfg,
                                 const SpecializationConfig& spec,
                                 const std::string& env_preset);

int cmd_run(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg);
int cmd_diagnose(const ExperimentConfig& cfg);
int cmd_speedup(const ExperimentConfig& cfg);

// Full argv-level entry point used by the binary and by tests.
int run_command(const std::vector<std::string>& args);

}  // namespace mctslab::cli
