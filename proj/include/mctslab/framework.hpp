#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mctslab/algos.hpp"
#include "mctslab/common.hpp"
#include "mctslab/env.hpp"
#include "mctslab/rng.hpp"
#include "mctslab/tree.hpp"

namespace mctslab {

enum class ExecMode { virtual_time, parallel };

ExecMode exec_mode_from_string(const std::string& name);
std::string to_string(ExecMode mode);

// Dense identifiers for edges seen anywhere during a run, shared by all trees.
class EdgeIndex {
 public:
  std::uint32_t intern(EdgeKey k) {
    auto [it, inserted] = index_.try_emplace(k, static_cast<std::uint32_t>(keys_.size()));
    if (inserted) keys_.push_back(k);
    return it->second;
  }
  std::optional<std::uint32_t> find(EdgeKey k) const {
    auto it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  EdgeKey key(std::uint32_t i) const { return keys_.at(i); }
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_map<EdgeKey, std::uint32_t> index_;
  std::vector<EdgeKey> keys_;
};

struct TraceRow {
  std::int64_t rollout = 0;      // completion index, 1-based
  double step_or_ms = 0.0;       // initiated count (virtual) or wall-clock ms
  Action root_action = -1;
  double v_root = 0.0;           // value backpropagated to the root this rollout
  double v_star = 0.0;           // oracle value of the root
  int worker = -1;
  int tree_index = -1;
};

// Per-initiation snapshot taken right after selection: the incomplete counts
// and adjusted values the tree policy just consumed, plus the selected path.
struct SelectionSnapshot {
  std::vector<std::pair<std::uint32_t, int>> inflight;  // nonzero global counts
  std::vector<double> adjusted_q;  // dense over edges known at snapshot time
  std::vector<std::uint32_t> path;
  std::vector<double> path_inflight_avg;  // bu_uct threshold audit
};

struct RolloutTrace {
  std::vector<TraceRow> rows;
  std::vector<SelectionSnapshot> snapshots;
  EdgeIndex edges;
  std::vector<double> online_inflight_sum;  // per edge, accumulated during the run
  double v_star = 0.0;
  std::int64_t initiated = 0;
  std::string algo;
  int workers = 1;
  std::uint64_t seed = 0;
};

struct RunOptions {
  // Virtual simulation interval; 0 means the worker count. When
  // tau_sim_upper > 0 the interval is drawn uniformly from
  // [tau_sim_lower, tau_sim_upper] per task, exercising out-of-order returns.
  int tau_sim = 0;
  int tau_sim_lower = 0;
  int tau_sim_upper = 0;
  double delay_ms = 10.0;  // artificial simulation cost, parallel mode
  StateId root = -1;       // search root override; -1 uses the environment root
  bool record_snapshots = true;
  bool audit_flow = false;  // check sum(N+O) over root edges == initiated
  bool audit_sync_equality = false;  // check the copies agree after every sync
};

struct RunResult {
  SearchTree tree;
  RolloutTrace trace;
};

// The master rollout loop: tree selection, node selection via the modified
// tree policy, expansion, pseudo-statistics pre-update, simulation dispatch,
// wait, backpropagation with post-update and periodic synchronization.
// Virtual mode is single threaded and bit-reproducible from the seed; parallel
// mode runs M worker threads fed through task/result queues.
RunResult run_search(const Mdp& env, const SpecializationConfig& cfg,
                     std::int64_t n_rollouts, ExecMode mode, std::uint64_t seed,
                     const RunOptions& opt = {});

// Table-2 tree selection. Indices are 1-based as in the configuration tables:
// leafp cycles round robin, rootp follows the tree updated by the previous
// backpropagation, the treep family draws uniformly.
int select_tree(int m_prev, int m_hat, const SpecializationConfig& cfg,
                RngStream& rng);

// Argmax of root visit counts; ties prefer the higher mean, then the lower
// action index.
Action recommend_action(const SearchTree& tree);

}  // namespace mctslab
