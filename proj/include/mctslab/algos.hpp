#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "mctslab/common.hpp"

namespace mctslab {

enum class AlgoKind { uct, leafp, rootp, treep, wu_uct, vl_hard, vl_soft, bu_uct, custom };

std::string to_string(AlgoKind kind);
AlgoKind algo_kind_from_string(const std::string& name);

struct BuUctParams {
  double m_max = 0.8;  // edges with inflight_avg >= m_max * workers are unselectable
};

struct CPolicy {
  enum class Mode { fixed, per_node_std };
  Mode mode = Mode::per_node_std;
  double value = 1.0;  // used in fixed mode
};

// Statistics of one edge as seen by the pseudo-statistic laws. `o` is the
// number of initiated-but-incomplete simulations through the edge.
struct EdgeView {
  double q = 0.0;
  std::int64_t n = 0;
  int o = 0;
};

// The tuple that turns the general rollout loop into a named algorithm:
// weights and pseudo-statistic laws for the tree policy, plus how trees are
// selected and how often they are synchronized.
struct SpecializationConfig {
  std::string name = "uct";
  AlgoKind kind = AlgoKind::uct;
  int workers = 1;              // M
  int tree_count = 1;
  std::int64_t sync_interval = 1;  // tau_syn; 0 means "after the final rollout"
  // Hold new dispatches while a synchronization boundary sits inside the
  // in-flight window, so the M rollouts of one cycle all see the synced state
  // (the leafp realization: M simultaneous simulations of one leaf position).
  bool cycle_barrier = false;
  double r_vl = 1.0;
  double n_vl = 1.0;
  std::optional<BuUctParams> bu;
  CPolicy c_policy;
  int max_depth = 100;  // selection stops below this depth
  int max_width = 20;   // expanded children per node
  // Optional custom pseudo-count law f(o), for the custom kind and the
  // necessary-condition checker.
  std::function<double(double)> custom_pseudo_n;

  double own_weight(const EdgeView& e) const;     // weight on the real mean
  double pseudo_weight(const EdgeView& e) const;  // weight on the pseudo value
  double pseudo_value(const EdgeView& e) const;
  double pseudo_count(const EdgeView& e) const;
  double adjusted_q(const EdgeView& e) const;  // own*q + pseudo_weight*pseudo_value
  double adjusted_n(const EdgeView& e) const;  // n + pseudo_count

  // The pseudo-count law restricted to a function of the incomplete count,
  // clamped to be nonnegative. Every built-in kind admits this form.
  bool pseudo_count_is_o_only() const;
  double pseudo_count_of_o(double o) const;
};

struct AlgoParams {
  std::optional<double> r_vl;
  std::optional<double> n_vl;
  std::optional<double> m_max;
  std::optional<CPolicy> c_policy;
  std::optional<int> max_depth;
  std::optional<int> max_width;
  std::function<double(double)> custom_pseudo_n;
};

// Builds the named specialization row for M workers. VL kinds require their
// penalty parameters and bu_uct requires m_max; everything else is optional.
SpecializationConfig make_specialization(AlgoKind kind, int workers,
                                         const AlgoParams& params = {});
SpecializationConfig make_specialization(const std::string& kind, int workers,
                                         const AlgoParams& params = {});

// Thresholded action value: q when the running-average incomplete count sits
// below m_max * workers, -infinity otherwise (strict inequality boundary).
double bu_uct_modified_q(double q, double inflight_avg, const BuUctParams& params,
                         int workers);

}  // namespace mctslab
