#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mctslab/algos.hpp"
#include "mctslab/common.hpp"
#include "mctslab/env.hpp"
#include "mctslab/framework.hpp"
#include "mctslab/tree.hpp"

namespace mctslab {

// Sum over the trace of (oracle value - per-rollout root value), Eq.-style
// cumulative regret. The oracle column must be populated.
double cumulative_regret(const RolloutTrace& trace);

// Noise-free variant for depth-2 tasks: replaces each rollout's value by the
// expected simulation return of the selected arm, estimating the same
// expectation with the simulation noise integrated out analytically.
double expected_regret_depth_two(const RolloutTrace& trace, const Mdp& env);

// mean(parallel regrets) - mean(sequential regrets); sizes must match.
double excess_regret(const std::vector<double>& parallel_regrets,
                     const std::vector<double>& sequential_regrets);

// Percentile bootstrap interval for mean(a) - mean(b).
std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a,
                                                 const std::vector<double>& b,
                                                 double confidence, int resamples,
                                                 std::uint64_t seed);

struct RegretBound {
  double r_uct = 0.0;   // sequential term
  double excess = 0.0;  // parallelization term, vanishing in n
  double total() const { return r_uct + excess; }
};

// Depth-2 cumulative-regret bound: r_uct sums (8/gap + 2*gap)*ln(n) + gap over
// suboptimal arms, excess is 4*M*sum(gap^2)/sqrt(ln(n)). Requires n >= 2.
RegretBound wu_uct_regret_bound(int arms, const std::vector<double>& deltas,
                                std::int64_t n, int workers);

struct GapEstimate {
  double gap = 0.0;
  double stderr_ = 0.0;
  double parallel_q = 0.0;
  double sequential_q = 0.0;
  std::int64_t m = 0;
};

// Action value gap at one edge: |parallel_q_bar - mean(Q_seq_m)| where Q_seq_m
// is the root value average of a sequential search started from `child` and
// run for m rollouts, repeated `trials` times with independent seeds. Returns
// nothing when m == 0.
std::optional<GapEstimate> action_value_gap(const Mdp& env, StateId child,
                                            double parallel_q_bar, std::int64_t m,
                                            int trials, std::uint64_t seed,
                                            const CPolicy& seq_c = {});

struct SurrogateGaps {
  std::optional<double> g_star;  // max over the child's edges of their mean inflight
  std::optional<double> g1;      // std of the edge's recorded returns
  std::optional<double> g2;      // std of the edge's per-rollout adjusted value
  std::optional<double> g3;      // coefficient of variation of the returns
  std::optional<double> g4;      // the edge's own mean inflight
};

SurrogateGaps surrogate_gaps(const RolloutTrace& trace, const SearchTree& tree,
                             StateId s, Action a);

// Mean inflight count of an edge over the rollouts, from stored snapshots and
// from the online accumulator (two code paths over the same data).
std::optional<double> o_bar_from_snapshots(const RolloutTrace& trace, StateId s,
                                           Action a);
std::optional<double> o_bar_online(const RolloutTrace& trace, StateId s, Action a);

struct EdgeGapRow {
  StateId state = -1;
  Action action = -1;
  double gap = 0.0;
  double gap_stderr = 0.0;
  std::int64_t weight = 0;  // completed visit count
  SurrogateGaps surrogates;
};

struct GapReport {
  std::vector<EdgeGapRow> edges;
  double weighted_gap = 0.0;  // visit-count weighted mean over edges
  std::optional<double> weighted_g_star;
  std::optional<double> weighted_g1;
  std::optional<double> weighted_g2;
  std::optional<double> weighted_g3;
  std::optional<double> weighted_g4;
};

// Per-edge gap measurement over a finished run: for every edge with at least
// `min_weight` completed visits, compare the final adjusted value against the
// sequential oracle started from the edge's child.
GapReport measure_gaps(const Mdp& env, const SearchTree& tree,
                       const RolloutTrace& trace, const SpecializationConfig& cfg,
                       int trials, std::uint64_t seed, std::int64_t min_weight = 1);

struct ConditionVerdict {
  bool n_checkable = true;
  bool n_pass = false;
  int n_witness = -1;  // first x in [0, M-1] with f(x) < x
  bool q_checkable = true;
  double q_gap = 0.0;     // worst battery-cell gap estimate
  double q_ci_lo = 0.0;   // CI of that cell's gap
  double q_ci_hi = 0.0;
  bool q_violated = false;
  std::string note;
};

// Theorem-style necessary-condition checks: the count condition is evaluated
// symbolically over x in [0, M-1]; the value condition is estimated by Monte
// Carlo on a small depth-2 battery of (completed, incomplete) cells with a
// normal 95% interval.
ConditionVerdict check_necessary_conditions(const SpecializationConfig& cfg,
                                            const Mdp& env, int workers, int trials,
                                            std::uint64_t seed = 7);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mctslab
