#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "mctslab/algos.hpp"
#include "mctslab/common.hpp"
#include "mctslab/env.hpp"

namespace mctslab {

// One backpropagated return at an edge. `synced` mirrors the flag that marks
// whether the value already took part in a tree synchronization; `sim_id`
// tags the originating simulation so merges can be audited for double counts.
struct ReturnRecord {
  double value = 0.0;
  std::uint64_t sim_id = 0;
  bool synced = false;
};

// Per-edge return history split into an immutable shared chain of already
// synchronized records plus a small unsynchronized tail. Synchronization can
// then merge and copy trees without rewriting the whole history each time.
class RecordSet {
 public:
  struct Chunk {
    std::vector<ReturnRecord> items;
    std::shared_ptr<const Chunk> prev;
    std::int64_t total = 0;  // records in prev chain plus items
    double sum = 0.0;        // running value sum in chain order
  };
  using ChunkPtr = std::shared_ptr<const Chunk>;

  void append(double value, std::uint64_t sim_id) {
    unsynced_.push_back(ReturnRecord{value, sim_id, false});
  }

  std::int64_t total() const {
    return (synced_ ? synced_->total : 0) + static_cast<std::int64_t>(unsynced_.size());
  }
  std::int64_t synced_total() const { return synced_ ? synced_->total : 0; }
  double synced_sum() const { return synced_ ? synced_->sum : 0.0; }
  const std::vector<ReturnRecord>& unsynced() const { return unsynced_; }
  const ChunkPtr& synced_chain() const { return synced_; }

  void adopt(ChunkPtr chain) {
    synced_ = std::move(chain);
    unsynced_.clear();
  }

  // Flags every record as synchronized without merging (single-tree case).
  void mark_all_synced();

  template <class F>
  void for_each(F&& f) const {
    std::vector<const Chunk*> chunks;
    for (const Chunk* c = synced_.get(); c != nullptr; c = c->prev.get())
      chunks.push_back(c);
    for (auto it = chunks.rbegin(); it != chunks.rend(); ++it)
      for (const ReturnRecord& r : (*it)->items) f(r);
    for (const ReturnRecord& r : unsynced_) f(r);
  }

  std::vector<ReturnRecord> all() const {
    std::vector<ReturnRecord> out;
    out.reserve(static_cast<std::size_t>(total()));
    for_each([&](const ReturnRecord& r) { out.push_back(r); });
    return out;
  }

  // Appends `items` (already flagged) to `prev`, accumulating count and sum
  // left to right so merged means are reproducible.
  static ChunkPtr extend(ChunkPtr prev, std::vector<ReturnRecord> items);

 private:
  ChunkPtr synced_;
  std::vector<ReturnRecord> unsynced_;
};

struct EdgeStats {
  StateId child = -1;
  std::int64_t visit_count = 0;  // completed simulations through the edge
  int inflight = 0;              // initiated but not yet completed
  double q = 0.0;                // mean action value
  double pseudo_q = 0.0;
  double pseudo_n = 0.0;
  double inflight_avg = 0.0;     // running average of inflight (bu_uct)
  bool aggregated = false;       // bu_uct collapsed this edge's visit count
  RecordSet records;
};

struct NodeInfo {
  int depth = 0;
  StateId parent_state = -1;
  Action parent_action = -1;
  int expanded_children = 0;
  Welford value_stats;  // all values backpropagated through the node
};

struct PathStep {
  StateId state = -1;
  Action action = -1;
};
using Path = std::vector<PathStep>;

// In-flight counts pooled across the coordinator's trees. Each tree keeps the
// counts it dispatched itself; this ledger provides the global view the tree
// policy consumes.
class GlobalInflight {
 public:
  int at(EdgeKey k) const {
    auto it = counts_.find(k);
    return it == counts_.end() ? 0 : it->second;
  }
  void add(EdgeKey k, int delta) {
    int& v = counts_[k];
    v += delta;
    if (v < 0) throw InvariantViolation("global incomplete count underflow");
  }
  template <class F>
  void for_each_nonzero(F&& f) const {
    for (const auto& [k, v] : counts_)
      if (v > 0) f(k, v);
  }

 private:
  std::unordered_map<EdgeKey, int> counts_;
};

class SearchTree {
 public:
  SearchTree(const Mdp* env, StateId root);

  const Mdp& env() const { return *env_; }
  StateId root() const { return root_; }

  bool has_node(StateId s) const { return nodes_.count(s) != 0; }
  const NodeInfo& node(StateId s) const;
  NodeInfo& node(StateId s);
  const EdgeStats* edge(StateId s, Action a) const;
  EdgeStats* edge(StateId s, Action a);
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  int inflight_of(StateId s, Action a, const GlobalInflight* global) const;

  // Lowest-index action of s that may still be expanded under the width cap,
  // or -1 when the node is fully expanded.
  Action first_unexpanded(StateId s, int width_cap) const;

  // Tree policy over the expanded children of s. Edges whose adjusted count is
  // zero are taken first in index order; otherwise the UCB argmax with ties
  // broken toward the lowest action index.
  Action select_action(StateId s, const SpecializationConfig& cfg, double c,
                       const GlobalInflight* global = nullptr) const;

  // Adds the child node reached by (s, a) with zeroed statistics.
  StateId expand(StateId s, Action a, int max_depth = 1 << 30);

  // Increment the incomplete count along the path and refresh the stored
  // pseudo statistics.
  void pre_update(const Path& path, const SpecializationConfig& cfg,
                  GlobalInflight* global = nullptr);

  // Standard recursive update: visit counts, value recursion, mean update,
  // record append, incomplete-count decrement and pseudo post-update. Returns
  // the value propagated to the root.
  double backpropagate(const Path& path, double leaf_value,
                       const SpecializationConfig& cfg, std::uint64_t sim_id,
                       GlobalInflight* global = nullptr);

  // bu_uct walk replacing pre_update: also maintains the running-average
  // incomplete count, child to root.
  void incomplete_update(const Path& path, GlobalInflight* global = nullptr);

  // bu_uct walk replacing backpropagate: the averaged value includes the
  // edge's own reward (cumulative reward recursion).
  double complete_update(const Path& path, double leaf_value, std::uint64_t sim_id,
                         GlobalInflight* global = nullptr);

  // bu_uct: collapse the parent edge of s to a single aggregated sample.
  // No-op when the visit count is already <= 1 or s is the root.
  void aggregate_parent_edge(StateId s);

  std::vector<EdgeKey> sorted_edge_keys() const;
  template <class F>
  void for_each_edge(F&& f) const {
    for (const auto& [k, e] : edges_) f(k, e);
  }
  template <class F>
  void for_each_edge_mut(F&& f) {
    for (auto& [k, e] : edges_) f(k, e);
  }

  // Rebuilds per-node value statistics from edge records (used after merges).
  void rebuild_node_stats();

 private:
  void check_node(StateId s) const;

  const Mdp* env_;
  StateId root_;
  std::unordered_map<StateId, NodeInfo> nodes_;
  std::unordered_map<EdgeKey, EdgeStats> edges_;

  friend SearchTree sync_trees(const std::vector<SearchTree>& trees,
                               const SpecializationConfig* cfg,
                               bool rebuild_values);
};

// The multi-tree synchronization: phase 1 unions the topologies, phase 2 pools
// records (synced ones taken from the first tree only, unsynced ones from all
// trees re-flagged), recomputes per-edge mean and count from the pooled set
// and sums the incomplete counts. The caller copies the result back.
// rebuild_values controls whether per-node value statistics are recomputed
// from the pooled records; only a per-node exploration constant needs them
// between rollouts.
SearchTree sync_trees(const std::vector<SearchTree>& trees,
                      const SpecializationConfig* cfg = nullptr,
                      bool rebuild_values = true);

// Statistics equality ignoring in-flight attribution (used by equivalence
// tests): same topology, visit counts, means and record histories.
bool stats_equal(const SearchTree& a, const SearchTree& b, double tol = 0.0);

}  // namespace mctslab
