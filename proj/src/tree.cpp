#include "mctslab/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mctslab {

void RecordSet::mark_all_synced() {
  if (unsynced_.empty()) return;
  std::vector<ReturnRecord> items = std::move(unsynced_);
  unsynced_.clear();
  for (ReturnRecord& r : items) r.synced = true;
  synced_ = extend(synced_, std::move(items));
}

RecordSet::ChunkPtr RecordSet::extend(ChunkPtr prev, std::vector<ReturnRecord> items) {
  if (items.empty()) return prev;
  auto chunk = std::make_shared<Chunk>();
  chunk->prev = std::move(prev);
  chunk->total = chunk->prev ? chunk->prev->total : 0;
  chunk->sum = chunk->prev ? chunk->prev->sum : 0.0;
  for (const ReturnRecord& r : items) {
    chunk->total += 1;
    chunk->sum += r.value;
  }
  chunk->items = std::move(items);
  return chunk;
}

SearchTree::SearchTree(const Mdp* env, StateId root) : env_(env), root_(root) {
  NodeInfo info;
  info.depth = 0;
  nodes_.emplace(root, info);
}

void SearchTree::check_node(StateId s) const {
  if (!has_node(s)) throw DomainError("state is not part of the search tree");
}

const NodeInfo& SearchTree::node(StateId s) const {
  check_node(s);
  return nodes_.at(s);
}

NodeInfo& SearchTree::node(StateId s) {
  check_node(s);
  return nodes_.at(s);
}

const EdgeStats* SearchTree::edge(StateId s, Action a) const {
  auto it = edges_.find(edge_key(s, a));
  return it == edges_.end() ? nullptr : &it->second;
}

EdgeStats* SearchTree::edge(StateId s, Action a) {
  auto it = edges_.find(edge_key(s, a));
  return it == edges_.end() ? nullptr : &it->second;
}

int SearchTree::inflight_of(StateId s, Action a, const GlobalInflight* global) const {
  if (global) return global->at(edge_key(s, a));
  const EdgeStats* e = edge(s, a);
  return e ? e->inflight : 0;
}

Action SearchTree::first_unexpanded(StateId s, int width_cap) const {
  check_node(s);
  const int actions = std::min(env_->actions_at(s), width_cap);
  for (Action a = 0; a < actions; ++a)
    if (!edges_.count(edge_key(s, a))) return a;
  return -1;
}

Action SearchTree::select_action(StateId s, const SpecializationConfig& cfg, double c,
                                 const GlobalInflight* global) const {
  check_node(s);
  const int actions = env_->actions_at(s);
  std::vector<std::pair<Action, const EdgeStats*>> expanded;
  expanded.reserve(actions);
  for (Action a = 0; a < actions; ++a) {
    if (const EdgeStats* e = edge(s, a)) expanded.emplace_back(a, e);
  }
  if (expanded.empty())
    throw DomainError("select_action on a node with no expanded children");

  // Unvisited edges are never scored; take them first in index order.
  std::vector<double> n_bar(expanded.size());
  double total = 0.0;
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    const auto& [a, e] = expanded[i];
    EdgeView view{e->q, e->visit_count, inflight_of(s, a, global)};
    n_bar[i] = cfg.adjusted_n(view);
    if (n_bar[i] <= 0.0) return a;
    total += n_bar[i];
  }

  const bool bu = cfg.kind == AlgoKind::bu_uct && cfg.bu.has_value();
  const double log_term = std::log(std::max(total, 1.0));
  double best_score = -std::numeric_limits<double>::infinity();
  Action best = -1;
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    const auto& [a, e] = expanded[i];
    EdgeView view{e->q, e->visit_count, inflight_of(s, a, global)};
    const double q_bar = bu ? bu_uct_modified_q(e->q, e->inflight_avg, *cfg.bu, cfg.workers)
                            : cfg.adjusted_q(view);
    const double score = q_bar + c * std::sqrt(2.0 * log_term / n_bar[i]);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  if (best >= 0 && std::isfinite(best_score)) return best;

  // bu_uct with every child saturated: fail open toward the least loaded edge.
  double least = std::numeric_limits<double>::infinity();
  Action fallback = expanded.front().first;
  for (const auto& [a, e] : expanded) {
    if (e->inflight_avg < least) {
      least = e->inflight_avg;
      fallback = a;
    }
  }
  return fallback;
}

StateId SearchTree::expand(StateId s, Action a, int max_depth) {
  check_node(s);
  if (env_->is_terminal(s)) throw DomainError("cannot expand a terminal state");
  if (a < 0 || a >= env_->actions_at(s)) throw DomainError("unknown action");
  if (edges_.count(edge_key(s, a))) throw DomainError("edge already expanded");
  const NodeInfo& parent = nodes_.at(s);
  if (parent.depth >= max_depth)
    throw CapacityError("depth limit reached; treat the node as a simulation leaf");
  const auto [child, reward] = env_->transition(s, a);
  (void)reward;
  if (nodes_.count(child))
    throw InvariantViolation("transition reached a state already in the tree");
  EdgeStats e;
  e.child = child;
  edges_.emplace(edge_key(s, a), std::move(e));
  NodeInfo info;
  info.depth = parent.depth + 1;
  info.parent_state = s;
  info.parent_action = a;
  nodes_.emplace(child, info);
  nodes_.at(s).expanded_children += 1;
  return child;
}

void SearchTree::pre_update(const Path& path, const SpecializationConfig& cfg,
                            GlobalInflight* global) {
  for (const PathStep& step : path) {
    EdgeStats* e = edge(step.state, step.action);
    if (!e) throw DomainError("pre_update on a missing edge");
    e->inflight += 1;
    if (global) global->add(edge_key(step.state, step.action), 1);
    const int o = inflight_of(step.state, step.action, global);
    if (o > cfg.workers)
      throw InvariantViolation("incomplete count exceeds the worker count");
    EdgeView view{e->q, e->visit_count, o};
    e->pseudo_q = cfg.pseudo_value(view);
    e->pseudo_n = cfg.pseudo_count(view);
  }
}

double SearchTree::backpropagate(const Path& path, double leaf_value,
                                 const SpecializationConfig& cfg, std::uint64_t sim_id,
                                 GlobalInflight* global) {
  double v = leaf_value;
  const StateId leaf =
      path.empty() ? root_ : edges_.at(edge_key(path.back().state, path.back().action)).child;
  node(leaf).value_stats.add(leaf_value);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    EdgeStats* e = edge(it->state, it->action);
    if (!e) throw DomainError("backpropagate on a missing edge");
    e->visit_count += 1;
    const double n = static_cast<double>(e->visit_count);
    e->q = (n - 1.0) / n * e->q + v / n;
    e->records.append(v, sim_id);
    if (e->inflight <= 0)
      throw InvariantViolation("incomplete count underflow during backpropagation");
    e->inflight -= 1;
    if (global) global->add(edge_key(it->state, it->action), -1);
    EdgeView view{e->q, e->visit_count, inflight_of(it->state, it->action, global)};
    e->pseudo_q = cfg.pseudo_value(view);
    e->pseudo_n = cfg.pseudo_count(view);
    const auto [child, reward] = env_->transition(it->state, it->action);
    (void)child;
    v = reward + env_->spec().discount * v;
    node(it->state).value_stats.add(v);
  }
  return v;
}

void SearchTree::incomplete_update(const Path& path, GlobalInflight* global) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    EdgeStats* e = edge(it->state, it->action);
    if (!e) throw DomainError("incomplete_update on a missing edge");
    e->inflight += 1;
    if (global) global->add(edge_key(it->state, it->action), 1);
    const double n_bar = static_cast<double>(e->visit_count) + e->inflight;
    if (n_bar <= 0.0) throw InvariantViolation("empty adjusted count after increment");
    e->inflight_avg =
        (n_bar - 1.0) / n_bar * e->inflight_avg + static_cast<double>(e->inflight) / n_bar;
    e->pseudo_n = static_cast<double>(e->inflight);
  }
}

double SearchTree::complete_update(const Path& path, double leaf_value,
                                   std::uint64_t sim_id, GlobalInflight* global) {
  double v = leaf_value;
  const StateId leaf =
      path.empty() ? root_ : edges_.at(edge_key(path.back().state, path.back().action)).child;
  node(leaf).value_stats.add(leaf_value);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    EdgeStats* e = edge(it->state, it->action);
    if (!e) throw DomainError("complete_update on a missing edge");
    e->visit_count += 1;
    if (e->inflight <= 0)
      throw InvariantViolation("incomplete count underflow during complete_update");
    e->inflight -= 1;
    if (global) global->add(edge_key(it->state, it->action), -1);
    const auto [child, reward] = env_->transition(it->state, it->action);
    (void)child;
    v = reward + env_->spec().discount * v;
    const double n = static_cast<double>(e->visit_count);
    e->q = (n - 1.0) / n * e->q + v / n;
    e->records.append(v, sim_id);
    e->pseudo_n = static_cast<double>(e->inflight);
    node(it->state).value_stats.add(v);
  }
  return v;
}

void SearchTree::aggregate_parent_edge(StateId s) {
  const NodeInfo& info = node(s);
  if (info.parent_state < 0) return;
  EdgeStats* e = edge(info.parent_state, info.parent_action);
  if (!e) throw InvariantViolation("node has a parent but no parent edge");
  if (e->visit_count <= 1) return;
  e->visit_count = 1;
  e->aggregated = true;
}

std::vector<EdgeKey> SearchTree::sorted_edge_keys() const {
  std::vector<EdgeKey> keys;
  keys.reserve(edges_.size());
  for (const auto& [k, e] : edges_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

void SearchTree::rebuild_node_stats() {
  for (auto& [s, info] : nodes_) info.value_stats = Welford{};
  const double gamma = env_->spec().discount;
  for (const EdgeKey k : sorted_edge_keys()) {
    const EdgeStats& e = edges_.at(k);
    const StateId s = edge_state(k);
    const Action a = edge_action(k);
    Welford& child_stats = nodes_.at(e.child).value_stats;
    e.records.for_each([&](const ReturnRecord& r) { child_stats.add(r.value); });
    if (s == root_) {
      const double reward = env_->transition(s, a).second;
      Welford& root_stats = nodes_.at(root_).value_stats;
      e.records.for_each(
          [&](const ReturnRecord& r) { root_stats.add(reward + gamma * r.value); });
    }
  }
}

SearchTree sync_trees(const std::vector<SearchTree>& trees,
                      const SpecializationConfig* cfg, bool rebuild_values) {
  if (trees.empty()) throw DomainError("sync_trees needs at least one tree");
  const SearchTree& first = trees.front();
  for (const SearchTree& t : trees) {
    if (t.root() != first.root() || &t.env() != &first.env())
      throw DomainError("sync_trees requires a shared root state and environment");
  }

  SearchTree merged(&first.env(), first.root());

  // Phase 1: topology union, breadth first, actions in index order.
  std::deque<StateId> frontier{first.root()};
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    const int actions = first.env().actions_at(s);
    for (Action a = 0; a < actions; ++a) {
      bool present = false;
      for (const SearchTree& t : trees)
        if (t.has_node(s) && t.edge(s, a)) {
          present = true;
          break;
        }
      if (!present) continue;
      const StateId child = merged.expand(s, a);
      frontier.push_back(child);
    }
  }

  // Phase 2: statistics aggregation per edge.
  for (const EdgeKey k : merged.sorted_edge_keys()) {
    const StateId s = edge_state(k);
    const Action a = edge_action(k);
    EdgeStats& out = *merged.edge(s, a);

    // Synced records are taken from the first tree only; unsynced records are
    // collected from every tree and re-flagged.
    RecordSet::ChunkPtr base;
    if (const EdgeStats* e0 = first.has_node(s) ? first.edge(s, a) : nullptr)
      base = e0->records.synced_chain();
    std::vector<ReturnRecord> fresh;
    int inflight_sum = 0;
    double inflight_avg = 0.0;
    bool aggregated = false;
    bool have_avg = false;
    for (const SearchTree& t : trees) {
      const EdgeStats* e = t.has_node(s) ? t.edge(s, a) : nullptr;
      if (!e) continue;
      for (const ReturnRecord& r : e->records.unsynced())
        fresh.push_back(ReturnRecord{r.value, r.sim_id, true});
      inflight_sum += e->inflight;
      aggregated = aggregated || e->aggregated;
      if (!have_avg) {
        inflight_avg = e->inflight_avg;
        have_avg = true;
      }
    }
    out.records.adopt(RecordSet::extend(base, std::move(fresh)));
    out.visit_count = out.records.total();
    out.q = out.visit_count > 0
                ? out.records.synced_sum() / static_cast<double>(out.visit_count)
                : 0.0;
    out.inflight = inflight_sum;
    out.inflight_avg = inflight_avg;
    out.aggregated = aggregated;
    if (cfg) {
      EdgeView view{out.q, out.visit_count, out.inflight};
      out.pseudo_q = cfg->pseudo_value(view);
      out.pseudo_n = cfg->pseudo_count(view);
    }
  }

  if (rebuild_values) merged.rebuild_node_stats();
  return merged;
}

bool stats_equal(const SearchTree& a, const SearchTree& b, double tol) {
  auto ka = a.sorted_edge_keys();
  auto kb = b.sorted_edge_keys();
  if (ka != kb) return false;
  for (const EdgeKey k : ka) {
    const EdgeStats* ea = a.edge(edge_state(k), edge_action(k));
    const EdgeStats* eb = b.edge(edge_state(k), edge_action(k));
    if (ea->visit_count != eb->visit_count) return false;
    if (tol == 0.0 ? ea->q != eb->q : std::abs(ea->q - eb->q) > tol) return false;
    const auto ra = ea->records.all();
    const auto rb = eb->records.all();
    if (ra.size() != rb.size()) return false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      if (ra[i].value != rb[i].value || ra[i].synced != rb[i].synced ||
          ra[i].sim_id != rb[i].sim_id)
        return false;
    }
  }
  return true;
}

}  // namespace mctslab
