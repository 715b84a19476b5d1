#include "mctslab/framework.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

namespace mctslab {

ExecMode exec_mode_from_string(const std::string& name) {
  if (name == "virtual") return ExecMode::virtual_time;
  if (name == "parallel") return ExecMode::parallel;
  throw ConfigError("unknown execution mode: " + name);
}

std::string to_string(ExecMode mode) {
  return mode == ExecMode::virtual_time ? "virtual" : "parallel";
}

namespace {

struct SimTask {
  std::uint64_t id = 0;
  StateId leaf = -1;
  int tree = 0;
  Path path;
  int slot = -1;
  double value = 0.0;        // virtual mode computes the return at dispatch
  std::uint64_t ready = 0;   // completion index at which the task returns
  bool failed = false;
  std::string error;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual int free_slots() const = 0;
  virtual void dispatch(SimTask task) = 0;
  virtual SimTask wait() = 0;
  virtual const std::vector<SimTask>& pending() const = 0;
  virtual double now_ms() const = 0;
};

class VirtualScheduler : public Scheduler {
 public:
  VirtualScheduler(const Mdp& env, int workers, std::uint64_t seed, int tau_lo,
                   int tau_hi, RngStream* master)
      : env_(env), workers_(workers), tau_lo_(tau_lo), tau_hi_(tau_hi),
        master_(master) {
    slot_free_.assign(workers_, 1);
    streams_.reserve(workers_);
    for (int i = 0; i < workers_; ++i) streams_.emplace_back(seed, i + 1);
  }

  int free_slots() const override {
    return workers_ - static_cast<int>(pending_.size());
  }

  void dispatch(SimTask task) override {
    int slot = -1;
    for (int i = 0; i < workers_; ++i)
      if (slot_free_[i]) {
        slot = i;
        break;
      }
    if (slot < 0) throw InvariantViolation("dispatch without a free worker slot");
    slot_free_[slot] = 0;
    task.slot = slot;
    task.value = env_.simulate(task.leaf, streams_[slot]);
    const std::uint64_t interval =
        tau_hi_ > tau_lo_
            ? tau_lo_ + master_->uniform_int(static_cast<std::uint64_t>(tau_hi_ - tau_lo_ + 1))
            : static_cast<std::uint64_t>(tau_lo_);
    task.ready = completed_ + interval;
    pending_.push_back(std::move(task));
  }

  SimTask wait() override {
    if (pending_.empty())
      throw InvariantViolation("wait with no pending task and no free worker");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pending_.size(); ++i) {
      const auto& a = pending_[i];
      const auto& b = pending_[best];
      if (a.ready < b.ready || (a.ready == b.ready && a.id < b.id)) best = i;
    }
    SimTask out = std::move(pending_[best]);
    pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(best));
    slot_free_[out.slot] = 1;
    ++completed_;
    return out;
  }

  const std::vector<SimTask>& pending() const override { return pending_; }
  double now_ms() const override { return 0.0; }

 private:
  const Mdp& env_;
  int workers_;
  int tau_lo_, tau_hi_;
  RngStream* master_;
  std::vector<char> slot_free_;
  std::vector<RngStream> streams_;
  std::vector<SimTask> pending_;
  std::uint64_t completed_ = 0;
};

class ParallelScheduler : public Scheduler {
 public:
  ParallelScheduler(const Mdp& env, int workers, std::uint64_t seed, double delay_ms)
      : env_(env), workers_(workers), delay_ms_(delay_ms),
        start_(std::chrono::steady_clock::now()) {
    for (int i = 0; i < workers_; ++i)
      threads_.emplace_back([this, seed, i] { worker_loop(i, RngStream(seed, i + 1)); });
  }

  ~ParallelScheduler() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    task_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int free_slots() const override {
    std::lock_guard<std::mutex> lock(mu_);
    return workers_ - in_flight_;
  }

  void dispatch(SimTask task) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      pending_view_.push_back(task);
      queue_.push_back(std::move(task));
      ++in_flight_;
    }
    task_cv_.notify_one();
  }

  SimTask wait() override {
    std::unique_lock<std::mutex> lock(mu_);
    result_cv_.wait(lock, [this] { return !results_.empty(); });
    SimTask out = std::move(results_.front());
    results_.pop_front();
    --in_flight_;
    auto it = std::find_if(pending_view_.begin(), pending_view_.end(),
                           [&](const SimTask& t) { return t.id == out.id; });
    if (it != pending_view_.end()) pending_view_.erase(it);
    if (out.failed)
      throw InvariantViolation("simulation worker failed: " + out.error);
    return out;
  }

  const std::vector<SimTask>& pending() const override {
    std::lock_guard<std::mutex> lock(mu_);
    return pending_view_;
  }

  double now_ms() const override {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start_)
        .count();
  }

 private:
  void worker_loop(int slot, RngStream stream) {
    for (;;) {
      SimTask task;
      {
        std::unique_lock<std::mutex> lock(mu_);
        task_cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task.slot = slot;
      try {
        if (delay_ms_ > 0.0)
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms_));
        task.value = env_.simulate(task.leaf, stream);
      } catch (const std::exception& e) {
        task.failed = true;
        task.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(mu_);
        results_.push_back(std::move(task));
      }
      result_cv_.notify_one();
    }
  }

  const Mdp& env_;
  int workers_;
  double delay_ms_;
  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mu_;
  std::condition_variable task_cv_;
  std::condition_variable result_cv_;
  std::deque<SimTask> queue_;
  std::deque<SimTask> results_;
  std::vector<SimTask> pending_view_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
  int in_flight_ = 0;
};

double resolve_c(const SpecializationConfig& cfg, const NodeInfo& node) {
  if (cfg.c_policy.mode == CPolicy::Mode::fixed) return cfg.c_policy.value;
  return node.value_stats.count >= 2 ? node.value_stats.stddev() : 0.0;
}

struct Descent {
  Path path;
  StateId leaf;
};

Descent descend_and_expand(SearchTree& tree, const Mdp& env,
                           const SpecializationConfig& cfg,
                           const GlobalInflight* global, RngStream& master) {
  const bool bu = cfg.kind == AlgoKind::bu_uct;
  Descent out;
  StateId s = tree.root();
  for (;;) {
    if (env.is_terminal(s)) {
      out.leaf = s;
      return out;
    }
    if (tree.node(s).depth >= cfg.max_depth) {
      out.leaf = s;
      return out;
    }
    const Action unexpanded = tree.first_unexpanded(s, cfg.max_width);
    if (unexpanded >= 0) {
      // bu_uct keeps simulating a not-fully-expanded node half of the time,
      // standing in for its queued single expansion worker; the returns pile
      // up on the parent edge until the first expansion aggregates them.
      if (bu && s != tree.root() && master.uniform01() < 0.5) {
        out.leaf = s;
        return out;
      }
      const StateId child = tree.expand(s, unexpanded);
      out.path.push_back(PathStep{s, unexpanded});
      if (bu && tree.node(s).expanded_children == 1) tree.aggregate_parent_edge(s);
      out.leaf = child;
      return out;
    }
    const double c = resolve_c(cfg, tree.node(s));
    const Action a = tree.select_action(s, cfg, c, global);
    out.path.push_back(PathStep{s, a});
    s = tree.edge(s, a)->child;
  }
}

int pick_tree(const SpecializationConfig& cfg, int m_prev, int m_hat,
              std::int64_t initiated, RngStream& master) {
  switch (cfg.kind) {
    case AlgoKind::uct:
    case AlgoKind::bu_uct:
      return 0;
    case AlgoKind::leafp:
      return (m_prev + 1) % cfg.tree_count;
    case AlgoKind::rootp:
      // Seed every designated tree once, then follow the tree updated by the
      // previous backpropagation.
      if (initiated < cfg.tree_count) return static_cast<int>(initiated);
      return m_hat;
    default:
      return static_cast<int>(master.uniform_int(cfg.tree_count));
  }
}

void restore_inflight_attribution(std::vector<SearchTree>& trees,
                                  const std::vector<SimTask>& pending) {
  for (SearchTree& t : trees)
    t.for_each_edge_mut([](EdgeKey, EdgeStats& e) { e.inflight = 0; });
  for (const SimTask& task : pending)
    for (const PathStep& step : task.path) {
      EdgeStats* e = trees[task.tree].edge(step.state, step.action);
      if (!e) throw InvariantViolation("pending task path missing after sync");
      e->inflight += 1;
    }
}

void audit_flow_invariant(const std::vector<SearchTree>& trees, const Mdp& env,
                          StateId root, const GlobalInflight& global,
                          std::int64_t initiated) {
  std::int64_t total = 0;
  const int actions = env.actions_at(root);
  for (Action a = 0; a < actions; ++a) {
    const EdgeKey k = edge_key(root, a);
    std::int64_t n = 0;
    if (const EdgeStats* e0 = trees.front().edge(root, a))
      n += e0->records.synced_total();
    for (const SearchTree& t : trees)
      if (const EdgeStats* e = t.edge(root, a))
        n += static_cast<std::int64_t>(e->records.unsynced().size());
    total += n + global.at(k);
  }
  if (total != initiated)
    throw InvariantViolation("flow invariant broken: sum(N+O) != initiated rollouts");
}

}  // namespace

int select_tree(int m_prev, int m_hat, const SpecializationConfig& cfg,
                RngStream& rng) {
  if (m_prev < 1 || m_prev > cfg.tree_count || m_hat < 1 || m_hat > cfg.tree_count)
    throw DomainError("tree index out of range");
  switch (cfg.kind) {
    case AlgoKind::uct:
    case AlgoKind::bu_uct:
      return 1;
    case AlgoKind::leafp:
      return m_prev % cfg.tree_count + 1;
    case AlgoKind::rootp:
      return m_hat;
    default:
      return static_cast<int>(rng.uniform_int(cfg.tree_count)) + 1;
  }
}

Action recommend_action(const SearchTree& tree) {
  const StateId root = tree.root();
  const int actions = tree.env().actions_at(root);
  Action best = -1;
  std::int64_t best_n = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (Action a = 0; a < actions; ++a) {
    const EdgeStats* e = tree.edge(root, a);
    if (!e || e->visit_count == 0) continue;
    if (e->visit_count > best_n || (e->visit_count == best_n && e->q > best_q)) {
      best = a;
      best_n = e->visit_count;
      best_q = e->q;
    }
  }
  if (best < 0) throw DomainError("recommend_action requires a visited root child");
  return best;
}

RunResult run_search(const Mdp& env, const SpecializationConfig& cfg,
                     std::int64_t n_rollouts, ExecMode mode, std::uint64_t seed,
                     const RunOptions& opt) {
  if (n_rollouts < 1) throw DomainError("n_rollouts must be at least 1");
  if (cfg.workers < 1 || cfg.tree_count < 1)
    throw ConfigError("worker and tree counts must be positive");
  const StateId root = opt.root >= 0 ? opt.root : env.spec().root;
  const std::int64_t tau_syn = cfg.sync_interval > 0 ? cfg.sync_interval : n_rollouts;

  RngStream master(seed, 0);
  int tau_lo = opt.tau_sim_upper > 0 ? opt.tau_sim_lower : opt.tau_sim;
  int tau_hi = opt.tau_sim_upper > 0 ? opt.tau_sim_upper : opt.tau_sim;
  if (tau_lo <= 0) tau_lo = cfg.workers;
  if (tau_hi <= 0) tau_hi = cfg.workers;
  if (tau_hi < tau_lo) throw ConfigError("empty simulation interval range");

  std::unique_ptr<Scheduler> scheduler;
  if (mode == ExecMode::virtual_time) {
    scheduler = std::make_unique<VirtualScheduler>(env, cfg.workers, seed, tau_lo,
                                                   tau_hi, &master);
  } else {
    scheduler = std::make_unique<ParallelScheduler>(env, cfg.workers, seed, opt.delay_ms);
  }

  std::vector<SearchTree> trees(static_cast<std::size_t>(cfg.tree_count),
                                SearchTree(&env, root));
  GlobalInflight global;

  RunResult result{SearchTree(&env, root), RolloutTrace{}};
  RolloutTrace& trace = result.trace;
  trace.v_star = env.optimal_value(root);
  trace.algo = cfg.name;
  trace.workers = cfg.workers;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(n_rollouts));

  const bool bu = cfg.kind == AlgoKind::bu_uct;
  std::int64_t initiated = 0;
  std::int64_t completed = 0;
  std::uint64_t next_task_id = 1;
  int m_prev = cfg.tree_count - 1;  // so leafp starts its cycle at tree 0
  int m_hat = 0;

  auto snapshot_selection = [&](const SearchTree& tree, const Path& path,
                                const std::vector<double>& bu_avgs) {
    // Online accumulation of the per-edge incomplete-count sums; kept even
    // when full snapshots are disabled so the two code paths stay comparable.
    if (trace.online_inflight_sum.size() < trace.edges.size())
      trace.online_inflight_sum.resize(trace.edges.size(), 0.0);
    global.for_each_nonzero([&](EdgeKey k, int o) {
      trace.online_inflight_sum[*trace.edges.find(k)] += o;
    });
    if (!opt.record_snapshots) return;
    SelectionSnapshot snap;
    snap.adjusted_q.assign(trace.edges.size(),
                           std::numeric_limits<double>::quiet_NaN());
    for (std::uint32_t i = 0; i < trace.edges.size(); ++i) {
      const EdgeKey k = trace.edges.key(i);
      const int o = global.at(k);
      if (o > 0) snap.inflight.emplace_back(i, o);
      if (const EdgeStats* e = tree.edge(edge_state(k), edge_action(k))) {
        EdgeView view{e->q, e->visit_count, o};
        snap.adjusted_q[i] = cfg.adjusted_q(view);
      }
    }
    for (const PathStep& step : path)
      snap.path.push_back(*trace.edges.find(edge_key(step.state, step.action)));
    snap.path_inflight_avg = bu_avgs;
    trace.snapshots.push_back(std::move(snap));
  };

  auto sync_all = [&]() {
    if (cfg.tree_count == 1) {
      trees[0].for_each_edge_mut(
          [](EdgeKey, EdgeStats& e) { e.records.mark_all_synced(); });
      return;
    }
    SearchTree merged = sync_trees(
        trees, &cfg, cfg.c_policy.mode == CPolicy::Mode::per_node_std);
    for (SearchTree& t : trees) t = merged;
    restore_inflight_attribution(trees, scheduler->pending());
    if (opt.audit_sync_equality)
      for (const SearchTree& t : trees)
        if (!stats_equal(t, trees.front()))
          throw InvariantViolation("tree copies diverged after synchronization");
  };

  while (completed < n_rollouts) {
    const bool barrier_holds =
        cfg.cycle_barrier &&
        (completed % tau_syn) + static_cast<std::int64_t>(scheduler->pending().size()) >=
            tau_syn;
    if (initiated < n_rollouts && scheduler->free_slots() > 0 && !barrier_holds) {
      const int m = pick_tree(cfg, m_prev, m_hat, initiated, master);
      SearchTree& tree = trees[static_cast<std::size_t>(m)];
      Descent descent = descend_and_expand(tree, env, cfg, &global, master);
      std::vector<double> bu_avgs;
      for (const PathStep& step : descent.path) {
        trace.edges.intern(edge_key(step.state, step.action));
        // inflight_avg as the tree policy saw it, before the pre-update
        if (bu) bu_avgs.push_back(tree.edge(step.state, step.action)->inflight_avg);
      }
      if (bu)
        tree.incomplete_update(descent.path, &global);
      else
        tree.pre_update(descent.path, cfg, &global);
      snapshot_selection(tree, descent.path, bu_avgs);

      SimTask task;
      task.id = next_task_id++;
      task.leaf = descent.leaf;
      task.tree = m;
      task.path = std::move(descent.path);
      scheduler->dispatch(std::move(task));
      ++initiated;
      m_prev = m;
      if (opt.audit_flow) audit_flow_invariant(trees, env, root, global, initiated);
      continue;
    }
    if (scheduler->pending().empty())
      throw InvariantViolation("master stalled: no pending task and nothing to dispatch");

    SimTask task = scheduler->wait();
    m_hat = task.tree;
    SearchTree& tree = trees[static_cast<std::size_t>(m_hat)];
    const double v_root =
        bu ? tree.complete_update(task.path, task.value, task.id, &global)
           : tree.backpropagate(task.path, task.value, cfg, task.id, &global);

    TraceRow row;
    row.rollout = completed + 1;
    row.step_or_ms = mode == ExecMode::virtual_time ? static_cast<double>(initiated)
                                                    : scheduler->now_ms();
    row.root_action = task.path.empty() ? -1 : task.path.front().action;
    row.v_root = v_root;
    row.v_star = trace.v_star;
    row.worker = task.slot;
    row.tree_index = m_hat;
    trace.rows.push_back(row);

    if (completed % tau_syn == tau_syn - 1) sync_all();
    ++completed;
    if (opt.audit_flow) audit_flow_invariant(trees, env, root, global, initiated);
  }

  trace.initiated = initiated;
  if (cfg.tree_count > 1) {
    result.tree = sync_trees(trees, &cfg, true);
  } else {
    trees[0].for_each_edge_mut(
        [](EdgeKey, EdgeStats& e) { e.records.mark_all_synced(); });
    result.tree = std::move(trees[0]);
  }
  return result;
}

}  // namespace mctslab
