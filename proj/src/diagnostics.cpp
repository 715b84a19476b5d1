#include "mctslab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mctslab {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) /
                               static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

double cumulative_regret(const RolloutTrace& trace) {
  if (trace.rows.empty()) throw DomainError("cumulative_regret on an empty trace");
  double total = 0.0;
  for (const TraceRow& row : trace.rows) {
    if (!std::isfinite(row.v_star))
      throw DomainError("trace lacks oracle values");
    total += row.v_star - row.v_root;
  }
  return total;
}

double expected_regret_depth_two(const RolloutTrace& trace, const Mdp& env) {
  if (trace.rows.empty()) throw DomainError("empty trace");
  const StateId root = env.spec().root;
  const int actions = env.actions_at(root);
  std::vector<double> arm_mean(actions);
  for (Action a = 0; a < actions; ++a) {
    const auto [child, reward] = env.transition(root, a);
    if (!env.is_terminal(child))
      throw DomainError("expected_regret_depth_two requires terminal root children");
    arm_mean[a] = reward + env.spec().discount * env.expected_simulation_value(child);
  }
  double total = 0.0;
  for (const TraceRow& row : trace.rows) {
    if (row.root_action < 0 || row.root_action >= actions)
      throw DomainError("trace row carries no root action");
    total += row.v_star - arm_mean[row.root_action];
  }
  return total;
}

double excess_regret(const std::vector<double>& parallel_regrets,
                     const std::vector<double>& sequential_regrets) {
  if (parallel_regrets.empty() || sequential_regrets.empty())
    throw DomainError("excess_regret needs nonempty samples");
  if (parallel_regrets.size() != sequential_regrets.size())
    throw DomainError("excess_regret requires matched repetition counts");
  return mean_of(parallel_regrets) - mean_of(sequential_regrets);
}

std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a,
                                                 const std::vector<double>& b,
                                                 double confidence, int resamples,
                                                 std::uint64_t seed) {
  if (a.empty() || b.empty()) throw DomainError("bootstrap on empty samples");
  RngStream rng(seed, 0xb00);
  std::vector<double> diffs(resamples);
  for (int r = 0; r < resamples; ++r) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      sa += a[rng.uniform_int(a.size())];
    for (std::size_t i = 0; i < b.size(); ++i)
      sb += b[rng.uniform_int(b.size())];
    diffs[r] = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(diffs.begin(), diffs.end());
  const double alpha = (1.0 - confidence) / 2.0;
  const auto pick = [&](double q) {
    const double pos = q * (diffs.size() - 1);
    return diffs[static_cast<std::size_t>(std::llround(pos))];
  };
  return {pick(alpha), pick(1.0 - alpha)};
}

RegretBound wu_uct_regret_bound(int arms, const std::vector<double>& deltas,
                                std::int64_t n, int workers) {
  if (n <= 1) throw DomainError("the bound needs n >= 2 (ln n must be positive)");
  if (arms < 2 || deltas.size() != static_cast<std::size_t>(arms))
    throw DomainError("gap vector must match the arm count");
  if (workers < 1) throw DomainError("worker count must be positive");
  const double log_n = std::log(static_cast<double>(n));
  RegretBound out;
  for (const double d : deltas) {
    if (d < 0.0) throw DomainError("gaps must be nonnegative");
    if (d == 0.0) continue;
    out.r_uct += (8.0 / d + 2.0 * d) * log_n + d;
    out.excess += d * d / std::sqrt(log_n);
  }
  out.excess *= 4.0 * workers;
  return out;
}

std::optional<GapEstimate> action_value_gap(const Mdp& env, StateId child,
                                            double parallel_q_bar, std::int64_t m,
                                            int trials, std::uint64_t seed,
                                            const CPolicy& seq_c) {
  if (m == 0) return std::nullopt;
  if (m < 0) throw DomainError("negative rollout budget");
  if (trials < 1) throw DomainError("at least one trial required");

  std::vector<double> q_seq(static_cast<std::size_t>(trials));
  if (env.is_terminal(child)) {
    for (int t = 0; t < trials; ++t) {
      RngStream rng(splitmix64(seed + 0x51ed) ^ splitmix64(t), 1);
      double sum = 0.0;
      for (std::int64_t i = 0; i < m; ++i) sum += env.simulate(child, rng);
      q_seq[static_cast<std::size_t>(t)] = sum / static_cast<double>(m);
    }
  } else {
    AlgoParams params;
    params.c_policy = seq_c;
    const SpecializationConfig seq = make_specialization(AlgoKind::uct, 1, params);
    RunOptions opt;
    opt.root = child;
    opt.record_snapshots = false;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t s = splitmix64(seed + 0x51ed) ^ splitmix64(t);
      RunResult run = run_search(env, seq, m, ExecMode::virtual_time, s, opt);
      double sum = 0.0;
      for (const TraceRow& row : run.trace.rows) sum += row.v_root;
      q_seq[static_cast<std::size_t>(t)] = sum / static_cast<double>(m);
    }
  }
  GapEstimate out;
  out.m = m;
  out.parallel_q = parallel_q_bar;
  out.sequential_q = mean_of(q_seq);
  out.gap = std::abs(parallel_q_bar - out.sequential_q);
  out.stderr_ = trials > 1 ? population_std(q_seq) / std::sqrt(static_cast<double>(trials))
                           : 0.0;
  return out;
}

std::optional<double> o_bar_from_snapshots(const RolloutTrace& trace, StateId s,
                                           Action a) {
  const auto idx = trace.edges.find(edge_key(s, a));
  if (!idx || trace.rows.empty()) return std::nullopt;
  double sum = 0.0;
  for (const SelectionSnapshot& snap : trace.snapshots)
    for (const auto& [i, o] : snap.inflight)
      if (i == *idx) sum += o;
  return sum / static_cast<double>(trace.rows.size());
}

std::optional<double> o_bar_online(const RolloutTrace& trace, StateId s, Action a) {
  const auto idx = trace.edges.find(edge_key(s, a));
  if (!idx || trace.rows.empty()) return std::nullopt;
  const double sum =
      *idx < trace.online_inflight_sum.size() ? trace.online_inflight_sum[*idx] : 0.0;
  return sum / static_cast<double>(trace.rows.size());
}

SurrogateGaps surrogate_gaps(const RolloutTrace& trace, const SearchTree& tree,
                             StateId s, Action a) {
  SurrogateGaps out;
  const EdgeStats* e = tree.edge(s, a);
  if (!e) throw DomainError("surrogate_gaps on a missing edge");

  // Max over the child's edges of their average incomplete count.
  const StateId child = e->child;
  if (tree.has_node(child) && !tree.env().is_terminal(child)) {
    std::optional<double> best;
    const int actions = tree.env().actions_at(child);
    for (Action ca = 0; ca < actions; ++ca) {
      if (!tree.edge(child, ca)) continue;
      const auto ob = o_bar_from_snapshots(trace, child, ca);
      const double v = ob.value_or(0.0);
      if (!best || v > *best) best = v;
    }
    out.g_star = best;
  }

  std::vector<double> returns;
  e->records.for_each([&](const ReturnRecord& r) { returns.push_back(r.value); });
  if (!returns.empty()) {
    out.g1 = population_std(returns);
    const double m = mean_of(returns);
    if (std::abs(m) > 1e-12) out.g3 = *out.g1 / m;
  }

  if (const auto idx = trace.edges.find(edge_key(s, a))) {
    std::vector<double> q_bars;
    for (const SelectionSnapshot& snap : trace.snapshots)
      if (*idx < snap.adjusted_q.size() && std::isfinite(snap.adjusted_q[*idx]))
        q_bars.push_back(snap.adjusted_q[*idx]);
    if (!q_bars.empty()) out.g2 = population_std(q_bars);
  }

  out.g4 = o_bar_from_snapshots(trace, s, a);
  return out;
}

GapReport measure_gaps(const Mdp& env, const SearchTree& tree,
                       const RolloutTrace& trace, const SpecializationConfig& cfg,
                       int trials, std::uint64_t seed, std::int64_t min_weight) {
  GapReport report;
  double weight_sum = 0.0, gap_acc = 0.0;
  double gs_w = 0.0, gs_acc = 0.0, g1_w = 0.0, g1_acc = 0.0, g2_w = 0.0, g2_acc = 0.0;
  double g3_w = 0.0, g3_acc = 0.0, g4_w = 0.0, g4_acc = 0.0;
  for (const EdgeKey k : tree.sorted_edge_keys()) {
    const StateId s = edge_state(k);
    const Action a = edge_action(k);
    const EdgeStats* e = tree.edge(s, a);
    if (e->visit_count < min_weight) continue;
    EdgeView view{e->q, e->visit_count, e->inflight};
    const double q_bar = cfg.adjusted_q(view);
    const std::int64_t m = e->visit_count + e->inflight;
    const auto gap = action_value_gap(env, e->child, q_bar, m, trials,
                                      splitmix64(seed) ^ k, cfg.c_policy);
    if (!gap) continue;
    EdgeGapRow row;
    row.state = s;
    row.action = a;
    row.gap = gap->gap;
    row.gap_stderr = gap->stderr_;
    row.weight = e->visit_count;
    row.surrogates = surrogate_gaps(trace, tree, s, a);
    const double w = static_cast<double>(row.weight);
    weight_sum += w;
    gap_acc += w * row.gap;
    if (row.surrogates.g_star) {
      gs_w += w;
      gs_acc += w * *row.surrogates.g_star;
    }
    if (row.surrogates.g1) {
      g1_w += w;
      g1_acc += w * *row.surrogates.g1;
    }
    if (row.surrogates.g2) {
      g2_w += w;
      g2_acc += w * *row.surrogates.g2;
    }
    if (row.surrogates.g3) {
      g3_w += w;
      g3_acc += w * *row.surrogates.g3;
    }
    if (row.surrogates.g4) {
      g4_w += w;
      g4_acc += w * *row.surrogates.g4;
    }
    report.edges.push_back(std::move(row));
  }
  report.weighted_gap = weight_sum > 0.0 ? gap_acc / weight_sum : 0.0;
  if (gs_w > 0.0) report.weighted_g_star = gs_acc / gs_w;
  if (g1_w > 0.0) report.weighted_g1 = g1_acc / g1_w;
  if (g2_w > 0.0) report.weighted_g2 = g2_acc / g2_w;
  if (g3_w > 0.0) report.weighted_g3 = g3_acc / g3_w;
  if (g4_w > 0.0) report.weighted_g4 = g4_acc / g4_w;
  return report;
}

ConditionVerdict check_necessary_conditions(const SpecializationConfig& cfg,
                                            const Mdp& env, int workers, int trials,
                                            std::uint64_t seed) {
  if (workers < 1) throw DomainError("worker count must be positive");
  ConditionVerdict verdict;

  if (!cfg.pseudo_count_is_o_only()) {
    verdict.n_checkable = false;
    verdict.note = "pseudo count is not a function of the incomplete count alone";
  } else {
    verdict.n_pass = true;
    for (int x = 0; x < workers; ++x) {
      if (cfg.pseudo_count_of_o(static_cast<double>(x)) < static_cast<double>(x)) {
        verdict.n_pass = false;
        verdict.n_witness = x;
        break;
      }
    }
  }

  // Monte Carlo battery for the value condition on a depth-2 arm.
  const StateId root = env.spec().root;
  if (env.actions_at(root) < 1) throw DomainError("battery env needs root actions");
  const auto [child, reward] = env.transition(root, 0);
  (void)reward;
  if (!env.is_terminal(child)) {
    verdict.q_checkable = false;
    verdict.note += (verdict.note.empty() ? "" : "; ");
    verdict.note += "value battery requires a depth-2 environment";
    return verdict;
  }
  struct Cell {
    int completed;
    int pending;
  };
  std::vector<Cell> cells{{1, 0}, {1, 1}, {2, 1}, {3, 2}, {5, 3}, {8, workers - 1}};
  double worst = 0.0, worst_lo = 0.0, worst_hi = 0.0;
  bool violated = false;
  // For bu_uct the battery exercises the finite branch of the thresholded
  // value, which is the plain mean.
  for (const Cell& cell : cells) {
    if (cell.pending < 0 || cell.pending > workers - 1) continue;
    std::vector<double> diffs(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
      // Matched base seeds: the sequential arm replays the parallel draws and
      // extends them by the pending count.
      RngStream rng(splitmix64(seed) ^ splitmix64(t * 977 + cell.completed * 31 +
                                                  cell.pending),
                    1);
      double sum = 0.0;
      for (int i = 0; i < cell.completed; ++i) sum += env.simulate(child, rng);
      const double q = sum / cell.completed;
      for (int i = 0; i < cell.pending; ++i) sum += env.simulate(child, rng);
      const double q_seq = sum / (cell.completed + cell.pending);
      EdgeView view{q, cell.completed, cell.pending};
      diffs[static_cast<std::size_t>(t)] = cfg.adjusted_q(view) - q_seq;
    }
    const double m = mean_of(diffs);
    const double se = trials > 1
                          ? population_std(diffs) / std::sqrt(static_cast<double>(trials))
                          : 0.0;
    const double lo = m - 1.96 * se;
    const double hi = m + 1.96 * se;
    if (std::abs(m) > std::abs(worst)) {
      worst = m;
      worst_lo = lo;
      worst_hi = hi;
    }
    if (lo > 0.0 || hi < 0.0) violated = true;
  }
  verdict.q_gap = worst;
  verdict.q_ci_lo = worst_lo;
  verdict.q_ci_hi = worst_hi;
  verdict.q_violated = violated;
  return verdict;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("spearman needs two samples of equal length >= 2");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return v[a] < v[b];
    });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace mctslab
