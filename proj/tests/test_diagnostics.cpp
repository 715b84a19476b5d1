#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "mctslab/diagnostics.hpp"

using namespace mctslab;

namespace {

RolloutTrace trace_from(const std::vector<double>& v, double v_star,
                        const std::vector<Action>& actions = {}) {
  RolloutTrace t;
  for (std::size_t i = 0; i < v.size(); ++i) {
    TraceRow row;
    row.rollout = static_cast<std::int64_t>(i) + 1;
    row.v_root = v[i];
    row.v_star = v_star;
    row.root_action = actions.empty() ? 0 : actions[i];
    t.rows.push_back(row);
  }
  t.v_star = v_star;
  return t;
}

AlgoParams vl(double r, double n) {
  AlgoParams p;
  p.r_vl = r;
  p.n_vl = n;
  return p;
}

}  // namespace

TEST_CASE("cumulative regret sums the oracle shortfall") {
  CHECK(cumulative_regret(trace_from({1.0, 0.5, 1.0}, 1.0)) == doctest::Approx(0.5));
  CHECK(cumulative_regret(trace_from({1.0, 1.0}, 1.0)) == doctest::Approx(0.0));
  RolloutTrace empty;
  CHECK_THROWS_AS(cumulative_regret(empty), DomainError);
  RolloutTrace bad = trace_from({1.0}, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(cumulative_regret(bad), DomainError);
}

TEST_CASE("alternating arms on a half-gap task cost half a unit each") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 0.0, 0);
  std::vector<double> values;
  std::vector<Action> actions;
  for (int i = 0; i < 10; ++i) {
    actions.push_back(i % 2);
    values.push_back(i % 2 == 0 ? 1.0 : 0.5);
  }
  RolloutTrace t = trace_from(values, 1.0, actions);
  CHECK(cumulative_regret(t) == doctest::Approx(2.5));
  CHECK(expected_regret_depth_two(t, env) == doctest::Approx(2.5));
}

TEST_CASE("excess regret compares matched repetition sets") {
  CHECK(excess_regret({1.0, 2.0}, {1.0, 2.0}) == doctest::Approx(0.0));
  CHECK(excess_regret({1.5, 2.5}, {1.0, 2.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(excess_regret({1.0}, {1.0, 2.0}), DomainError);
  const auto [lo, hi] = bootstrap_mean_diff_ci({2.0, 2.1, 1.9, 2.0}, {1.0, 1.1, 0.9, 1.0},
                                               0.95, 500, 3);
  CHECK(lo <= 1.0);
  CHECK(hi >= 1.0);
}

TEST_CASE("the depth-2 bound evaluates to its frozen values") {
  const RegretBound b = wu_uct_regret_bound(2, {0.0, 0.5}, 1024, 4);
  CHECK(b.r_uct == doctest::Approx(118.34).epsilon(1e-4));
  CHECK(b.excess == doctest::Approx(1.52).epsilon(1e-2));
  CHECK_THROWS_AS(wu_uct_regret_bound(2, {0.0, 0.5}, 1, 4), DomainError);
  CHECK_THROWS_AS(wu_uct_regret_bound(2, {0.0}, 16, 4), DomainError);
}

TEST_CASE("excess shrinks like one over the square root of log n") {
  // ln of the rounded exponentials is within 1e-3 of 4 and 16.
  const auto small = wu_uct_regret_bound(2, {0.0, 0.3}, std::llround(std::exp(4.0)), 4);
  const auto large = wu_uct_regret_bound(2, {0.0, 0.3}, std::llround(std::exp(16.0)), 4);
  CHECK(large.excess / small.excess == doctest::Approx(0.5).epsilon(1e-2));
  // Linear in the worker count.
  const auto m4 = wu_uct_regret_bound(3, {0.0, 0.2, 0.4}, 256, 4);
  const auto m8 = wu_uct_regret_bound(3, {0.0, 0.2, 0.4}, 256, 8);
  CHECK(m8.excess == doctest::Approx(2.0 * m4.excess));
}

TEST_CASE("bound monotonicity over the test grid") {
  double prev = 0.0;
  for (const std::int64_t n : {4LL, 16LL, 64LL, 256LL, 1024LL, 4096LL}) {
    const auto b = wu_uct_regret_bound(4, {0.0, 0.2, 0.3, 0.5}, n, 4);
    CHECK(b.total() > prev);
    prev = b.total();
  }
  for (const int m : {1, 2, 4, 8, 16}) {
    const auto lo = wu_uct_regret_bound(4, {0.0, 0.2, 0.3, 0.5}, 256, m);
    const auto hi = wu_uct_regret_bound(4, {0.0, 0.2, 0.3, 0.5}, 256, m + 1);
    CHECK(hi.total() > lo.total());
  }
  // The sequential term falls as the gap grows while 8/gap dominates (gap
  // below 2); the parallel excess grows with the square of the gap.
  double prev_term = 1e300;
  for (const double d : {0.1, 0.3, 0.6, 1.0, 1.5}) {
    const auto b = wu_uct_regret_bound(2, {0.0, d}, 256, 4);
    CHECK(b.r_uct < prev_term);
    prev_term = b.r_uct;
  }
}

TEST_CASE("gap vanishes for an unbiased estimator at a terminal child") {
  const Mdp env = make_depth_two_from_means({0.3, 0.8}, 1.0, 1);
  const auto gap = action_value_gap(env, 1, 0.3, 5, 2000, 42);
  REQUIRE(gap.has_value());
  CHECK(gap->gap < 0.05);
  CHECK(gap->stderr_ > 0.0);
  CHECK(gap->m == 5);
}

TEST_CASE("noise-free gaps come from single runs with zero stderr") {
  const Mdp env = make_depth_two_from_means({0.3, 0.8}, 0.0, 1);
  const auto gap = action_value_gap(env, 1, 0.3, 4, 1, 42);
  REQUIRE(gap.has_value());
  CHECK(gap->gap == doctest::Approx(0.0));
  CHECK(gap->stderr_ == 0.0);
}

TEST_CASE("a hard virtual loss shows up as its full penalty") {
  const Mdp env = make_depth_two_from_means({0.3, 0.8}, 0.0, 1);
  const auto hard = make_specialization(AlgoKind::vl_hard, 4, vl(1.0, 1.0));
  EdgeView view{0.3, 4, 2};
  const double q_bar = hard.adjusted_q(view);  // 0.3 - 2
  const auto gap = action_value_gap(env, 1, q_bar, 6, 1, 42);
  REQUIRE(gap.has_value());
  CHECK(gap->gap == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero-budget edges report no gap") {
  const Mdp env = make_depth_two_from_means({0.3, 0.8}, 1.0, 1);
  CHECK_FALSE(action_value_gap(env, 1, 0.3, 0, 10, 1).has_value());
}

TEST_CASE("gap against an internal child runs the sequential oracle") {
  const Mdp env = make_random_tree(2, 2, 5, RandomTreeOptions{0.0, 1.0, 0.1, 1.0});
  const StateId child = env.transition(0, 0).first;
  const auto gap = action_value_gap(env, child, env.optimal_value(child), 32, 64, 9);
  REQUIRE(gap.has_value());
  // The sequential oracle concentrates near the child's optimal value.
  CHECK(gap->gap < 0.25);
}

TEST_CASE("surrogate gaps from a hand-built trace") {
  // Tree: 0 -(a0)-> 1 with children (1, a0) and (1, a1).
  const Mdp env = make_random_tree(2, 2, 3, RandomTreeOptions{0.0, 1.0, 0.0, 1.0});
  SearchTree tree(&env, 0);
  const StateId mid = tree.expand(0, 0);
  tree.expand(mid, 0);
  tree.expand(mid, 1);

  RolloutTrace trace;
  const auto root_edge = trace.edges.intern(edge_key(0, 0));
  const auto child_a = trace.edges.intern(edge_key(mid, 0));
  const auto child_b = trace.edges.intern(edge_key(mid, 1));
  (void)root_edge;
  // Three rollouts; incomplete histories [0, 1, 2] and [0, 0, 1].
  const std::vector<std::vector<int>> histories{{0, 0}, {1, 0}, {2, 1}};
  for (const auto& h : histories) {
    SelectionSnapshot snap;
    if (h[0] > 0) snap.inflight.emplace_back(child_a, h[0]);
    if (h[1] > 0) snap.inflight.emplace_back(child_b, h[1]);
    snap.adjusted_q.assign(trace.edges.size(), 0.0);
    trace.snapshots.push_back(snap);
    TraceRow row;
    row.rollout = static_cast<std::int64_t>(trace.rows.size()) + 1;
    row.v_star = 0.0;
    trace.rows.push_back(row);
  }
  CHECK(o_bar_from_snapshots(trace, mid, 0) == doctest::Approx(1.0));
  CHECK(o_bar_from_snapshots(trace, mid, 1) == doctest::Approx(1.0 / 3.0));
  const SurrogateGaps gaps = surrogate_gaps(trace, tree, 0, 0);
  REQUIRE(gaps.g_star.has_value());
  CHECK(*gaps.g_star == doctest::Approx(1.0));
}

TEST_CASE("return-record spreads drive the std-style surrogates") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 0);
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  RolloutTrace trace;
  trace.edges.intern(edge_key(0, 0));
  TraceRow row;
  row.v_star = 0.0;
  trace.rows.assign(2, row);

  EdgeStats* e = tree.edge(0, 0);
  e->records.append(1.0, 1);
  e->records.append(1.0, 2);
  e->records.append(1.0, 3);
  SurrogateGaps gaps = surrogate_gaps(trace, tree, 0, 0);
  REQUIRE(gaps.g1.has_value());
  CHECK(*gaps.g1 == doctest::Approx(0.0));

  SearchTree spread(&env, 0);
  spread.expand(0, 0);
  spread.edge(0, 0)->records.append(0.0, 1);
  spread.edge(0, 0)->records.append(2.0, 2);
  gaps = surrogate_gaps(trace, spread, 0, 0);
  CHECK(*gaps.g1 == doctest::Approx(1.0));  // population std
  CHECK(*gaps.g3 == doctest::Approx(1.0));  // std over mean = 1/1

  SearchTree centered(&env, 0);
  centered.expand(0, 0);
  centered.edge(0, 0)->records.append(-1.0, 1);
  centered.edge(0, 0)->records.append(1.0, 2);
  gaps = surrogate_gaps(trace, centered, 0, 0);
  CHECK_FALSE(gaps.g3.has_value());  // zero mean: reported as absent
}

TEST_CASE("snapshot and online incomplete averages agree to 1e-12") {
  const Mdp env = make_depth_two(4, {0.0, 0.2, 0.3, 0.5}, 1.0, 3);
  AlgoParams p;
  p.c_policy = CPolicy{CPolicy::Mode::fixed, 1.0};
  const auto cfg = make_specialization(AlgoKind::wu_uct, 4, p);
  const RunResult run = run_search(env, cfg, 200, ExecMode::virtual_time, 5);
  for (Action a = 0; a < 4; ++a) {
    const auto snap = o_bar_from_snapshots(run.trace, 0, a);
    const auto online = o_bar_online(run.trace, 0, a);
    REQUIRE(snap.has_value());
    REQUIRE(online.has_value());
    CHECK(*snap == doctest::Approx(*online).epsilon(1e-12));
  }
}

TEST_CASE("count-condition verdicts over the table rows") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 7);
  const int workers = 16;
  const auto check = [&](const SpecializationConfig& cfg) {
    return check_necessary_conditions(cfg, env, workers, 200);
  };

  CHECK(check(make_specialization(AlgoKind::wu_uct, workers)).n_pass);
  AlgoParams bu;
  bu.m_max = 0.8;
  CHECK(check(make_specialization(AlgoKind::bu_uct, workers, bu)).n_pass);

  for (const AlgoKind kind : {AlgoKind::leafp, AlgoKind::rootp, AlgoKind::treep}) {
    const auto verdict = check(make_specialization(kind, workers));
    CHECK_FALSE(verdict.n_pass);
    CHECK(verdict.n_witness == 1);
  }
  const auto hard = check(make_specialization(AlgoKind::vl_hard, workers, vl(1.0, 1.0)));
  CHECK_FALSE(hard.n_pass);
  CHECK(hard.n_witness == 1);

  CHECK(check(make_specialization(AlgoKind::vl_soft, workers, vl(1.0, 2.0))).n_pass);
  CHECK(check(make_specialization(AlgoKind::vl_soft, workers, vl(1.0, 1.0))).n_pass);
  const auto weak = check(make_specialization(AlgoKind::vl_soft, workers, vl(1.0, 0.5)));
  CHECK_FALSE(weak.n_pass);
  CHECK(weak.n_witness > 0);
}

TEST_CASE("custom pseudo-count laws are clamped at zero before checking") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 7);
  AlgoParams params;
  params.custom_pseudo_n = [](double o) { return o - 1.0; };
  const auto cfg = make_specialization(AlgoKind::custom, 8, params);
  const auto verdict = check_necessary_conditions(cfg, env, 8, 100);
  CHECK_FALSE(verdict.n_pass);
  CHECK(verdict.n_witness == 1);  // f(0) clamps to 0, so x = 1 is the witness
}

TEST_CASE("value condition flags the virtual-loss penalty and spares wu_uct") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 7);
  const auto hard =
      check_necessary_conditions(make_specialization(AlgoKind::vl_hard, 8, vl(1.0, 1.0)),
                                 env, 8, 400);
  CHECK(hard.q_violated);
  const auto wu =
      check_necessary_conditions(make_specialization(AlgoKind::wu_uct, 8), env, 8, 400);
  CHECK_FALSE(wu.q_violated);
}

TEST_CASE("spearman handles monotone data and ties") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 1, 2, 2}, {1, 1, 2, 2}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(spearman({1.0}, {1.0}), DomainError);
}
