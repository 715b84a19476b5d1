#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "mctslab/algos.hpp"
#include "mctslab/env.hpp"
#include "mctslab/framework.hpp"
#include "mctslab/tree.hpp"

using namespace mctslab;

namespace {

AlgoParams vl_params(double r, double n) {
  AlgoParams p;
  p.r_vl = r;
  p.n_vl = n;
  return p;
}

AlgoParams bu_params(double m_max) {
  AlgoParams p;
  p.m_max = m_max;
  return p;
}

}  // namespace

TEST_CASE("specialization rows carry their table parameters") {
  const auto uct = make_specialization(AlgoKind::uct, 1);
  CHECK(uct.tree_count == 1);
  CHECK(uct.sync_interval == 1);

  const auto leafp = make_specialization(AlgoKind::leafp, 4);
  CHECK(leafp.tree_count == 4);
  CHECK(leafp.sync_interval == 4);
  CHECK(leafp.cycle_barrier);

  const auto rootp = make_specialization(AlgoKind::rootp, 4);
  CHECK(rootp.sync_interval == 0);  // resolved to the full budget at run time

  const auto treep = make_specialization(AlgoKind::treep, 4);
  CHECK(treep.sync_interval == 1);
  EdgeView busy{0.7, 5, 7};
  CHECK(treep.adjusted_n(busy) == doctest::Approx(5.0));
  CHECK(treep.adjusted_q(busy) == doctest::Approx(0.7));

  const auto wu = make_specialization(AlgoKind::wu_uct, 4);
  EdgeView view{0.3, 3, 2};
  CHECK(wu.adjusted_n(view) == doctest::Approx(5.0));
  CHECK(wu.adjusted_q(view) == doctest::Approx(0.3));
}

TEST_CASE("vl_soft reproduces the soft-penalty algebra") {
  const auto soft = make_specialization(AlgoKind::vl_soft, 4, vl_params(1.0, 2.0));
  EdgeView view{0.5, 4, 1};
  CHECK(soft.adjusted_q(view) == doctest::Approx(0.0));
  CHECK(soft.adjusted_n(view) == doctest::Approx(6.0));
  // Weights collapse gracefully on an untouched edge.
  EdgeView empty{0.0, 0, 0};
  CHECK(soft.adjusted_q(empty) == doctest::Approx(0.0));
  CHECK(soft.adjusted_n(empty) == doctest::Approx(0.0));
}

TEST_CASE("required parameters are enforced") {
  CHECK_THROWS_AS(make_specialization(AlgoKind::vl_hard, 4), ConfigError);
  CHECK_THROWS_AS(make_specialization(AlgoKind::vl_soft, 4, vl_params(1.0, -1.0)),
                  ConfigError);
  AlgoParams only_r;
  only_r.r_vl = 1.0;
  CHECK_THROWS_AS(make_specialization(AlgoKind::vl_soft, 4, only_r), ConfigError);
  CHECK_THROWS_AS(make_specialization(AlgoKind::bu_uct, 4), ConfigError);
  CHECK_THROWS_AS(make_specialization(AlgoKind::bu_uct, 4, bu_params(1.5)), ConfigError);
  CHECK_THROWS_AS(make_specialization(AlgoKind::uct, 0), ConfigError);
  CHECK_THROWS_AS(algo_kind_from_string("nonsense"), ConfigError);
}

TEST_CASE("thresholded value blocks saturated edges, boundary included") {
  BuUctParams bu;
  bu.m_max = 0.8;
  CHECK(bu_uct_modified_q(0.7, 5.0, bu, 16) == doctest::Approx(0.7));
  CHECK(bu_uct_modified_q(0.7, 12.9, bu, 16) ==
        -std::numeric_limits<double>::infinity());
  CHECK(bu_uct_modified_q(0.7, 12.8, bu, 16) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("saturated edges are never picked by the tree policy") {
  const Mdp env = make_depth_two(2, {0.0, 0.0}, 1.0, 0);
  const auto cfg = make_specialization(AlgoKind::bu_uct, 16, bu_params(0.8));
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  tree.expand(0, 1);
  tree.edge(0, 0)->visit_count = 4;
  tree.edge(0, 0)->q = 0.9;
  tree.edge(0, 0)->inflight_avg = 13.0;  // above 12.8
  tree.edge(0, 1)->visit_count = 4;
  tree.edge(0, 1)->q = 0.1;
  tree.edge(0, 1)->inflight_avg = 1.0;
  CHECK(tree.select_action(0, cfg, 1.0) == 1);
  // All saturated: fail open toward the least loaded edge.
  tree.edge(0, 1)->inflight_avg = 14.0;
  CHECK(tree.select_action(0, cfg, 1.0) == 0);
}

TEST_CASE("incomplete_update traces the running average by hand") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 0);
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  const Path path{PathStep{0, 0}};
  tree.incomplete_update(path);
  CHECK(tree.edge(0, 0)->inflight == 1);
  CHECK(tree.edge(0, 0)->inflight_avg == doctest::Approx(1.0));
  tree.incomplete_update(path);
  CHECK(tree.edge(0, 0)->inflight == 2);
  CHECK(tree.edge(0, 0)->inflight_avg == doctest::Approx(1.5));
}

TEST_CASE("constant load is the running average's fixed point") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 0);
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  const Path path{PathStep{0, 0}};
  const int k = 3;
  for (int i = 0; i < k; ++i) tree.incomplete_update(path);
  for (int i = 0; i < 400; ++i) {
    tree.complete_update(path, 0.0, static_cast<std::uint64_t>(i));
    tree.incomplete_update(path);
  }
  CHECK(tree.edge(0, 0)->inflight == k);
  CHECK(tree.edge(0, 0)->inflight_avg == doctest::Approx(k).epsilon(0.01));
}

TEST_CASE("complete_update accumulates the reward-inclusive mean") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 0);
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  tree.incomplete_update({PathStep{0, 0}});
  tree.complete_update({PathStep{0, 0}}, 2.0, 1);
  CHECK(tree.edge(0, 0)->visit_count == 1);
  CHECK(tree.edge(0, 0)->q == doctest::Approx(2.0));
  CHECK_THROWS_AS(tree.complete_update({PathStep{0, 0}}, 1.0, 2), InvariantViolation);
}

TEST_CASE("complete_update runs the cumulative reward recursion") {
  MdpSpec s;
  s.state_count = 3;
  s.action_count = 1;
  s.discount = 0.99;
  s.reward_min = 0.0;
  s.reward_max = 1.0;
  s.noise_sigma = 0.0;
  s.sim_horizon = 4;
  s.next = {1, 2, 0};
  s.reward = {1.0, 1.0, 0.0};
  s.terminal = {0, 0, 1};
  s.terminal_value = {0.0, 0.0, 0.0};
  const Mdp env(std::move(s));
  SearchTree tree(&env, 0);
  tree.expand(0, 0);
  tree.expand(1, 0);
  const Path path{PathStep{0, 0}, PathStep{1, 0}};
  tree.incomplete_update(path);
  tree.complete_update(path, 0.0, 1);
  // At the deeper edge the return is its reward, 1; the parent sees 1 + 0.99.
  CHECK(tree.edge(1, 0)->q == doctest::Approx(1.0));
  CHECK(tree.edge(0, 0)->q == doctest::Approx(1.99));
}

TEST_CASE("first expansion of a node collapses its parent edge count") {
  const Mdp env = make_random_tree(2, 2, 3);
  SearchTree tree(&env, 0);
  const StateId child = tree.expand(0, 0);
  EdgeStats* parent_edge = tree.edge(0, 0);
  parent_edge->visit_count = 3;
  parent_edge->q = 0.4;
  tree.expand(child, 0);
  tree.aggregate_parent_edge(child);
  CHECK(parent_edge->visit_count == 1);
  CHECK(parent_edge->q == doctest::Approx(0.4));
  CHECK(parent_edge->aggregated);
  // Repeating the collapse is a no-op once the count is 1.
  tree.aggregate_parent_edge(child);
  CHECK(parent_edge->visit_count == 1);
  // The root has no parent edge: nothing to collapse.
  tree.aggregate_parent_edge(0);
}

TEST_CASE("with one worker every table row collapses to sequential uct") {
  const Mdp env = make_depth_two(4, {0.0, 0.2, 0.3, 0.5}, 1.0, 11);
  AlgoParams fixed_c;
  fixed_c.c_policy = CPolicy{CPolicy::Mode::fixed, 1.0};
  const auto reference =
      run_search(env, make_specialization(AlgoKind::uct, 1, fixed_c), 60,
                 ExecMode::virtual_time, 5);
  for (const AlgoKind kind : {AlgoKind::leafp, AlgoKind::rootp, AlgoKind::treep,
                              AlgoKind::wu_uct, AlgoKind::vl_hard, AlgoKind::vl_soft}) {
    AlgoParams params = fixed_c;
    if (kind == AlgoKind::vl_hard || kind == AlgoKind::vl_soft) params.r_vl = 1.0;
    if (kind == AlgoKind::vl_soft) params.n_vl = 2.0;
    const auto run = run_search(env, make_specialization(kind, 1, params), 60,
                                ExecMode::virtual_time, 5);
    CHECK(stats_equal(run.tree, reference.tree));
    REQUIRE(run.trace.rows.size() == reference.trace.rows.size());
    for (std::size_t i = 0; i < run.trace.rows.size(); ++i) {
      CHECK(run.trace.rows[i].root_action == reference.trace.rows[i].root_action);
      CHECK(run.trace.rows[i].v_root == reference.trace.rows[i].v_root);
    }
  }
}
