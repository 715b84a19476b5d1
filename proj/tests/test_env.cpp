#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mctslab/env.hpp"

using namespace mctslab;

namespace {

// Independent oracle: exhaustive enumeration of all action sequences.
double best_path_value(const Mdp& env, StateId s) {
  if (env.is_terminal(s)) return env.spec().terminal_value[s];
  double best = -1e300;
  for (Action a = 0; a < env.actions_at(s); ++a) {
    const auto [next, reward] = env.transition(s, a);
    best = std::max(best, reward + env.spec().discount * best_path_value(env, next));
  }
  return best;
}

MdpSpec two_level_spec() {
  // root 0 -> {1, 2}; 1 -> {3, 4}; 2 -> {5, 6}; rewards per the example:
  // a0: 1 then {0.5, 0.2}; a1: 0 then {2, 1}.
  MdpSpec s;
  s.kind = "custom";
  s.state_count = 7;
  s.action_count = 2;
  s.discount = 1.0;
  s.reward_min = 0.0;
  s.reward_max = 2.0;
  s.noise_sigma = 0.0;
  s.sim_horizon = 4;
  s.next = {1, 2, 3, 4, 5, 6, 0, 0, 0, 0, 0, 0, 0, 0};
  s.reward = {1.0, 0.0, 0.5, 0.2, 2.0, 1.0, 0, 0, 0, 0, 0, 0, 0, 0};
  s.terminal = {0, 0, 0, 1, 1, 1, 1};
  s.terminal_value = {0, 0, 0, 0, 0, 0, 0};
  return s;
}

}  // namespace

TEST_CASE("depth-2 transitions are deterministic and guarded") {
  const Mdp env = make_depth_two(3, {0.0, 0.2, 0.5}, 1.0, 42);
  for (Action k = 0; k < 3; ++k) {
    const auto [next, reward] = env.transition(0, k);
    CHECK(next == k + 1);
    CHECK(reward == 0.0);
    CHECK(env.is_terminal(next));
    CHECK(env.transition(0, k) == env.transition(0, k));
  }
  CHECK_THROWS_AS(env.transition(0, 3), DomainError);
  CHECK_THROWS_AS(env.transition(99, 0), DomainError);
  CHECK_THROWS_AS(env.transition(1, 0), DomainError);  // terminal
}

TEST_CASE("random tree transitions repeat exactly") {
  const Mdp env = make_random_tree(3, 2, 7);
  for (StateId s = 0; s < 3; ++s)
    for (Action a = 0; a < 2; ++a) CHECK(env.transition(s, a) == env.transition(s, a));
  const Mdp again = make_random_tree(3, 2, 7);
  CHECK(env.spec().reward == again.spec().reward);
}

TEST_CASE("simulate is exact without noise and unbiased with it") {
  const Mdp quiet = make_depth_two_from_means({0.3, 0.8}, 0.0, 1);
  RngStream rng(5, 1);
  CHECK(quiet.simulate(1, rng) == 0.3);

  const Mdp noisy = make_depth_two_from_means({0.3, 0.8}, 1.0, 1);
  RngStream stream(11, 1);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += noisy.simulate(1, stream);
  CHECK(std::abs(sum / draws - 0.3) < 0.02);

  RngStream a(3, 1), b(3, 1);
  CHECK(noisy.simulate(2, a) == noisy.simulate(2, b));
}

TEST_CASE("simulation noise looks gaussian (kurtosis sanity)") {
  const Mdp env = make_depth_two_from_means({0.0, 0.0}, 1.0, 1);
  RngStream rng(99, 1);
  const int n = 100000;
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = env.simulate(1, rng);
    m2 += v * v;
    m4 += v * v * v * v;
  }
  m2 /= n;
  m4 /= n;
  const double excess_kurtosis = m4 / (m2 * m2) - 3.0;
  CHECK(std::abs(excess_kurtosis) < 0.1);
}

TEST_CASE("optimal_value on the depth-2 task is the best mean") {
  const Mdp env = make_depth_two_from_means({0.1, 0.9, 0.5}, 1.0, 0);
  CHECK(env.optimal_value(0) == doctest::Approx(0.9));
  CHECK(env.optimal_value(2) == doctest::Approx(0.9));  // terminal: its own mean
}

TEST_CASE("optimal_value matches exhaustive path enumeration") {
  const Mdp example(two_level_spec());
  CHECK(example.optimal_value(0) == doctest::Approx(2.0));

  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    RandomTreeOptions opts;
    opts.discount = 0.9;
    const Mdp env = make_random_tree(4, 3, seed, opts);
    CHECK(env.optimal_value(0) == doctest::Approx(best_path_value(env, 0)).epsilon(1e-12));
  }
}

TEST_CASE("uniform-policy simulation mean matches the dynamic program") {
  const Mdp env = make_random_tree(3, 2, 21, RandomTreeOptions{0.0, 1.0, 0.0, 1.0});
  RngStream rng(4, 1);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) sum += env.simulate(0, rng);
  CHECK(std::abs(sum / draws - env.expected_simulation_value(0)) < 0.01);
}

TEST_CASE("make_depth_two places the optimal mean by convention") {
  const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 0);
  CHECK(env.spec().terminal_value[1] == doctest::Approx(1.0));
  CHECK(env.spec().terminal_value[2] == doctest::Approx(0.5));

  const Mdp four = make_depth_two(4, {0.0, 0.2, 0.3, 0.5}, 1.0, 0);
  for (int k = 1; k < 4; ++k)
    CHECK(four.spec().terminal_value[k] > four.spec().terminal_value[k + 1]);

  CHECK_THROWS_AS(make_depth_two(1, {0.0}, 1.0, 0), DomainError);
  CHECK_THROWS_AS(make_depth_two(2, {0.1, 0.5}, 1.0, 0), DomainError);
  CHECK_THROWS_AS(make_depth_two(2, {0.0, -0.5}, 1.0, 0), DomainError);
}

TEST_CASE("declared bounds cover rewards and terminal means") {
  const Mdp env = make_random_tree(3, 3, 5);
  const MdpSpec& s = env.spec();
  for (StateId st = 0; st < s.state_count; ++st) {
    if (s.terminal[st]) {
      CHECK(s.terminal_value[st] >= s.reward_min);
      CHECK(s.terminal_value[st] <= s.reward_max);
      continue;
    }
    for (Action a = 0; a < s.action_count; ++a) {
      const double r = s.reward[st * s.action_count + a];
      CHECK(r >= s.reward_min);
      CHECK(r <= s.reward_max);
    }
  }
}

TEST_CASE("environment json round trips") {
  const Mdp env = make_depth_two(3, {0.0, 0.1, 0.4}, 0.5, 9);
  const Mdp back = env_from_json(env_to_json(env));
  CHECK(back.spec().next == env.spec().next);
  CHECK(back.spec().reward == env.spec().reward);
  CHECK(back.spec().terminal_value == env.spec().terminal_value);
  CHECK(back.spec().noise_sigma == env.spec().noise_sigma);
  CHECK(back.spec().seed == env.spec().seed);
  CHECK_THROWS_AS(env_from_json("{not json"), DomainError);
  CHECK_THROWS_AS(env_from_json("{\"state_count\": 1}"), DomainError);
}

TEST_CASE("dynamic programming capacity guard") {
  Mdp env = make_random_tree(4, 3, 1);
  env.set_dp_capacity_limit(10);
  CHECK_THROWS_AS(env.optimal_value(0), CapacityError);
}

TEST_CASE("non-tree reachability is rejected") {
  MdpSpec s = two_level_spec();
  s.next[3] = 3;  // (1, a1) joins (1, a0)'s child: two paths into state 3
  CHECK_THROWS_AS(Mdp(std::move(s)), DomainError);
}

TEST_CASE("discount and sigma validation") {
  MdpSpec s = two_level_spec();
  s.discount = 0.0;
  CHECK_THROWS_AS(Mdp{s}, DomainError);
  s.discount = 1.5;
  CHECK_THROWS_AS(Mdp{s}, DomainError);
  s = two_level_spec();
  s.noise_sigma = -1.0;
  CHECK_THROWS_AS(Mdp{s}, DomainError);
}
