#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mctslab/common.hpp"
#include "mctslab/rng.hpp"

namespace mctslab {

// Tabular MDP with deterministic transitions, bounded rewards and stochastic
// simulation returns. Terminal states carry an expected payoff that simulation
// observes under Gaussian noise. Reachability from the root must form a tree
// (no transpositions), which lets (state, action) name an edge globally.
struct MdpSpec {
  std::string kind = "custom";  // depth2 | rtree | custom
  int state_count = 0;
  int action_count = 0;  // actions per non-terminal state
  double discount = 1.0;
  double reward_min = 0.0;
  double reward_max = 0.0;
  double noise_sigma = 1.0;
  StateId root = 0;
  std::uint64_t seed = 0;
  int sim_horizon = 10000;

  std::vector<std::int32_t> next;      // [state * action_count + a]
  std::vector<double> reward;          // [state * action_count + a]
  std::vector<std::uint8_t> terminal;  // [state]
  std::vector<double> terminal_value;  // [state], expected payoff at terminals
};

class Mdp {
 public:
  explicit Mdp(MdpSpec spec);

  const MdpSpec& spec() const { return spec_; }

  bool is_terminal(StateId s) const;
  int actions_at(StateId s) const;  // 0 at terminals
  int depth_of(StateId s) const;    // edge distance from root
  int max_depth() const { return max_depth_; }

  // Deterministic: repeated calls with the same (s, a) return the same pair.
  std::pair<StateId, double> transition(StateId s, Action a) const;

  // Noisy value oracle: discounted return of a uniform-random default policy
  // rolled to a terminal (or the horizon), plus the terminal payoff and
  // Gaussian noise. At a terminal state this is terminal_value + sigma * z.
  double simulate(StateId s, RngStream& rng) const;

  double expected_simulation_value(StateId s) const;

  // V*(s) by exact dynamic programming over the declared state space.
  double optimal_value(StateId s) const;

  void set_dp_capacity_limit(std::int64_t limit) { dp_limit_ = limit; }

 private:
  void validate_and_index();
  void ensure_values() const;
  void check_state(StateId s) const;

  MdpSpec spec_;
  std::vector<int> depth_;
  int max_depth_ = 0;
  std::vector<StateId> bottom_up_;  // states ordered deepest first
  std::int64_t dp_limit_ = 50'000'000;
  mutable bool values_ready_ = false;
  mutable std::vector<double> vstar_;
  mutable std::vector<double> vuniform_;
};

// Root with `arms` actions, each reaching a terminal whose expected payoff is
// mu_k = mu_star - gaps[k] with mu_star = 1. Edge rewards are zero and the
// discount is 1, so all value sits in the terminal simulation returns.
Mdp make_depth_two(int arms, const std::vector<double>& gaps, double sigma,
                   std::uint64_t seed);
Mdp make_depth_two_from_means(const std::vector<double>& means, double sigma,
                              std::uint64_t seed);

struct RandomTreeOptions {
  double reward_lo = 0.0;
  double reward_hi = 1.0;
  double sigma = 1.0;
  double discount = 1.0;
};

// Complete `branching`-ary tree with `depth` levels of edges; edge rewards are
// drawn uniformly from [reward_lo, reward_hi] using the given seed, terminals
// sit at the bottom level with value zero.
Mdp make_random_tree(int depth, int branching, std::uint64_t seed,
                     const RandomTreeOptions& opts = {});

std::string env_to_json(const Mdp& env);
Mdp env_from_json(const std::string& text);

}  // namespace mctslab
