#include "mctslab/env.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "json.hpp"

namespace mctslab {

namespace {

std::int64_t cell(const MdpSpec& spec, StateId s, Action a) {
  return static_cast<std::int64_t>(s) * spec.action_count + a;
}

}  // namespace

Mdp::Mdp(MdpSpec spec) : spec_(std::move(spec)) { validate_and_index(); }

void Mdp::validate_and_index() {
  const auto& s = spec_;
  if (s.state_count <= 0) throw DomainError("state_count must be positive");
  if (s.action_count <= 0) throw DomainError("action_count must be positive");
  if (s.action_count >= (1 << 16)) throw DomainError("action_count too large");
  if (!(s.discount > 0.0 && s.discount <= 1.0))
    throw DomainError("discount must lie in (0, 1]");
  if (s.noise_sigma < 0.0) throw DomainError("noise_sigma must be nonnegative");
  if (s.root < 0 || s.root >= s.state_count) throw DomainError("root out of range");
  const std::size_t cells =
      static_cast<std::size_t>(s.state_count) * static_cast<std::size_t>(s.action_count);
  if (s.terminal.size() != static_cast<std::size_t>(s.state_count) ||
      s.terminal_value.size() != static_cast<std::size_t>(s.state_count) ||
      s.next.size() != cells || s.reward.size() != cells)
    throw DomainError("mdp table sizes inconsistent with state/action counts");

  for (StateId st = 0; st < s.state_count; ++st) {
    if (s.terminal[st]) {
      if (s.terminal_value[st] < s.reward_min - 1e-12 ||
          s.terminal_value[st] > s.reward_max + 1e-12)
        throw DomainError("terminal value outside declared reward bound");
      continue;
    }
    for (Action a = 0; a < s.action_count; ++a) {
      const auto c = cell(s, st, a);
      if (s.next[c] < 0 || s.next[c] >= s.state_count)
        throw DomainError("transition leaves the declared state set");
      if (s.reward[c] < s.reward_min - 1e-12 || s.reward[c] > s.reward_max + 1e-12)
        throw DomainError("reward outside declared bound");
    }
  }

  // Reachability from the root must form a tree: unique parent, no revisit.
  depth_.assign(s.state_count, -1);
  depth_[s.root] = 0;
  std::deque<StateId> frontier{s.root};
  bottom_up_.clear();
  std::vector<StateId> order;
  while (!frontier.empty()) {
    const StateId cur = frontier.front();
    frontier.pop_front();
    order.push_back(cur);
    max_depth_ = std::max(max_depth_, depth_[cur]);
    if (s.terminal[cur]) continue;
    for (Action a = 0; a < s.action_count; ++a) {
      const StateId nxt = s.next[cell(s, cur, a)];
      if (depth_[nxt] != -1)
        throw DomainError("state reachable along two paths; search space must be a tree");
      depth_[nxt] = depth_[cur] + 1;
      frontier.push_back(nxt);
    }
  }
  bottom_up_.assign(order.rbegin(), order.rend());
}

bool Mdp::is_terminal(StateId s) const {
  check_state(s);
  return spec_.terminal[s] != 0;
}

int Mdp::actions_at(StateId s) const { return is_terminal(s) ? 0 : spec_.action_count; }

int Mdp::depth_of(StateId s) const {
  check_state(s);
  return depth_[s];
}

void Mdp::check_state(StateId s) const {
  if (s < 0 || s >= spec_.state_count) throw DomainError("unknown state");
}

std::pair<StateId, double> Mdp::transition(StateId s, Action a) const {
  check_state(s);
  if (spec_.terminal[s]) throw DomainError("transition from a terminal state");
  if (a < 0 || a >= spec_.action_count) throw DomainError("unknown action");
  const auto c = cell(spec_, s, a);
  return {spec_.next[c], spec_.reward[c]};
}

double Mdp::simulate(StateId s, RngStream& rng) const {
  check_state(s);
  double value = 0.0;
  double scale = 1.0;
  StateId cur = s;
  for (int step = 0; step < spec_.sim_horizon && !spec_.terminal[cur]; ++step) {
    const Action a = static_cast<Action>(rng.uniform_int(spec_.action_count));
    const auto c = cell(spec_, cur, a);
    value += scale * spec_.reward[c];
    scale *= spec_.discount;
    cur = spec_.next[c];
  }
  if (spec_.terminal[cur]) value += scale * spec_.terminal_value[cur];
  return value + spec_.noise_sigma * rng.normal();
}

void Mdp::ensure_values() const {
  if (values_ready_) return;
  const std::int64_t work =
      static_cast<std::int64_t>(spec_.state_count) * spec_.action_count;
  if (work > dp_limit_)
    throw CapacityError("state space too large for exhaustive dynamic programming");
  vstar_.assign(spec_.state_count, 0.0);
  vuniform_.assign(spec_.state_count, 0.0);
  for (const StateId st : bottom_up_) {
    if (spec_.terminal[st]) {
      vstar_[st] = spec_.terminal_value[st];
      vuniform_[st] = spec_.terminal_value[st];
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (Action a = 0; a < spec_.action_count; ++a) {
      const auto c = cell(spec_, st, a);
      const double q_star = spec_.reward[c] + spec_.discount * vstar_[spec_.next[c]];
      const double q_uni = spec_.reward[c] + spec_.discount * vuniform_[spec_.next[c]];
      best = std::max(best, q_star);
      sum += q_uni;
    }
    vstar_[st] = best;
    vuniform_[st] = sum / spec_.action_count;
  }
  values_ready_ = true;
}

double Mdp::expected_simulation_value(StateId s) const {
  check_state(s);
  ensure_values();
  return vuniform_[s];
}

double Mdp::optimal_value(StateId s) const {
  check_state(s);
  if (depth_[s] < 0) throw DomainError("state unreachable from the root");
  ensure_values();
  return vstar_[s];
}

Mdp make_depth_two_from_means(const std::vector<double>& means, double sigma,
                              std::uint64_t seed) {
  const int arms = static_cast<int>(means.size());
  if (arms < 2) throw DomainError("a depth-2 task needs at least 2 arms");
  if (sigma < 0.0) throw DomainError("sigma must be nonnegative");
  MdpSpec spec;
  spec.kind = "depth2";
  spec.state_count = arms + 1;
  spec.action_count = arms;
  spec.discount = 1.0;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  spec.sim_horizon = 2;
  spec.root = 0;
  spec.next.assign(static_cast<std::size_t>(spec.state_count) * arms, 0);
  spec.reward.assign(spec.next.size(), 0.0);
  spec.terminal.assign(spec.state_count, 0);
  spec.terminal_value.assign(spec.state_count, 0.0);
  double lo = 0.0, hi = 0.0;
  for (int k = 0; k < arms; ++k) {
    spec.next[k] = k + 1;
    spec.terminal[k + 1] = 1;
    spec.terminal_value[k + 1] = means[k];
    lo = std::min(lo, means[k]);
    hi = std::max(hi, means[k]);
  }
  spec.reward_min = lo;
  spec.reward_max = hi;
  return Mdp(std::move(spec));
}

Mdp make_depth_two(int arms, const std::vector<double>& gaps, double sigma,
                   std::uint64_t seed) {
  if (arms < 2) throw DomainError("a depth-2 task needs at least 2 arms");
  if (gaps.size() != static_cast<std::size_t>(arms))
    throw DomainError("gap vector size must equal the arm count");
  bool has_optimal = false;
  for (const double g : gaps) {
    if (g < 0.0) throw DomainError("gaps must be nonnegative");
    if (g == 0.0) has_optimal = true;
  }
  if (!has_optimal)
    throw DomainError("at least one gap must be zero so the optimal mean is attained");
  // Convention: the optimal mean is 1, so mu_k = 1 - gaps[k].
  std::vector<double> means(gaps.size());
  for (std::size_t k = 0; k < gaps.size(); ++k) means[k] = 1.0 - gaps[k];
  return make_depth_two_from_means(means, sigma, seed);
}

Mdp make_random_tree(int depth, int branching, std::uint64_t seed,
                     const RandomTreeOptions& opts) {
  if (depth < 1) throw DomainError("tree depth must be at least 1");
  if (branching < 2) throw DomainError("branching must be at least 2");
  if (opts.reward_hi < opts.reward_lo) throw DomainError("empty reward range");
  std::int64_t states = 0, level = 1;
  std::vector<std::int64_t> level_offset(depth + 1, 0);
  for (int l = 0; l <= depth; ++l) {
    level_offset[l] = states;
    states += level;
    if (states > 2'000'000) throw DomainError("random tree too large");
    level *= branching;
  }
  MdpSpec spec;
  spec.kind = "rtree";
  spec.state_count = static_cast<int>(states);
  spec.action_count = branching;
  spec.discount = opts.discount;
  spec.noise_sigma = opts.sigma;
  spec.reward_min = std::min(0.0, opts.reward_lo);
  spec.reward_max = std::max(0.0, opts.reward_hi);
  spec.seed = seed;
  spec.sim_horizon = depth + 1;
  spec.next.assign(static_cast<std::size_t>(states) * branching, 0);
  spec.reward.assign(spec.next.size(), 0.0);
  spec.terminal.assign(states, 0);
  spec.terminal_value.assign(states, 0.0);

  RngStream rng(seed, 0xe7);
  for (int l = 0; l < depth; ++l) {
    const std::int64_t width = static_cast<std::int64_t>(std::pow(branching, l)) ;
    for (std::int64_t i = 0; i < width; ++i) {
      const std::int64_t st = level_offset[l] + i;
      for (int a = 0; a < branching; ++a) {
        const std::int64_t child = level_offset[l + 1] + i * branching + a;
        const std::size_t c = static_cast<std::size_t>(st) * branching + a;
        spec.next[c] = static_cast<std::int32_t>(child);
        spec.reward[c] = rng.uniform(opts.reward_lo, opts.reward_hi);
      }
    }
  }
  const std::int64_t leaves = static_cast<std::int64_t>(std::pow(branching, depth));
  for (std::int64_t i = 0; i < leaves; ++i)
    spec.terminal[level_offset[depth] + i] = 1;
  return Mdp(std::move(spec));
}

std::string env_to_json(const Mdp& env) {
  const MdpSpec& s = env.spec();
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = s.kind;
  j["state_count"] = s.state_count;
  j["action_count"] = s.action_count;
  j["discount"] = s.discount;
  j["reward_min"] = s.reward_min;
  j["reward_max"] = s.reward_max;
  j["noise_sigma"] = s.noise_sigma;
  j["root"] = s.root;
  j["seed"] = s.seed;
  j["sim_horizon"] = s.sim_horizon;
  j["next"] = s.next;
  j["reward"] = s.reward;
  j["terminal"] = s.terminal;
  j["terminal_value"] = s.terminal_value;
  return j.dump(2);
}

Mdp env_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad environment json: ") + e.what());
  }
  MdpSpec s;
  try {
    s.kind = j.value("kind", "custom");
    s.state_count = j.at("state_count").get<int>();
    s.action_count = j.at("action_count").get<int>();
    s.discount = j.at("discount").get<double>();
    s.reward_min = j.at("reward_min").get<double>();
    s.reward_max = j.at("reward_max").get<double>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.root = j.at("root").get<StateId>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.sim_horizon = j.value("sim_horizon", 10000);
    s.next = j.at("next").get<std::vector<std::int32_t>>();
    s.reward = j.at("reward").get<std::vector<double>>();
    s.terminal = j.at("terminal").get<std::vector<std::uint8_t>>();
    s.terminal_value = j.at("terminal_value").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad environment json: ") + e.what());
  }
  return Mdp(std::move(s));
}

}  // namespace mctslab
