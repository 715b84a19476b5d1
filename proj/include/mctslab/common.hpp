#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mctslab {

using StateId = std::int32_t;
using Action = std::int32_t;

// Edge identity shared across trees: states are globally unique in a
// deterministic tree-structured MDP, so (state, action) names an edge.
using EdgeKey = std::uint64_t;

inline EdgeKey edge_key(StateId s, Action a) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 16) |
         static_cast<std::uint32_t>(a);
}
inline StateId edge_state(EdgeKey k) { return static_cast<StateId>(k >> 16); }
inline Action edge_action(EdgeKey k) { return static_cast<Action>(k & 0xffff); }

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvariantViolation : std::runtime_error {
  explicit InvariantViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Running mean / population variance accumulator (Welford).
struct Welford {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const {
    return count > 0 ? m2 / static_cast<double>(count) : 0.0;
  }
  double stddev() const { return std::sqrt(variance()); }
};

}  // namespace mctslab
