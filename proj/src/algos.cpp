#include "mctslab/algos.hpp"

#include <limits>

namespace mctslab {

std::string to_string(AlgoKind kind) {
  switch (kind) {
    case AlgoKind::uct: return "uct";
    case AlgoKind::leafp: return "leafp";
    case AlgoKind::rootp: return "rootp";
    case AlgoKind::treep: return "treep";
    case AlgoKind::wu_uct: return "wu_uct";
    case AlgoKind::vl_hard: return "vl_hard";
    case AlgoKind::vl_soft: return "vl_soft";
    case AlgoKind::bu_uct: return "bu_uct";
    case AlgoKind::custom: return "custom";
  }
  return "unknown";
}

AlgoKind algo_kind_from_string(const std::string& name) {
  if (name == "uct") return AlgoKind::uct;
  if (name == "leafp") return AlgoKind::leafp;
  if (name == "rootp") return AlgoKind::rootp;
  if (name == "treep") return AlgoKind::treep;
  if (name == "wu_uct") return AlgoKind::wu_uct;
  if (name == "vl_hard") return AlgoKind::vl_hard;
  if (name == "vl_soft") return AlgoKind::vl_soft;
  if (name == "bu_uct") return AlgoKind::bu_uct;
  if (name == "custom") return AlgoKind::custom;
  throw ConfigError("unknown algorithm kind: " + name);
}

double SpecializationConfig::own_weight(const EdgeView& e) const {
  if (kind == AlgoKind::vl_soft) {
    const double denom = static_cast<double>(e.n) + n_vl * e.o;
    return denom > 0.0 ? static_cast<double>(e.n) / denom : 1.0;
  }
  return 1.0;
}

double SpecializationConfig::pseudo_weight(const EdgeView& e) const {
  switch (kind) {
    case AlgoKind::vl_hard:
      return static_cast<double>(e.o);
    case AlgoKind::vl_soft: {
      const double denom = static_cast<double>(e.n) + n_vl * e.o;
      return denom > 0.0 ? n_vl * e.o / denom : 0.0;
    }
    default:
      return 0.0;
  }
}

double SpecializationConfig::pseudo_value(const EdgeView&) const {
  if (kind == AlgoKind::vl_hard || kind == AlgoKind::vl_soft) return -r_vl;
  return 0.0;
}

double SpecializationConfig::pseudo_count(const EdgeView& e) const {
  switch (kind) {
    case AlgoKind::wu_uct:
    case AlgoKind::bu_uct:
      return static_cast<double>(e.o);
    case AlgoKind::vl_soft:
      return n_vl * e.o;
    case AlgoKind::custom:
      if (custom_pseudo_n) return std::max(custom_pseudo_n(static_cast<double>(e.o)), 0.0);
      return 0.0;
    default:
      return 0.0;
  }
}

double SpecializationConfig::adjusted_q(const EdgeView& e) const {
  return own_weight(e) * e.q + pseudo_weight(e) * pseudo_value(e);
}

double SpecializationConfig::adjusted_n(const EdgeView& e) const {
  return static_cast<double>(e.n) + pseudo_count(e);
}

bool SpecializationConfig::pseudo_count_is_o_only() const {
  if (kind == AlgoKind::custom) return static_cast<bool>(custom_pseudo_n);
  return true;
}

double SpecializationConfig::pseudo_count_of_o(double o) const {
  EdgeView e;
  e.o = static_cast<int>(o);
  switch (kind) {
    case AlgoKind::wu_uct:
    case AlgoKind::bu_uct:
      return std::max(o, 0.0);
    case AlgoKind::vl_soft:
      return std::max(n_vl * o, 0.0);
    case AlgoKind::custom:
      if (!custom_pseudo_n) throw ConfigError("custom kind lacks a pseudo-count law");
      return std::max(custom_pseudo_n(o), 0.0);
    default:
      return 0.0;
  }
}

SpecializationConfig make_specialization(AlgoKind kind, int workers,
                                         const AlgoParams& params) {
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  SpecializationConfig cfg;
  cfg.kind = kind;
  cfg.name = to_string(kind);
  cfg.workers = workers;
  if (params.c_policy) cfg.c_policy = *params.c_policy;
  if (params.max_depth) cfg.max_depth = *params.max_depth;
  if (params.max_width) cfg.max_width = *params.max_width;
  if (cfg.max_depth < 1 || cfg.max_width < 1)
    throw ConfigError("max_depth and max_width must be positive");

  switch (kind) {
    case AlgoKind::uct:
      cfg.tree_count = 1;
      cfg.sync_interval = 1;
      break;
    case AlgoKind::leafp:
      cfg.tree_count = workers;
      cfg.sync_interval = workers;
      cfg.cycle_barrier = true;
      break;
    case AlgoKind::rootp:
      cfg.tree_count = workers;
      cfg.sync_interval = 0;  // resolved to the total rollout count at run time
      break;
    case AlgoKind::treep:
      cfg.tree_count = workers;
      cfg.sync_interval = 1;
      break;
    case AlgoKind::wu_uct:
      cfg.tree_count = workers;
      cfg.sync_interval = 1;
      break;
    case AlgoKind::vl_hard:
      if (!params.r_vl) throw ConfigError("vl_hard requires r_vl");
      cfg.r_vl = *params.r_vl;
      cfg.tree_count = workers;
      cfg.sync_interval = 1;
      break;
    case AlgoKind::vl_soft:
      if (!params.r_vl || !params.n_vl)
        throw ConfigError("vl_soft requires r_vl and n_vl");
      cfg.r_vl = *params.r_vl;
      cfg.n_vl = *params.n_vl;
      if (cfg.n_vl < 0.0) throw ConfigError("n_vl must be nonnegative");
      cfg.tree_count = workers;
      cfg.sync_interval = 1;
      break;
    case AlgoKind::bu_uct: {
      if (!params.m_max) throw ConfigError("bu_uct requires m_max");
      BuUctParams bu;
      bu.m_max = *params.m_max;
      if (!(bu.m_max > 0.0 && bu.m_max < 1.0))
        throw ConfigError("m_max must lie in (0, 1)");
      cfg.bu = bu;
      // One shared tree driven by the master; the workers only simulate.
      cfg.tree_count = 1;
      cfg.sync_interval = 0;
      break;
    }
    case AlgoKind::custom:
      if (!params.custom_pseudo_n)
        throw ConfigError("custom kind requires a pseudo-count law");
      cfg.custom_pseudo_n = params.custom_pseudo_n;
      cfg.tree_count = workers;
      cfg.sync_interval = 1;
      break;
  }
  return cfg;
}

SpecializationConfig make_specialization(const std::string& kind, int workers,
                                         const AlgoParams& params) {
  return make_specialization(algo_kind_from_string(kind), workers, params);
}

double bu_uct_modified_q(double q, double inflight_avg, const BuUctParams& params,
                         int workers) {
  if (inflight_avg < params.m_max * workers) return q;
  return -std::numeric_limits<double>::infinity();
}

}  // namespace mctslab
