#pragma once

#include <string>
#include <vector>

#include "mctslab/env.hpp"
#include "mctslab/framework.hpp"
#include "mctslab/tree.hpp"

namespace mctslab {

std::string format_double(double v);

// Trace CSV: comment header carrying the schema version and the resolved run
// configuration, then one row per completed rollout with columns
// rollout,virtual_step_or_ms,root_action,V_i,V_star,worker,tree_index.
void write_trace_csv(const std::string& path, const RolloutTrace& trace,
                     const std::string& config_json);

struct LoadedTrace {
  RolloutTrace trace;
  std::string config_json;
};
LoadedTrace read_trace_csv(const std::string& path);

// Tree JSON: nodes with their value statistics and edges with the full
// statistics set including the per-edge return records and synced flags.
std::string tree_to_json(const SearchTree& tree, const std::string& config_json = "");
SearchTree tree_from_json(const std::string& text, const Mdp& env);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace mctslab
