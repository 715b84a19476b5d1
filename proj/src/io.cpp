#include "mctslab/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mctslab {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open for writing: " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_trace_csv(const std::string& path, const RolloutTrace& trace,
                     const std::string& config_json) {
  std::ostringstream out;
  out << "# schema_version: 1\n";
  if (!config_json.empty()) out << "# config: " << config_json << "\n";
  out << "rollout,virtual_step_or_ms,root_action,V_i,V_star,worker,tree_index\n";
  for (const TraceRow& r : trace.rows) {
    out << r.rollout << ',' << format_double(r.step_or_ms) << ',' << r.root_action
        << ',' << format_double(r.v_root) << ',' << format_double(r.v_star) << ','
        << r.worker << ',' << r.tree_index << "\n";
  }
  write_text_file(path, out.str());
}

LoadedTrace read_trace_csv(const std::string& path) {
  LoadedTrace out;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# config: ";
      if (line.rfind(tag, 0) == 0) out.config_json = line.substr(tag.size());
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    TraceRow row;
    std::istringstream cells(line);
    std::string cell;
    int col = 0;
    while (std::getline(cells, cell, ',')) {
      switch (col) {
        case 0: row.rollout = std::stoll(cell); break;
        case 1: row.step_or_ms = std::stod(cell); break;
        case 2: row.root_action = std::stoi(cell); break;
        case 3: row.v_root = std::stod(cell); break;
        case 4: row.v_star = std::stod(cell); break;
        case 5: row.worker = std::stoi(cell); break;
        case 6: row.tree_index = std::stoi(cell); break;
        default: throw DomainError("trace row has too many columns");
      }
      ++col;
    }
    if (col != 7) throw DomainError("trace row has too few columns");
    out.trace.rows.push_back(row);
  }
  if (!out.trace.rows.empty()) out.trace.v_star = out.trace.rows.front().v_star;
  return out;
}

std::string tree_to_json(const SearchTree& tree, const std::string& config_json) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  if (!config_json.empty()) j["config"] = nlohmann::json::parse(config_json);
  j["root"] = tree.root();

  std::vector<StateId> states;
  for (const EdgeKey k : tree.sorted_edge_keys()) {
    const EdgeStats* e = tree.edge(edge_state(k), edge_action(k));
    states.push_back(edge_state(k));
    states.push_back(e->child);
  }
  states.push_back(tree.root());
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());

  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const StateId s : states) {
    const NodeInfo& info = tree.node(s);
    nlohmann::ordered_json n;
    n["state"] = s;
    n["depth"] = info.depth;
    n["parent_state"] = info.parent_state;
    n["parent_action"] = info.parent_action;
    n["v_count"] = info.value_stats.count;
    n["v_mean"] = info.value_stats.mean;
    n["v_m2"] = info.value_stats.m2;
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);

  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const EdgeKey k : tree.sorted_edge_keys()) {
    const EdgeStats* e = tree.edge(edge_state(k), edge_action(k));
    nlohmann::ordered_json je;
    je["state"] = edge_state(k);
    je["action"] = edge_action(k);
    je["child"] = e->child;
    je["q"] = e->q;
    je["n"] = e->visit_count;
    je["o"] = e->inflight;
    je["pseudo_q"] = e->pseudo_q;
    je["pseudo_n"] = e->pseudo_n;
    je["o_bar"] = e->inflight_avg;
    je["aggregated"] = e->aggregated;
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    e->records.for_each([&](const ReturnRecord& r) {
      recs.push_back(nlohmann::ordered_json{{"v", r.value}, {"sim", r.sim_id},
                                            {"synced", r.synced}});
    });
    je["records"] = std::move(recs);
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j.dump(1);
}

SearchTree tree_from_json(const std::string& text, const Mdp& env) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad tree json: ") + e.what());
  }
  SearchTree tree(&env, j.at("root").get<StateId>());

  // Edges are keyed by parent state, so repeat passes until each parent is in
  // the tree; a pass with no progress means a broken topology.
  std::vector<nlohmann::json> pending;
  for (const auto& je : j.at("edges")) pending.push_back(je);
  while (!pending.empty()) {
    std::vector<nlohmann::json> next;
    for (const auto& je : pending) {
      const StateId s = je.at("state").get<StateId>();
      if (!tree.has_node(s)) {
        next.push_back(je);
        continue;
      }
      const Action a = je.at("action").get<Action>();
      tree.expand(s, a);
      EdgeStats* e = tree.edge(s, a);
      e->q = je.at("q").get<double>();
      e->visit_count = je.at("n").get<std::int64_t>();
      e->inflight = je.at("o").get<int>();
      e->pseudo_q = je.at("pseudo_q").get<double>();
      e->pseudo_n = je.at("pseudo_n").get<double>();
      e->inflight_avg = je.at("o_bar").get<double>();
      e->aggregated = je.at("aggregated").get<bool>();
      std::vector<ReturnRecord> synced, unsynced;
      for (const auto& jr : je.at("records")) {
        ReturnRecord r{jr.at("v").get<double>(), jr.at("sim").get<std::uint64_t>(),
                       jr.at("synced").get<bool>()};
        (r.synced ? synced : unsynced).push_back(r);
      }
      e->records.adopt(RecordSet::extend(nullptr, std::move(synced)));
      for (const ReturnRecord& r : unsynced) e->records.append(r.value, r.sim_id);
    }
    if (next.size() == pending.size())
      throw DomainError("tree json edges are not connected to the root");
    pending = std::move(next);
  }

  for (const auto& jn : j.at("nodes")) {
    const StateId s = jn.at("state").get<StateId>();
    if (!tree.has_node(s)) throw DomainError("tree json node missing its edge");
    Welford w;
    w.count = jn.at("v_count").get<std::int64_t>();
    w.mean = jn.at("v_mean").get<double>();
    w.m2 = jn.at("v_m2").get<double>();
    tree.node(s).value_stats = w;
  }
  return tree;
}

}  // namespace mctslab
