#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mctslab/diagnostics.hpp"
#include "mctslab/io.hpp"

namespace mctslab::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double parse_num(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + what + ": " + text);
  }
}

// Removes every file created so far when a command fails midway.
class OutputGuard {
 public:
  void track(const std::string& path) { created_.push_back(path); }
  void commit() { created_.clear(); }
  ~OutputGuard() {
    for (const std::string& p : created_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<std::string> created_;
};

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

Mdp parse_env(const std::string& preset) {
  if (preset.empty()) throw ConfigError("no environment given (use --env)");
  if (preset[0] == '@' ||
      (preset.size() > 5 && preset.substr(preset.size() - 5) == ".json")) {
    const std::string path = preset[0] == '@' ? preset.substr(1) : preset;
    return env_from_json(read_text_file(path));
  }
  const auto colon = preset.find(':');
  const std::string kind = preset.substr(0, colon);
  std::vector<std::pair<std::string, std::string>> kv;
  if (colon != std::string::npos) {
    for (const std::string& item : split(preset.substr(colon + 1), ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError("bad env parameter (expected key=value): " + item);
      kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
  }
  auto lookup = [&](const std::string& key) -> std::optional<std::string> {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    return std::nullopt;
  };

  if (kind == "depth2") {
    const int arms = lookup("K") ? static_cast<int>(parse_num(*lookup("K"), "K")) : 2;
    const double sigma = lookup("sigma") ? parse_num(*lookup("sigma"), "sigma") : 1.0;
    const std::uint64_t seed =
        lookup("seed") ? static_cast<std::uint64_t>(parse_num(*lookup("seed"), "seed")) : 0;
    std::vector<double> gaps;
    if (const auto g = lookup("gaps")) {
      for (const std::string& part : split(*g, '+')) gaps.push_back(parse_num(part, "gaps"));
    } else {
      // evenly spread gaps ending at 0.5
      gaps.resize(arms);
      for (int k = 0; k < arms; ++k)
        gaps[k] = arms > 1 ? 0.5 * k / static_cast<double>(arms - 1) : 0.0;
    }
    try {
      return make_depth_two(arms, gaps, sigma, seed);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("bad depth2 preset: ") + e.what());
    }
  }
  if (kind == "rtree") {
    const int depth = lookup("D") ? static_cast<int>(parse_num(*lookup("D"), "D")) : 4;
    const int branching = lookup("K") ? static_cast<int>(parse_num(*lookup("K"), "K")) : 4;
    const std::uint64_t seed =
        lookup("seed") ? static_cast<std::uint64_t>(parse_num(*lookup("seed"), "seed")) : 0;
    RandomTreeOptions opts;
    if (const auto v = lookup("sigma")) opts.sigma = parse_num(*v, "sigma");
    if (const auto v = lookup("gamma")) opts.discount = parse_num(*v, "gamma");
    if (const auto v = lookup("rlo")) opts.reward_lo = parse_num(*v, "rlo");
    if (const auto v = lookup("rhi")) opts.reward_hi = parse_num(*v, "rhi");
    try {
      return make_random_tree(depth, branching, seed, opts);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("bad rtree preset: ") + e.what());
    }
  }
  throw ConfigError("unknown environment preset: " + preset);
}

SpecializationConfig build_config(const ExperimentConfig& cfg, const std::string& algo,
                                  int workers) {
  AlgoParams params;
  const AlgoKind kind = algo_kind_from_string(algo);
  params.r_vl = cfg.r_vl;
  params.n_vl = cfg.n_vl;
  params.m_max = cfg.m_max;
  // Library construction is strict about required parameters; the CLI fills
  // the documented defaults when the user leaves them out.
  if ((kind == AlgoKind::vl_hard || kind == AlgoKind::vl_soft) && !params.r_vl)
    params.r_vl = 1.0;
  if (kind == AlgoKind::vl_soft && !params.n_vl) params.n_vl = 1.0;
  if (kind == AlgoKind::bu_uct && !params.m_max) params.m_max = 0.8;
  CPolicy c;
  if (cfg.c_policy == "fixed") {
    c.mode = CPolicy::Mode::fixed;
    c.value = cfg.c_value;
  } else if (cfg.c_policy == "std") {
    c.mode = CPolicy::Mode::per_node_std;
  } else {
    throw ConfigError("c policy must be 'std' or 'fixed'");
  }
  params.c_policy = c;
  params.max_depth = cfg.max_depth;
  params.max_width = cfg.max_width;
  SpecializationConfig spec = make_specialization(kind, workers, params);
  if (cfg.tau_syn >= 0) spec.sync_interval = cfg.tau_syn;
  return spec;
}

std::string resolved_config_json(const ExperimentConfig& cfg,
                                 const SpecializationConfig& spec,
                                 const std::string& env_preset) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["algo"] = spec.name;
  j["workers"] = spec.workers;
  j["tree_count"] = spec.tree_count;
  j["tau_syn"] = spec.sync_interval;
  j["rollouts"] = cfg.rollouts;
  j["repetitions"] = cfg.repetitions;
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode;
  j["tau_sim"] = cfg.tau_sim;
  j["tau_sim_lower"] = cfg.tau_sim_lower;
  j["tau_sim_upper"] = cfg.tau_sim_upper;
  j["delay_ms"] = cfg.delay_ms;
  j["env"] = env_preset;
  j["r_vl"] = spec.r_vl;
  j["n_vl"] = spec.n_vl;
  if (spec.bu) j["m_max"] = spec.bu->m_max;
  j["c_policy"] = spec.c_policy.mode == CPolicy::Mode::fixed ? "fixed" : "std";
  j["c_value"] = spec.c_policy.value;
  j["max_depth"] = spec.max_depth;
  j["max_width"] = spec.max_width;
  return j.dump();
}

namespace {

RunOptions run_options(const ExperimentConfig& cfg) {
  RunOptions opt;
  opt.tau_sim = cfg.tau_sim;
  opt.tau_sim_lower = cfg.tau_sim_lower;
  opt.tau_sim_upper = cfg.tau_sim_upper;
  opt.delay_ms = cfg.delay_ms;
  return opt;
}

struct RepOutcome {
  std::uint64_t seed;
  double regret;
  Action action;
  std::vector<double> curve;  // cumulative regret at power-of-two checkpoints
};

std::vector<std::int64_t> curve_checkpoints(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t c = 1; c < n; c *= 2) out.push_back(c);
  out.push_back(n);
  return out;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
  if (cfg.envs.empty()) throw ConfigError("run requires --env");
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  const Mdp env = parse_env(cfg.envs.front());
  const SpecializationConfig spec = build_config(cfg, cfg.algo, cfg.workers);
  const std::string config_json = resolved_config_json(cfg, spec, cfg.envs.front());
  const ExecMode mode = exec_mode_from_string(cfg.mode);
  const auto checkpoints = curve_checkpoints(cfg.rollouts);

  fs::create_directories(cfg.out_dir);
  OutputGuard guard;
  std::vector<RepOutcome> outcomes;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
    RunResult run = run_search(env, spec, cfg.rollouts, mode, seed, run_options(cfg));
    RepOutcome out;
    out.seed = seed;
    out.regret = cumulative_regret(run.trace);
    out.action = recommend_action(run.tree);
    double acc = 0.0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < run.trace.rows.size(); ++i) {
      acc += run.trace.rows[i].v_star - run.trace.rows[i].v_root;
      if (next < checkpoints.size() &&
          static_cast<std::int64_t>(i + 1) == checkpoints[next]) {
        out.curve.push_back(acc);
        ++next;
      }
    }
    outcomes.push_back(out);

    const std::string trace_path =
        cfg.out_dir + "/trace_rep" + std::to_string(rep) + ".csv";
    guard.track(trace_path);
    write_trace_csv(trace_path, run.trace, config_json);
    const std::string tree_path =
        cfg.out_dir + "/tree_rep" + std::to_string(rep) + ".json";
    guard.track(tree_path);
    write_text_file(tree_path, tree_to_json(run.tree, config_json));
  }

  double mean = 0.0;
  for (const RepOutcome& o : outcomes) mean += o.regret;
  mean /= outcomes.size();
  double var = 0.0;
  for (const RepOutcome& o : outcomes) var += (o.regret - mean) * (o.regret - mean);
  var /= outcomes.size();

  std::ostringstream out;
  out << "# schema_version: 1\n# config: " << config_json << "\n";
  out << "kind,rep,seed,n,regret,recommended_action\n";
  for (std::size_t rep = 0; rep < outcomes.size(); ++rep) {
    const RepOutcome& o = outcomes[rep];
    out << "rep," << rep << ',' << o.seed << ',' << cfg.rollouts << ','
        << format_double(o.regret) << ',' << o.action << "\n";
  }
  out << "mean,,," << cfg.rollouts << ',' << format_double(mean) << ",\n";
  out << "std,,," << cfg.rollouts << ',' << format_double(std::sqrt(var)) << ",\n";
  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    double cmean = 0.0;
    for (const RepOutcome& o : outcomes) cmean += o.curve[ci];
    cmean /= outcomes.size();
    out << "curve,,," << checkpoints[ci] << ',' << format_double(cmean) << ",\n";
  }
  const std::string summary_path = cfg.out_dir + "/summary.csv";
  guard.track(summary_path);
  write_text_file(summary_path, out.str());
  guard.commit();
  std::cout << "run: " << outcomes.size() << " repetitions, mean regret "
            << format_double(mean) << ", outputs in " << cfg.out_dir << "\n";
  return kExitOk;
}

namespace {

struct SweepCell {
  std::string algo;
  int workers = 1;
  std::optional<double> r_vl;
  std::optional<double> n_vl;
  std::optional<double> m_max;
};

std::vector<SweepCell> sweep_cells(const ExperimentConfig& cfg, RngStream& rng) {
  std::vector<std::string> algos = cfg.algos;
  if (algos.empty()) algos = {"wu_uct", "treep", "vl_hard", "vl_soft", "bu_uct"};
  std::vector<SweepCell> cells;
  if (cfg.rand_configs > 0) {
    for (int i = 0; i < cfg.rand_configs; ++i) {
      SweepCell cell;
      cell.algo = algos[static_cast<std::size_t>(i) % algos.size()];
      cell.workers = 4 + static_cast<int>(rng.uniform_int(29));  // [4, 32]
      const AlgoKind kind = algo_kind_from_string(cell.algo);
      if (kind == AlgoKind::vl_hard) cell.r_vl = rng.uniform(0.0, 10.0);
      if (kind == AlgoKind::vl_soft) {
        cell.r_vl = rng.uniform(0.0, 20.0);
        cell.n_vl = static_cast<double>(1 + rng.uniform_int(5));  // [1, 5]
      }
      if (kind == AlgoKind::bu_uct) cell.m_max = 0.8;
      cells.push_back(cell);
    }
    return cells;
  }
  std::vector<int> workers_list = cfg.workers_list;
  if (workers_list.empty()) workers_list = {cfg.workers};
  for (const std::string& algo : algos)
    for (const int w : workers_list) {
      SweepCell cell;
      cell.algo = algo;
      cell.workers = w;
      cell.r_vl = cfg.r_vl;
      cell.n_vl = cfg.n_vl;
      cell.m_max = cfg.m_max;
      cells.push_back(cell);
    }
  return cells;
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg) {
  if (cfg.envs.empty()) throw ConfigError("sweep requires --env");
  if (cfg.seeds < 1) throw ConfigError("sweep requires at least one seed");
  const Mdp env = parse_env(cfg.envs.front());
  RngStream cell_rng(cfg.seed, 0x5eed);
  const std::vector<SweepCell> cells = sweep_cells(cfg, cell_rng);
  if (cells.empty()) throw DomainError("sweep axes produced no cells");

  fs::create_directories(cfg.out_dir);
  OutputGuard guard;

  std::vector<double> row_gap, row_regret;
  std::vector<double> edge_gap, edge_gstar, edge_g4;
  std::ostringstream out;
  std::ostringstream edges_out;
  edges_out << "cell,seed,state,action,gap,gap_stderr,g_star,g1,g2,g3,g4,weight\n";
  out << "# schema_version: 1\n";
  out << "cell,algo,workers,r_vl,n_vl,m_max,seed,rollouts,regret,gap_weighted,"
         "g_star_w,g1_w,g2_w,g3_w,g4_w\n";

  int cell_id = 0;
  for (const SweepCell& cell : cells) {
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.r_vl = cell.r_vl;
    cell_cfg.n_vl = cell.n_vl;
    cell_cfg.m_max = cell.m_max;
    const SpecializationConfig spec = build_config(cell_cfg, cell.algo, cell.workers);
    for (int si = 0; si < cfg.seeds; ++si) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(si);
      RunResult run = run_search(env, spec, cfg.rollouts, ExecMode::virtual_time, seed,
                                 run_options(cfg));
      const double regret = cumulative_regret(run.trace);
      const GapReport report =
          measure_gaps(env, run.tree, run.trace, spec, cfg.gap_trials,
                       splitmix64(seed) ^ 0x9a9, cfg.gap_min_weight);
      row_gap.push_back(report.weighted_gap);
      row_regret.push_back(regret);
      for (const EdgeGapRow& er : report.edges) {
        if (er.surrogates.g_star) {
          edge_gap.push_back(er.gap);
          edge_gstar.push_back(*er.surrogates.g_star);
          edge_g4.push_back(er.surrogates.g4.value_or(0.0));
        }
        edges_out << cell_id << ',' << seed << ',' << er.state << ',' << er.action
                  << ',' << format_double(er.gap) << ',' << format_double(er.gap_stderr)
                  << ',' << (er.surrogates.g_star ? format_double(*er.surrogates.g_star) : "")
                  << ',' << (er.surrogates.g1 ? format_double(*er.surrogates.g1) : "")
                  << ',' << (er.surrogates.g2 ? format_double(*er.surrogates.g2) : "")
                  << ',' << (er.surrogates.g3 ? format_double(*er.surrogates.g3) : "")
                  << ',' << (er.surrogates.g4 ? format_double(*er.surrogates.g4) : "")
                  << ',' << er.weight << "\n";
      }
      out << cell_id << ',' << cell.algo << ',' << cell.workers << ','
          << opt_str(cell.r_vl) << ',' << opt_str(cell.n_vl) << ','
          << opt_str(cell.m_max) << ',' << seed << ',' << cfg.rollouts << ','
          << format_double(regret) << ',' << format_double(report.weighted_gap) << ','
          << (report.weighted_g_star ? format_double(*report.weighted_g_star) : "")
          << ',' << (report.weighted_g1 ? format_double(*report.weighted_g1) : "") << ','
          << (report.weighted_g2 ? format_double(*report.weighted_g2) : "") << ','
          << (report.weighted_g3 ? format_double(*report.weighted_g3) : "") << ','
          << (report.weighted_g4 ? format_double(*report.weighted_g4) : "") << "\n";
    }
    ++cell_id;
  }

  if (row_gap.size() >= 2)
    out << "# spearman_gap_regret: " << format_double(spearman(row_gap, row_regret))
        << "\n";
  if (edge_gap.size() >= 2) {
    out << "# spearman_gstar_gap: " << format_double(spearman(edge_gstar, edge_gap))
        << "\n";
    out << "# spearman_g4_gap: " << format_double(spearman(edge_g4, edge_gap)) << "\n";
  }
  const std::string sweep_path = cfg.out_dir + "/sweep.csv";
  guard.track(sweep_path);
  write_text_file(sweep_path, out.str());
  const std::string edges_path = cfg.out_dir + "/sweep_edges.csv";
  guard.track(edges_path);
  write_text_file(edges_path, edges_out.str());
  guard.commit();
  std::cout << "sweep: " << row_gap.size() << " rows, outputs in " << cfg.out_dir
            << "\n";
  return kExitOk;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
  std::vector<std::string> algos = cfg.algos;
  if (algos.empty())
    algos = {"uct", "leafp", "rootp", "treep", "wu_uct", "vl_hard", "vl_soft", "bu_uct"};
  const Mdp env = cfg.envs.empty() ? make_depth_two(2, {0.0, 0.5}, 1.0, 7)
                                   : parse_env(cfg.envs.front());

  std::ostringstream out;
  out << "algo,n_checkable,n_pass,n_witness,q_gap,q_ci_lo,q_ci_hi,q_violated,note\n";
  std::cout << "necessary-condition report (workers = " << cfg.workers << ")\n";
  for (const std::string& algo : algos) {
    const SpecializationConfig spec = build_config(cfg, algo, cfg.workers);
    const ConditionVerdict v =
        check_necessary_conditions(spec, env, cfg.workers, 400, cfg.seed);
    out << algo << ',' << (v.n_checkable ? "yes" : "no") << ','
        << (v.n_pass ? "pass" : "fail") << ','
        << (v.n_witness >= 0 ? std::to_string(v.n_witness) : "") << ','
        << format_double(v.q_gap) << ',' << format_double(v.q_ci_lo) << ','
        << format_double(v.q_ci_hi) << ',' << (v.q_violated ? "yes" : "no") << ','
        << v.note << "\n";
    std::cout << "  " << algo << ": count condition "
              << (v.n_checkable ? (v.n_pass ? "pass" : "FAIL") : "not checkable");
    if (!v.n_pass && v.n_witness >= 0) std::cout << " (witness x = " << v.n_witness << ")";
    std::cout << ", value condition "
              << (v.q_checkable ? (v.q_violated ? "VIOLATED" : "not violated on battery")
                                : "not checkable")
              << "\n";
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/conditions.csv", out.str());
  }
  return kExitOk;
}

int cmd_speedup(const ExperimentConfig& cfg) {
  if (cfg.envs.empty()) throw ConfigError("speedup requires --env");
  if (cfg.workers < 1) throw ConfigError("speedup requires a worker count");
  fs::create_directories(cfg.out_dir);
  OutputGuard guard;

  std::ostringstream out;
  out << "env,rep,t1_ms,tM_ms,speedup\n";
  bool noisy = false;
  double mean_speedup = 0.0;
  int count = 0;
  for (const std::string& preset : cfg.envs) {
    const Mdp env = parse_env(preset);
    std::vector<double> t1s, tms;
    for (int rep = 0; rep < cfg.speedup_reps; ++rep) {
      for (const int w : {1, cfg.workers}) {
        ExperimentConfig one = cfg;
        one.workers = w;
        const SpecializationConfig spec = build_config(one, cfg.algo, w);
        const auto start = std::chrono::steady_clock::now();
        RunResult run = run_search(env, spec, cfg.rollouts, ExecMode::parallel,
                                   cfg.seed + rep, run_options(cfg));
        (void)run;
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        (w == 1 ? t1s : tms).push_back(ms);
      }
    }
    for (int rep = 0; rep < cfg.speedup_reps; ++rep) {
      const double sp = t1s[rep] / tms[rep];
      out << preset << ',' << rep << ',' << format_double(t1s[rep]) << ','
          << format_double(tms[rep]) << ',' << format_double(sp) << "\n";
      mean_speedup += sp;
      ++count;
    }
    const auto cv = [](const std::vector<double>& v) {
      double m = 0.0;
      for (const double x : v) m += x;
      m /= v.size();
      double var = 0.0;
      for (const double x : v) var += (x - m) * (x - m);
      return m > 0.0 ? std::sqrt(var / v.size()) / m : 0.0;
    };
    if (cv(t1s) > cfg.noise_threshold || cv(tms) > cfg.noise_threshold) noisy = true;
  }
  mean_speedup /= count;
  out << "# mean_speedup: " << format_double(mean_speedup) << "\n";
  out << "# workers: " << cfg.workers << "\n";
  const std::string path = cfg.out_dir + "/speedup.csv";
  guard.track(path);
  write_text_file(path, out.str());
  guard.commit();
  std::cout << "speedup: mean " << format_double(mean_speedup) << " with "
            << cfg.workers << " workers (delay " << cfg.delay_ms << " ms)\n";
  if (noisy) {
    std::cout << "timing variance above threshold; rerun advised\n";
    return kExitNoisy;
  }
  return kExitOk;
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"parallel MCTS laboratory"};
  app.require_subcommand(1);
  ExperimentConfig cfg;
  std::string config_file;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--algo", cfg.algo, "algorithm kind");
    sub->add_option("--env", cfg.envs,
                    "environment preset (depth2:K=..,gaps=..,sigma=.. | "
                    "rtree:D=..,K=.. | @file.json)");
    sub->add_option("--workers", cfg.workers, "worker count M");
    sub->add_option("--rollouts", cfg.rollouts, "rollouts per run");
    sub->add_option("--reps", cfg.repetitions, "repetitions");
    sub->add_option("--seed", cfg.seed, "base seed");
    sub->add_option("--mode", cfg.mode, "virtual | parallel");
    sub->add_option("--tau-syn", cfg.tau_syn, "sync interval override");
    sub->add_option("--tau-sim", cfg.tau_sim, "virtual simulation interval");
    sub->add_option("--tau-sim-lower", cfg.tau_sim_lower, "random interval lower bound");
    sub->add_option("--tau-sim-upper", cfg.tau_sim_upper, "random interval upper bound");
    sub->add_option("--delay-ms", cfg.delay_ms, "artificial simulation delay");
    sub->add_option("--r-vl", cfg.r_vl, "virtual loss");
    sub->add_option("--n-vl", cfg.n_vl, "virtual visit multiplier");
    sub->add_option("--m-max", cfg.m_max, "bu_uct threshold fraction");
    sub->add_option("--c-policy", cfg.c_policy, "std | fixed");
    sub->add_option("--c", cfg.c_value, "fixed exploration constant");
    sub->add_option("--max-depth", cfg.max_depth, "selection depth cap");
    sub->add_option("--max-width", cfg.max_width, "expansion width cap");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--gap-trials", cfg.gap_trials, "oracle trials per edge");
    sub->add_option("--gap-min-weight", cfg.gap_min_weight,
                    "minimum visit count for gap measurement");
    sub->add_option("--config", config_file, "JSON config file overriding flags");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep with gap reports");
  add_common(sweep);
  sweep->add_option("--algos", cfg.algos, "algorithms to sweep")->delimiter(',');
  sweep->add_option("--workers-list", cfg.workers_list, "worker counts to sweep")
      ->delimiter(',');
  sweep->add_option("--seeds", cfg.seeds, "seeds per cell");
  sweep->add_option("--rand-configs", cfg.rand_configs,
                    "number of randomized hyperparameter configurations");
  CLI::App* diagnose = app.add_subcommand("diagnose", "necessary-condition checks");
  add_common(diagnose);
  diagnose->add_option("--algos", cfg.algos, "algorithms to diagnose")->delimiter(',');
  CLI::App* speedup = app.add_subcommand("speedup", "wall-clock speedup benchmark");
  add_common(speedup);
  speedup->add_option("--speedup-reps", cfg.speedup_reps, "timing repetitions");
  speedup->add_option("--noise-threshold", cfg.noise_threshold,
                      "coefficient of variation flagged as noisy");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!config_file.empty()) {
      // The config file overrides flag values for the keys it carries.
      const nlohmann::json j = nlohmann::json::parse(read_text_file(config_file));
      if (j.contains("algo")) cfg.algo = j["algo"].get<std::string>();
      if (j.contains("env")) cfg.envs = {j["env"].get<std::string>()};
      if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
      if (j.contains("rollouts")) cfg.rollouts = j["rollouts"].get<std::int64_t>();
      if (j.contains("repetitions")) cfg.repetitions = j["repetitions"].get<int>();
      if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("mode")) cfg.mode = j["mode"].get<std::string>();
      if (j.contains("tau_syn")) cfg.tau_syn = j["tau_syn"].get<std::int64_t>();
      if (j.contains("tau_sim")) cfg.tau_sim = j["tau_sim"].get<int>();
      if (j.contains("delay_ms")) cfg.delay_ms = j["delay_ms"].get<double>();
      if (j.contains("r_vl")) cfg.r_vl = j["r_vl"].get<double>();
      if (j.contains("n_vl")) cfg.n_vl = j["n_vl"].get<double>();
      if (j.contains("m_max")) cfg.m_max = j["m_max"].get<double>();
      if (j.contains("c_policy")) cfg.c_policy = j["c_policy"].get<std::string>();
      if (j.contains("c_value")) cfg.c_value = j["c_value"].get<double>();
      if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
    }
    if (run->parsed()) return cmd_run(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (diagnose->parsed()) return cmd_diagnose(cfg);
    if (speedup->parsed()) return cmd_speedup(cfg);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace mctslab::cli
