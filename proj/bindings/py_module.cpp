#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mctslab/diagnostics.hpp"
#include "mctslab/env.hpp"
#include "mctslab/framework.hpp"
#include "mctslab/io.hpp"

namespace py = pybind11;
using namespace mctslab;

namespace {

struct PyRunResult {
  RunResult result;
};

SpecializationConfig py_make_specialization(const std::string& kind, int workers,
                                            std::optional<double> r_vl,
                                            std::optional<double> n_vl,
                                            std::optional<double> m_max,
                                            std::optional<double> c_fixed,
                                            int max_depth, int max_width) {
  AlgoParams params;
  params.r_vl = r_vl;
  params.n_vl = n_vl;
  params.m_max = m_max;
  if (c_fixed) params.c_policy = CPolicy{CPolicy::Mode::fixed, *c_fixed};
  params.max_depth = max_depth;
  params.max_width = max_width;
  return make_specialization(kind, workers, params);
}

PyRunResult py_run_search(const Mdp& env, const SpecializationConfig& cfg,
                          std::int64_t n, const std::string& mode, std::uint64_t seed,
                          int tau_sim, double delay_ms) {
  RunOptions opt;
  opt.tau_sim = tau_sim;
  opt.delay_ms = delay_ms;
  return PyRunResult{run_search(env, cfg, n, exec_mode_from_string(mode), seed, opt)};
}

}  // namespace

PYBIND11_MODULE(_mctslab, m) {
  m.doc() = "parallel MCTS laboratory bindings";

  py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<ConfigError>(m, "ConfigurationError");
  py::register_exception<InvariantViolation>(m, "InvariantViolation");

  py::class_<Mdp>(m, "Mdp")
      .def_property_readonly("state_count",
                             [](const Mdp& e) { return e.spec().state_count; })
      .def_property_readonly("action_count",
                             [](const Mdp& e) { return e.spec().action_count; })
      .def_property_readonly("root", [](const Mdp& e) { return e.spec().root; })
      .def("is_terminal", &Mdp::is_terminal)
      .def("transition", &Mdp::transition)
      .def("optimal_value", &Mdp::optimal_value)
      .def("expected_simulation_value", &Mdp::expected_simulation_value)
      .def("simulate",
           [](const Mdp& e, StateId s, std::uint64_t seed, std::uint64_t stream) {
             RngStream rng(seed, stream);
             return e.simulate(s, rng);
           },
           py::arg("state"), py::arg("seed"), py::arg("stream") = 1)
      .def("to_json", [](const Mdp& e) { return env_to_json(e); });

  m.def("make_depth_two", &make_depth_two, py::arg("arms"), py::arg("gaps"),
        py::arg("sigma") = 1.0, py::arg("seed") = 0);
  m.def("make_random_tree",
        [](int depth, int branching, std::uint64_t seed, double reward_lo,
           double reward_hi, double sigma, double discount) {
          RandomTreeOptions opts{reward_lo, reward_hi, sigma, discount};
          return make_random_tree(depth, branching, seed, opts);
        },
        py::arg("depth"), py::arg("branching"), py::arg("seed") = 0,
        py::arg("reward_lo") = 0.0, py::arg("reward_hi") = 1.0, py::arg("sigma") = 1.0,
        py::arg("discount") = 1.0);
  m.def("env_from_json", &env_from_json);

  py::class_<SpecializationConfig>(m, "SpecializationConfig")
      .def_readonly("name", &SpecializationConfig::name)
      .def_readonly("workers", &SpecializationConfig::workers)
      .def_readonly("tree_count", &SpecializationConfig::tree_count)
      .def_readonly("sync_interval", &SpecializationConfig::sync_interval);
  m.def("make_specialization", &py_make_specialization, py::arg("kind"),
        py::arg("workers"), py::arg("r_vl") = std::nullopt,
        py::arg("n_vl") = std::nullopt, py::arg("m_max") = std::nullopt,
        py::arg("c_fixed") = std::nullopt, py::arg("max_depth") = 100,
        py::arg("max_width") = 20);

  py::class_<PyRunResult>(m, "RunResult")
      .def("recommend_action",
           [](const PyRunResult& r) { return recommend_action(r.result.tree); })
      .def("cumulative_regret",
           [](const PyRunResult& r) { return cumulative_regret(r.result.trace); })
      .def("tree_json", [](const PyRunResult& r) { return tree_to_json(r.result.tree); })
      .def("rows", [](const PyRunResult& r) {
        py::list rows;
        for (const TraceRow& row : r.result.trace.rows)
          rows.append(py::make_tuple(row.rollout, row.step_or_ms, row.root_action,
                                     row.v_root, row.v_star, row.worker,
                                     row.tree_index));
        return rows;
      });
  m.def("run_search", &py_run_search, py::arg("env"), py::arg("config"),
        py::arg("rollouts"), py::arg("mode") = "virtual", py::arg("seed") = 0,
        py::arg("tau_sim") = 0, py::arg("delay_ms") = 10.0);

  m.def("wu_uct_regret_bound",
        [](int arms, const std::vector<double>& deltas, std::int64_t n, int workers) {
          const RegretBound b = wu_uct_regret_bound(arms, deltas, n, workers);
          return py::make_tuple(b.r_uct, b.excess);
        },
        py::arg("arms"), py::arg("deltas"), py::arg("rollouts"), py::arg("workers"));

  m.def("check_necessary_conditions",
        [](const SpecializationConfig& cfg, int workers, int trials) {
          const Mdp env = make_depth_two(2, {0.0, 0.5}, 1.0, 7);
          const ConditionVerdict v =
              check_necessary_conditions(cfg, env, workers, trials);
          py::dict out;
          out["n_checkable"] = v.n_checkable;
          out["n_pass"] = v.n_pass;
          out["n_witness"] = v.n_witness;
          out["q_checkable"] = v.q_checkable;
          out["q_gap"] = v.q_gap;
          out["q_violated"] = v.q_violated;
          out["note"] = v.note;
          return out;
        },
        py::arg("config"), py::arg("workers"), py::arg("trials") = 400);
}
