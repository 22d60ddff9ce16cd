#include "brpo/baselines.hpp"
#include "brpo/batch_io.hpp"
#include "brpo/critic.hpp"
#include "brpo/env.hpp"
#include "brpo/error.hpp"
#include "brpo/harness.hpp"
#include "brpo/mdp.hpp"
#include "brpo/qp.hpp"
#include "brpo/residual.hpp"
#include "brpo/serialize.hpp"
#include "brpo/solver.hpp"
#include "brpo/value_gap.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace brpo;

namespace {

Table as_table(const Eigen::Ref<const Matrix>& m) { return Table(m); }

SolverConfig solver_config(const py::object& cfg) {
  if (cfg.is_none()) return {};
  const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
  return solver_config_from_json(Json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_brpo, m) {
  m.doc() = "Tabular batch residual policy optimization";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConstraintViolation>(m, "ConstraintViolation", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<FiniteMdp>(m, "FiniteMdp")
      .def(py::init([](const Matrix& reward, const Matrix& transition, const Vector& start, double gamma,
                       double r_max) { return FiniteMdp(as_table(reward), as_table(transition), start, gamma, r_max); }),
           py::arg("reward"), py::arg("transition"), py::arg("start"), py::arg("gamma"), py::arg("r_max") = 1.0)
      .def_property_readonly("n_states", &FiniteMdp::n_states)
      .def_property_readonly("n_actions", &FiniteMdp::n_actions)
      .def_property_readonly("gamma", &FiniteMdp::gamma)
      .def_property_readonly("reward", [](const FiniteMdp& x) { return Matrix(x.reward()); })
      .def_property_readonly("transition", [](const FiniteMdp& x) { return Matrix(x.transition()); })
      .def_property_readonly("start", &FiniteMdp::start);

  py::class_<TabularPolicy>(m, "TabularPolicy")
      .def(py::init([](const Matrix& probs) { return TabularPolicy(as_table(probs)); }))
      .def_static("uniform", &TabularPolicy::uniform)
      .def_property_readonly("probs", [](const TabularPolicy& p) { return Matrix(p.probs()); });

  m.def("evaluate_policy", &evaluate_policy);
  m.def("expected_return", &expected_return);
  m.def("advantage", [](const FiniteMdp& mdp, const TabularPolicy& pi) {
    return Matrix(q_and_advantage(mdp, pi).adv);
  });
  m.def("occupancy", [](const FiniteMdp& mdp, const TabularPolicy& pi) { return occupancy(mdp, pi).state; });

  m.def(
      "mix",
      [](const TabularPolicy& beta, const TabularPolicy& rho, const Matrix& lam) {
        return Matrix(mix(beta, rho, ConfidenceTable{as_table(lam)}).mixed.probs());
      },
      py::arg("beta"), py::arg("rho"), py::arg("lam"));

  m.def(
      "diff_value_identity",
      [](const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho, const Matrix& lam) {
        const DiffValueReport r = diff_value_identity(mdp, beta, rho, ConfidenceTable{as_table(lam)});
        return py::dict(py::arg("direct") = r.direct, py::arg("beta_resolvent") = r.beta_resolvent,
                        py::arg("pi_resolvent") = r.pi_resolvent,
                        py::arg("max_deviation") = r.max_deviation, py::arg("pass") = r.pass);
      });

  m.def(
      "bound_report",
      [](const FiniteMdp& mdp, const TabularPolicy& beta, const TabularPolicy& rho, const Matrix& lam,
         const std::vector<Vector>& us, const std::vector<double>& mus) {
        const BoundReport r = bound_report(mdp, beta, rho, ConfidenceTable{as_table(lam)}, us, mus);
        return py::module_::import("json").attr("loads")(bound_report_to_json(r).dump());
      },
      py::arg("mdp"), py::arg("beta"), py::arg("rho"), py::arg("lam"), py::arg("us") = std::vector<Vector>{},
      py::arg("mus") = std::vector<double>{0.0, 0.5, 1.0});

  m.def("project_confidence", [](const Vector& label, const Vector& beta_row, const Vector& rho_row) {
    return project_confidence(label, beta_row.transpose(), rho_row.transpose()).exact;
  });

  m.def(
      "temperature",
      [](const TabularPolicy& beta, const Matrix& lam, const Matrix& adv, double gamma) {
        return temperatures(beta, ConfidenceTable{as_table(lam)}, as_table(adv), gamma);
      });
  m.def("candidate_policy", [](const TabularPolicy& beta, const Matrix& adv, const Matrix& lam, const Vector& tau) {
    return Matrix(candidate_policy(beta, as_table(adv), ConfidenceTable{as_table(lam)}, tau).probs());
  });

  m.def(
      "solve_confidence_qp",
      [](const std::vector<std::size_t>& states, const std::vector<double>& counts, const Matrix& beta_rows,
         const Matrix& rho_rows, const Matrix& adv_rows, double gamma, const std::string& method) {
        const ConfidenceQp qp = make_confidence_qp(states, counts, as_table(beta_rows), as_table(rho_rows),
                                                   as_table(adv_rows), gamma);
        QpOptions opt;
        opt.method = qp_method_from_string(method);
        const QpSolution sol = solve_confidence(qp, opt);
        return py::make_tuple(sol.lambda, sol.objective);
      },
      py::arg("states"), py::arg("counts"), py::arg("beta_rows"), py::arg("rho_rows"), py::arg("adv_rows"),
      py::arg("gamma"), py::arg("method") = "active_set");

  m.def(
      "make_env",
      [](const std::string& spec, double gamma) {
        const Environment env = make_env(EnvSpec::parse(spec, gamma));
        return py::make_tuple(env.mdp, env.spec.str());
      },
      py::arg("spec"), py::arg("gamma") = 0.99);
  m.def(
      "behavior_policy",
      [](const FiniteMdp& mdp, double quality, double epsilon) { return behavior_policy(mdp, quality, epsilon).policy; },
      py::arg("mdp"), py::arg("quality") = 0.75, py::arg("epsilon") = 0.25);

  m.def(
      "generate_batch",
      [](const std::string& spec, const TabularPolicy& beta, std::size_t n, std::uint64_t seed, double epsilon,
         double quality, double gamma) {
        const Environment env = make_env(EnvSpec::parse(spec, gamma));
        return batch_to_jsonl(generate_batch(env, beta, n, seed, epsilon, quality));
      },
      py::arg("spec"), py::arg("beta"), py::arg("n"), py::arg("seed"), py::arg("epsilon") = 0.0,
      py::arg("quality") = 1.0, py::arg("gamma") = 0.99);

  m.def(
      "train_brpo",
      [](const std::string& jsonl, const TabularPolicy& beta, const Matrix& adv, const py::object& config) {
        std::istringstream is(jsonl);
        const Batch batch = read_batch(is);
        const AdvantageTable a = as_table(adv);
        CoordinateAscentInput in;
        in.batch = &batch;
        in.beta = &beta;
        in.adv = &a;
        in.gamma = batch.meta.gamma;
        const CoordinateAscentResult r = coordinate_ascent(in, solver_config(config));
        return py::make_tuple(Matrix(r.policy.mixed.probs()), Matrix(r.policy.confidence.lam),
                              trace_csv(r.trace));
      },
      py::arg("batch_jsonl"), py::arg("beta"), py::arg("adv"), py::arg("config") = py::none());

  m.def(
      "verify",
      [](const std::string& suite, std::size_t trials, std::uint64_t seed) {
        const VerifyResult r = run_verify_suite(suite, trials, seed);
        return py::make_tuple(r.all_pass(), verify_csv(r.rows));
      },
      py::arg("suite"), py::arg("trials") = 100, py::arg("seed") = 7);
}
