#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fastsinkhorn/kernel_ops.hpp"
#include "fastsinkhorn/problems.hpp"
#include "fastsinkhorn/solver.hpp"

namespace py = pybind11;
using namespace fastsinkhorn;

namespace {

using Vec = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FVec = py::array_t<double, py::array::f_style | py::array::forcecast>;

std::vector<double> to_vector(const Vec& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> to_matrix(const Array2D& a) {
  py::array_t<double, py::array::f_style> out({a.rows(), a.cols()});
  std::copy(a.data().begin(), a.data().end(), out.mutable_data());
  return out;
}

Method parse_method(const std::string& name) {
  if (name == "fs1") return Method::fs1;
  if (name == "naive") return Method::naive;
  throw Error(ErrorCode::InvalidArgument, "method must be fs1 or naive, got " + name);
}

SolverConfig make_config(double epsilon, double tol, std::size_t itr_max, bool stabilized,
                         double tau, std::size_t check_interval) {
  SolverConfig c;
  c.epsilon = epsilon;
  c.tol = tol;
  c.itr_max = itr_max;
  c.stabilized = stabilized;
  c.tau = tau;
  c.check_interval = check_interval;
  return c;
}

py::dict report_dict(const SolveResult& r, bool with_plan) {
  py::dict d;
  d["cost"] = r.report.cost;
  d["iterations"] = r.report.iterations;
  d["converged"] = r.report.converged;
  d["marginal_error"] = r.report.final_marginal_error;
  d["wall_time_seconds"] = r.report.wall_time_seconds;
  d["aborted_nonfinite"] = r.report.aborted_nonfinite;
  d["absorptions"] = r.report.stabilization_events.size();
  py::list trace;
  for (const auto& t : r.report.marginal_error_trace)
    trace.append(py::make_tuple(t.iteration, t.elapsed_seconds, t.error));
  d["trace"] = trace;
  d["diagnostics"] = r.report.diagnostics;
  d["phi"] = to_array(r.state.phi);
  d["psi"] = to_array(r.state.psi);
  d["alpha"] = to_array(r.state.alpha);
  d["beta"] = to_array(r.state.beta);
  if (with_plan) d["plan"] = to_matrix(plan_materialize(r.plan()));
  return d;
}

py::dict solve_1d(const Vec& u, const Vec& v, double h, double epsilon, double tol,
                  std::size_t itr_max, bool stabilized, double tau, std::size_t check_interval,
                  const std::string& method, bool plan) {
  const Grid grid = Grid1D(static_cast<std::size_t>(u.size()), h);
  const auto mu = validate_measure(to_vector(u), grid);
  const auto nu = validate_measure(to_vector(v), grid);
  const auto cfg = make_config(epsilon, tol, itr_max, stabilized, tau, check_interval);
  SolveResult r;
  {
    py::gil_scoped_release release;
    r = solve_with(parse_method(method), mu, nu, cfg);
  }
  return report_dict(r, plan);
}

py::dict solve_2d(const FVec& u, const FVec& v, double h1, double h2, double epsilon, double tol,
                  std::size_t itr_max, bool stabilized, double tau, std::size_t check_interval,
                  const std::string& method, bool plan) {
  if (u.ndim() != 2 || v.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "expected 2D arrays");
  if (u.shape(0) != v.shape(0) || u.shape(1) != v.shape(1))
    throw Error(ErrorCode::GridMismatch, "u and v shapes differ");
  const Grid grid = Grid2D(static_cast<std::size_t>(u.shape(0)), static_cast<std::size_t>(u.shape(1)), h1, h2);
  const auto mu = validate_measure(std::vector<double>(u.data(), u.data() + u.size()), grid);
  const auto nu = validate_measure(std::vector<double>(v.data(), v.data() + v.size()), grid);
  const auto cfg = make_config(epsilon, tol, itr_max, stabilized, tau, check_interval);
  SolveResult r;
  {
    py::gil_scoped_release release;
    r = solve_with(parse_method(method), mu, nu, cfg);
  }
  return report_dict(r, plan);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Linear-time Sinkhorn iterations for entropic W1 on uniform grids.";

  static py::exception<Error> error(m, "FastSinkhornError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("solve_1d", &solve_1d, py::arg("u"), py::arg("v"), py::arg("h") = 1.0,
        py::arg("epsilon") = 0.01, py::arg("tol") = 1e-9, py::arg("itr_max") = 10000,
        py::arg("stabilized") = false, py::arg("tau") = 1e10, py::arg("check_interval") = 1,
        py::arg("method") = "fs1", py::arg("plan") = false);
  m.def("solve_2d", &solve_2d, py::arg("u"), py::arg("v"), py::arg("h1") = 1.0, py::arg("h2") = 1.0,
        py::arg("epsilon") = 0.01, py::arg("tol") = 1e-9, py::arg("itr_max") = 10000,
        py::arg("stabilized") = false, py::arg("tau") = 1e10, py::arg("check_interval") = 1,
        py::arg("method") = "fs1", py::arg("plan") = false);
  m.def(
      "exact_w1_1d",
      [](const Vec& u, const Vec& v, double h) { return exact_w1_1d(to_vector(u), to_vector(v), h); },
      py::arg("u"), py::arg("v"), py::arg("h") = 1.0);
  m.def(
      "apply_1d", [](const Vec& x, double lambda) { return to_array(fast_apply_1d(to_vector(x), lambda)); },
      py::arg("x"), py::arg("lam"));
  m.def(
      "weighted_apply_1d",
      [](const Vec& x, double lambda, double h) {
        return to_array(fast_weighted_apply_1d(to_vector(x), lambda, h));
      },
      py::arg("x"), py::arg("lam"), py::arg("h"));
  m.def(
      "random_pair_1d",
      [](std::size_t n, std::uint64_t seed) {
        const auto p = random_pair_1d(n, seed);
        return py::make_tuple(to_array(p.u.weights), to_array(p.v.weights),
                              std::get<Grid1D>(p.u.grid).h);
      },
      py::arg("n"), py::arg("seed") = 0);
  m.def(
      "ricker_pair",
      [](std::size_t n, double t_min, double t_max, double shift, double delta) {
        const auto p = ricker_pair(n, t_min, t_max, shift, delta);
        return py::make_tuple(to_array(p.times), to_array(p.measures.u.weights),
                              to_array(p.measures.v.weights));
      },
      py::arg("n"), py::arg("t_min") = -4.0, py::arg("t_max") = 4.0, py::arg("shift") = -1.2032,
      py::arg("delta") = 1e-3);
  m.def("ricker", &ricker, py::arg("t"), py::arg("f0") = 1.0, py::arg("amplitude") = 1.0);
}
