#include "fastsinkhorn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "fastsinkhorn/bench.hpp"
#include "fastsinkhorn/problems.hpp"
#include "fastsinkhorn/solver.hpp"

namespace fastsinkhorn {

namespace {

struct ProblemFlags {
  std::string u_path;
  std::string v_path;
  bool random = false;
  bool ricker = false;
  bool normalize = false;
  std::size_t n = 1000;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  double shift = -1.2032;
  std::optional<double> delta;
  double t_min = -4.0;
  double t_max = 4.0;
  std::optional<double> h;
  double h1 = 1.0;
  double h2 = 1.0;
};

struct SolverFlags {
  double eps = 0.01;
  double tol = 1e-9;
  std::size_t itr_max = 10000;
  std::size_t check_interval = 1;
  bool stabilize = false;
  double tau = 1e10;
  std::string method = "fs1";
  std::string out;

  SolverConfig config() const {
    SolverConfig c;
    c.epsilon = eps;
    c.tol = tol;
    c.itr_max = itr_max;
    c.check_interval = check_interval;
    c.stabilized = stabilize;
    c.tau = tau;
    return c;
  }
};

void add_problem_flags(CLI::App* app, ProblemFlags& f, int dim) {
  app->add_option("--u", f.u_path, dim == 1 ? "source measure (csv)" : "source image (csv|pgm)");
  app->add_option("--v", f.v_path, dim == 1 ? "target measure (csv)" : "target image (csv|pgm)");
  app->add_flag("--random", f.random, "seeded uniform random pair");
  app->add_option("--n", f.n, dim == 1 ? "grid points" : "grid rows");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--delta", f.delta, "normalization floor");
  if (dim == 1) {
    app->add_flag("--ricker", f.ricker, "Ricker wavelet and its translate");
    app->add_option("--shift", f.shift, "Ricker translation");
    app->add_option("--tmin", f.t_min, "Ricker time window start");
    app->add_option("--tmax", f.t_max, "Ricker time window end");
    app->add_option("--h", f.h, "grid spacing");
    app->add_flag("--normalize", f.normalize, "square-and-floor file inputs instead of validating");
  } else {
    app->add_option("--m", f.m, "grid columns (defaults to --n)");
    app->add_option("--h1", f.h1, "vertical spacing");
    app->add_option("--h2", f.h2, "horizontal spacing");
  }
}

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--eps", f.eps, "entropic regularization");
  app->add_option("--tol", f.tol, "marginal error threshold (0 runs the full budget)");
  app->add_option("--itr-max", f.itr_max, "iteration budget");
  app->add_option("--check-interval", f.check_interval, "iterations between marginal checks");
  app->add_flag("--stabilize,!--no-stabilize", f.stabilize, "log-domain absorption");
  app->add_option("--tau", f.tau, "absorption threshold");
  app->add_option("--out", f.out, "machine-readable CSV output path");
}

std::vector<double> as_vector(const Array2D& a, const std::string& path) {
  if (a.rows() != 1 && a.cols() != 1) {
    throw Error(ErrorCode::ParseError, path + ": expected a single row or column");
  }
  if (a.rows() == 1) {
    std::vector<double> out(a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] = a(0, j);
    return out;
  }
  return a.data();
}

MeasurePair build_problem(const ProblemFlags& f, int dim) {
  const int sources = int(f.random) + int(f.ricker) + int(!f.u_path.empty() || !f.v_path.empty());
  if (sources != 1) {
    throw Error(ErrorCode::InvalidArgument, "choose exactly one of --u/--v, --random, --ricker");
  }
  if (dim == 1) {
    if (f.ricker) {
      return ricker_pair(f.n, f.t_min, f.t_max, f.shift, f.delta.value_or(1e-3)).measures;
    }
    if (f.random) {
      MeasurePair p = random_pair_1d(f.n, f.seed);
      if (f.h) p.u.grid = p.v.grid = Grid1D(f.n, *f.h);
      return p;
    }
    if (f.u_path.empty() || f.v_path.empty()) throw Error(ErrorCode::InvalidArgument, "need both --u and --v");
    auto u = as_vector(load_matrix(f.u_path), f.u_path);
    auto v = as_vector(load_matrix(f.v_path), f.v_path);
    const Grid1D grid(u.size(), f.h.value_or(1.0));
    if (f.normalize) {
      const double delta = f.delta.value_or(1e-3);
      u = normalize_signal(u, delta);
      v = normalize_signal(v, delta);
    }
    return {validate_measure(std::move(u), grid), validate_measure(std::move(v), grid)};
  }
  if (f.random) {
    MeasurePair p = random_pair_2d(f.n, f.m == 0 ? f.n : f.m, f.seed);
    p.u.grid = p.v.grid = Grid2D(f.n, f.m == 0 ? f.n : f.m, f.h1, f.h2);
    return p;
  }
  if (f.ricker) throw Error(ErrorCode::InvalidArgument, "--ricker is 1D only");
  if (f.u_path.empty() || f.v_path.empty()) throw Error(ErrorCode::InvalidArgument, "need both --u and --v");
  const Array2D a = load_matrix(f.u_path);
  const Array2D b = load_matrix(f.v_path);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::GridMismatch, "images differ in shape");
  }
  const double delta = f.delta.value_or(1e-7);
  return {image_to_measure(a, delta, f.h1, f.h2), image_to_measure(b, delta, f.h1, f.h2)};
}

Method parse_method(const std::string& s) {
  if (s == "fs1") return Method::fs1;
  if (s == "naive") return Method::naive;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  return os;
}

const char* status_of(const SolveReport& r) {
  if (r.aborted_nonfinite) return "aborted_nonfinite";
  return r.converged ? "converged" : "itr_max";
}

int cmd_solve(int dim, const ProblemFlags& pf, const SolverFlags& sf, const std::string& plan_out,
              std::ostream& out) {
  const MeasurePair pb = build_problem(pf, dim);
  const SolveResult r = solve_with(parse_method(sf.method), pb.u, pb.v, sf.config());
  const SolveReport& rep = r.report;

  out << "method:          " << sf.method << "\n"
      << "grid points:     " << pb.u.size() << "\n"
      << "epsilon:         " << format_double(sf.eps) << "\n"
      << "cost (W_eps):    " << format_double(rep.cost) << "\n"
      << "iterations:      " << rep.iterations << "\n"
      << "marginal error:  " << format_double(rep.final_marginal_error) << "\n"
      << "wall time (s):   " << format_double(rep.wall_time_seconds) << "\n"
      << "absorptions:     " << rep.stabilization_events.size() << "\n"
      << "status:          " << status_of(rep) << "\n";
  for (const auto& d : rep.diagnostics) out << "note: " << d << "\n";

  if (!sf.out.empty()) {
    auto os = open_out(sf.out);
    os << "iteration,wall_time_seconds,marginal_error\n";
    for (const auto& t : rep.marginal_error_trace) {
      os << t.iteration << ',' << format_double(t.elapsed_seconds) << ',' << format_double(t.error)
         << '\n';
    }
  }
  if (!plan_out.empty() && !rep.aborted_nonfinite) {
    const Array2D plan = plan_materialize(r.plan());
    auto os = open_out(plan_out);
    for (std::size_t i = 0; i < plan.rows(); ++i) {
      for (std::size_t j = 0; j < plan.cols(); ++j) os << (j ? "," : "") << format_double(plan(i, j));
      os << '\n';
    }
  }
  return rep.aborted_nonfinite ? kExitAbnormal : kExitOk;
}

int cmd_compare(int dim, const ProblemFlags& pf, const SolverFlags& sf, std::ostream& out) {
  const MeasurePair pb = build_problem(pf, dim);
  const CompareReport c = compare_methods(pb, sf.config());
  out << "grid points:       " << pb.u.size() << "\n"
      << "iterations:        " << c.iterations << "\n"
      << "fs1 time (s):      " << format_double(c.fs1_seconds) << "\n"
      << "naive time (s):    " << format_double(c.naive_seconds) << "\n"
      << "speed-up:          " << format_double(c.speedup) << "\n"
      << "plan Frobenius:    " << format_double(c.plan_frobenius) << "\n"
      << "fs1 cost:          " << format_double(c.fs1_cost) << "\n"
      << "naive cost:        " << format_double(c.naive_cost) << "\n";
  if (!sf.out.empty()) {
    auto os = open_out(sf.out);
    os << "dim,size,epsilon,iterations,fs1_seconds,naive_seconds,speedup,plan_frobenius,fs1_cost,"
          "naive_cost,aborted\n";
    os << dim << ',' << pb.u.size() << ',' << format_double(sf.eps) << ',' << c.iterations << ','
       << format_double(c.fs1_seconds) << ',' << format_double(c.naive_seconds) << ','
       << format_double(c.speedup) << ',' << format_double(c.plan_frobenius) << ','
       << format_double(c.fs1_cost) << ',' << format_double(c.naive_cost) << ','
       << (c.aborted ? 1 : 0) << '\n';
  }
  return c.aborted ? kExitAbnormal : kExitOk;
}

struct BenchFlags {
  int dim = 1;
  std::vector<std::size_t> sizes;
  std::vector<std::string> methods{"fs1"};
  std::size_t trials = 10;
  std::size_t iterations = 1000;
  double eps = 0.001;
  std::uint64_t seed = 0;
  bool ricker = false;
  double shift = -1.2032;
  double delta = 1e-3;
  double t_min = -4.0;
  double t_max = 4.0;
  bool stabilize = false;
  double tau = 1e10;
  std::string out;
};

int cmd_bench(const BenchFlags& bf, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  cfg.problem.dim = bf.dim;
  cfg.problem.kind = bf.ricker ? ProblemKind::ricker : ProblemKind::random;
  cfg.problem.seed = bf.seed;
  cfg.problem.shift = bf.shift;
  cfg.problem.delta = bf.delta;
  cfg.problem.t_min = bf.t_min;
  cfg.problem.t_max = bf.t_max;
  cfg.sizes = bf.sizes;
  if (cfg.sizes.empty()) {
    if (bf.dim == 1) {
      for (std::size_t s = std::size_t{1} << 10; s <= (std::size_t{1} << 20); s <<= 1) cfg.sizes.push_back(s);
    } else {
      cfg.sizes = {10, 20, 40, 80, 160};
    }
  }
  cfg.methods.clear();
  for (const auto& m : bf.methods) cfg.methods.push_back(parse_method(m));
  cfg.trials = bf.trials;
  cfg.iterations = bf.iterations;
  cfg.epsilon = bf.eps;
  cfg.stabilized = bf.stabilize;
  cfg.tau = bf.tau;

  const BenchResult res = run_bench(cfg, &err);
  out << "generator: " << kGeneratorId << "\n";
  for (const auto& note : res.notes) out << "note: " << note << "\n";
  for (const auto& [method, slope] : res.exponents) {
    out << "fitted exponent (" << to_string(method) << "): " << format_double(slope) << "\n";
  }
  if (!bf.out.empty()) {
    auto os = open_out(bf.out);
    write_bench_csv(os, cfg, res);
  } else {
    write_bench_csv(out, cfg, res);
  }
  return kExitOk;
}

int cmd_trace(int dim, const ProblemFlags& pf, const SolverFlags& sf,
              const std::vector<double>& eps_list, const std::vector<std::string>& methods,
              std::ostream& out) {
  const MeasurePair pb = build_problem(pf, dim);
  std::ostringstream csv;
  csv << "method,epsilon,iteration,wall_time_seconds,marginal_error,status\n";
  bool any_aborted = false;
  for (double eps : eps_list) {
    for (const auto& name : methods) {
      SolverFlags f = sf;
      f.eps = eps;
      const SolveResult r = solve_with(parse_method(name), pb.u, pb.v, f.config());
      const auto& rep = r.report;
      for (const auto& t : rep.marginal_error_trace) {
        csv << name << ',' << format_double(eps) << ',' << t.iteration << ','
            << format_double(t.elapsed_seconds) << ',' << format_double(t.error) << ",ok\n";
      }
      if (rep.aborted_nonfinite) {
        any_aborted = true;
        csv << name << ',' << format_double(eps) << ',' << rep.iterations << ','
            << format_double(rep.wall_time_seconds) << ",nan,aborted_nonfinite\n";
      }
      out << name << " eps=" << format_double(eps) << ": " << rep.iterations << " iterations, "
          << format_double(rep.wall_time_seconds) << " s, final error "
          << format_double(rep.final_marginal_error) << ", " << status_of(rep) << "\n";
    }
  }
  if (!sf.out.empty()) {
    auto os = open_out(sf.out);
    os << csv.str();
  } else {
    out << csv.str();
  }
  return any_aborted ? kExitAbnormal : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropic Wasserstein-1 distances on uniform grids with linear-time Sinkhorn"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  ProblemFlags p1, p2, pc, pt;
  SolverFlags s1, s2, sc, st;
  std::string plan1, plan2;
  int compare_dim = 1, trace_dim = 1;

  auto* solve1d = app.add_subcommand("solve1d", "solve on a 1D grid");
  add_problem_flags(solve1d, p1, 1);
  add_solver_flags(solve1d, s1);
  solve1d->add_option("--method", s1.method, "fs1 or naive");
  solve1d->add_option("--plan-out", plan1, "write the transport plan as CSV (small grids)");

  auto* solve2d = app.add_subcommand("solve2d", "solve on a 2D grid");
  add_problem_flags(solve2d, p2, 2);
  add_solver_flags(solve2d, s2);
  solve2d->add_option("--method", s2.method, "fs1 or naive");
  solve2d->add_option("--plan-out", plan2, "write the transport plan as CSV (small grids)");

  // compare and trace accept both 1D and 2D problem flags; --dim picks.
  sc.tol = 0.0;
  sc.itr_max = 1000;
  auto* compare = app.add_subcommand("compare", "fs1 against naive Sinkhorn on one input");
  compare->add_option("--dim", compare_dim, "1 or 2")->check(CLI::IsMember({1, 2}));
  add_problem_flags(compare, pc, 1);
  compare->add_option("--m", pc.m, "2D grid columns (defaults to --n)");
  compare->add_option("--h1", pc.h1, "2D vertical spacing");
  compare->add_option("--h2", pc.h2, "2D horizontal spacing");
  add_solver_flags(compare, sc);

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "timing sweep with log-log exponent fit");
  bench->add_option("--dim", bf.dim, "1 or 2")->check(CLI::IsMember({1, 2}));
  bench->add_option("--sizes", bf.sizes, "1D: points; 2D: points per axis")->delimiter(',');
  bench->add_option("--methods", bf.methods, "fs1,naive")->delimiter(',');
  bench->add_option("--trials", bf.trials, "trials per size");
  bench->add_option("--itr-max", bf.iterations, "fixed iterations per run");
  bench->add_option("--eps", bf.eps, "entropic regularization");
  bench->add_option("--seed", bf.seed, "seed of trial 0");
  bench->add_flag("--ricker", bf.ricker, "Ricker pair instead of random measures");
  bench->add_option("--shift", bf.shift, "Ricker translation");
  bench->add_option("--delta", bf.delta, "Ricker normalization floor");
  bench->add_option("--tmin", bf.t_min, "Ricker time window start");
  bench->add_option("--tmax", bf.t_max, "Ricker time window end");
  bench->add_flag("--stabilize,!--no-stabilize", bf.stabilize, "log-domain absorption");
  bench->add_option("--tau", bf.tau, "absorption threshold");
  bench->add_option("--out", bf.out, "CSV output path");

  std::vector<double> eps_list{0.1, 0.01, 0.001};
  std::vector<std::string> trace_methods{"fs1", "naive"};
  st.itr_max = 1000;
  auto* trace = app.add_subcommand("trace", "marginal error against wall time per method and epsilon");
  trace->add_option("--dim", trace_dim, "1 or 2")->check(CLI::IsMember({1, 2}));
  add_problem_flags(trace, pt, 1);
  trace->add_option("--m", pt.m, "2D grid columns (defaults to --n)");
  trace->add_option("--h1", pt.h1, "2D vertical spacing");
  trace->add_option("--h2", pt.h2, "2D horizontal spacing");
  add_solver_flags(trace, st);
  trace->add_option("--eps-list", eps_list, "regularization values")->delimiter(',');
  trace->add_option("--methods", trace_methods, "fs1,naive")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve1d) return cmd_solve(1, p1, s1, plan1, out);
    if (*solve2d) return cmd_solve(2, p2, s2, plan2, out);
    if (*compare) return cmd_compare(compare_dim, pc, sc, out);
    if (*bench) return cmd_bench(bf, out, err);
    if (*trace) return cmd_trace(trace_dim, pt, st, eps_list, trace_methods, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fastsinkhorn
