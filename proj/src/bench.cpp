#include "fastsinkhorn/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace fastsinkhorn {

double fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error(ErrorCode::DegenerateInput, "slope fit needs two points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [size, time] : points) {
    if (!(size > 0.0) || !(time > 0.0)) {
      throw Error(ErrorCode::DegenerateInput, "slope fit needs positive sizes and times");
    }
    sx += std::log(size);
    sy += std::log(time);
  }
  const double count = static_cast<double>(points.size());
  const double mx = sx / count, my = sy / count;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [size, time] : points) {
    const double dx = std::log(size) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(time) - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateInput, "slope fit needs two distinct sizes");
  return sxy / sxx;
}

MeasurePair make_problem(const ProblemSpec& spec) {
  if (spec.kind == ProblemKind::ricker) {
    if (spec.dim != 1) throw Error(ErrorCode::InvalidArgument, "the Ricker problem is 1D only");
    return ricker_pair(spec.n, spec.t_min, spec.t_max, spec.shift, spec.delta).measures;
  }
  if (spec.dim == 1) return random_pair_1d(spec.n, spec.seed);
  if (spec.dim == 2) return random_pair_2d(spec.n, spec.m == 0 ? spec.n : spec.m, spec.seed);
  throw Error(ErrorCode::InvalidArgument, "dimension must be 1 or 2");
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool above_naive_cap(const ProblemSpec& p) {
  if (p.dim == 1) return p.n > kNaiveMaxN1D;
  const std::size_t m = p.m == 0 ? p.n : p.m;
  return p.n * m > kNaiveMaxEntries2D;
}

}  // namespace

BenchResult run_bench(const BenchConfig& config, std::ostream* progress) {
  if (config.sizes.empty()) throw Error(ErrorCode::InvalidArgument, "no sizes given");
  if (config.trials < 1) throw Error(ErrorCode::InvalidArgument, "need at least one trial");
  BenchResult result;
  std::map<Method, std::vector<std::pair<double, double>>> medians;

  for (std::size_t size : config.sizes) {
    ProblemSpec spec = config.problem;
    spec.n = size;
    if (spec.dim == 2) spec.m = size;
    for (Method method : config.methods) {
      if (method == Method::naive && above_naive_cap(spec)) {
        result.notes.push_back("naive omitted at size " + std::to_string(size) + " (above cap)");
        continue;
      }
      SolverConfig sc;
      sc.epsilon = config.epsilon;
      sc.tol = 0.0;
      sc.stabilized = config.stabilized;
      sc.tau = config.tau;

      {
        // Untimed warm-up on the trial-0 input.
        const MeasurePair warm = make_problem(spec);
        SolverConfig wc = sc;
        wc.itr_max = std::min<std::size_t>(config.iterations, 5);
        wc.check_interval = wc.itr_max;
        (void)solve_with(method, warm.u, warm.v, wc);
      }

      sc.itr_max = config.iterations;
      sc.check_interval = config.iterations;
      std::vector<double> times;
      for (std::size_t trial = 0; trial < config.trials; ++trial) {
        ProblemSpec ts = spec;
        ts.seed = config.problem.seed + trial;
        const MeasurePair pb = make_problem(ts);
        const SolveResult r = solve_with(method, pb.u, pb.v, sc);
        BenchRecord rec;
        rec.method = method;
        rec.size = pb.u.size();
        rec.epsilon = config.epsilon;
        rec.iterations = r.report.iterations;
        rec.wall_time_seconds = std::max(r.report.wall_time_seconds, 1e-9);
        rec.marginal_error = r.report.final_marginal_error;
        rec.seed = ts.seed;
        rec.trial = trial;
        result.records.push_back(rec);
        times.push_back(rec.wall_time_seconds);
        if (progress) {
          *progress << to_string(method) << " size=" << rec.size << " trial=" << trial
                    << " time=" << format_double(rec.wall_time_seconds) << "s\n";
        }
      }
      medians[method].emplace_back(static_cast<double>(result.records.back().size), median(times));
    }
  }
  for (const auto& [method, pts] : medians) {
    if (pts.size() >= 2) result.exponents[method] = fit_loglog_slope(pts);
  }
  return result;
}

CompareReport compare_methods(const MeasurePair& problem, const SolverConfig& config) {
  const SolveResult fast = solve(problem.u, problem.v, config);
  const SolveResult slow = naive_solve(problem.u, problem.v, config);
  CompareReport rep;
  rep.fs1_seconds = std::max(fast.report.wall_time_seconds, 1e-9);
  rep.naive_seconds = std::max(slow.report.wall_time_seconds, 1e-9);
  rep.speedup = rep.naive_seconds / rep.fs1_seconds;
  rep.fs1_cost = fast.report.cost;
  rep.naive_cost = slow.report.cost;
  rep.iterations = fast.report.iterations;
  rep.aborted = fast.report.aborted_nonfinite || slow.report.aborted_nonfinite;
  rep.plan_frobenius = rep.aborted ? std::numeric_limits<double>::quiet_NaN()
                                   : plan_frobenius_distance(fast.plan(), slow.plan());
  return rep;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_bench_csv(std::ostream& os, const BenchConfig& config, const BenchResult& result) {
  os << "# generator=" << kGeneratorId << "\n";
  os << "# dim=" << config.problem.dim << " iterations=" << config.iterations
     << " trials=" << config.trials << " epsilon=" << format_double(config.epsilon) << "\n";
  os << "# sizes=";
  for (std::size_t i = 0; i < config.sizes.size(); ++i) os << (i ? ";" : "") << config.sizes[i];
  os << "\n";
  for (const auto& [method, slope] : result.exponents) {
    os << "# exponent_" << to_string(method) << "=" << format_double(slope) << "\n";
  }
  os << "method,size,epsilon,iterations,wall_time_seconds,marginal_error,seed,trial\n";
  for (const auto& r : result.records) {
    os << to_string(r.method) << ',' << r.size << ',' << format_double(r.epsilon) << ','
       << r.iterations << ',' << format_double(r.wall_time_seconds) << ','
       << format_double(r.marginal_error) << ',' << r.seed << ',' << r.trial << '\n';
  }
}

}  // namespace fastsinkhorn
