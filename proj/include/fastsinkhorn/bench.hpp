#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastsinkhorn/problems.hpp"
#include "fastsinkhorn/solver.hpp"

namespace fastsinkhorn {

/// One timed run. `size` is the total number of grid points (N or N*M).
struct BenchRecord {
  Method method = Method::fs1;
  std::size_t size = 0;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double wall_time_seconds = 0.0;
  double marginal_error = 0.0;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
};

/// Least-squares slope of ln(time) against ln(size).
double fit_loglog_slope(std::span<const std::pair<double, double>> points);

enum class ProblemKind { random, ricker };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::random;
  int dim = 1;
  std::size_t n = 1000;
  std::size_t m = 0;  // 2D: columns; 0 means square (m = n)
  std::uint64_t seed = 0;
  double shift = -1.2032;
  double delta = 1e-3;
  double t_min = -4.0;
  double t_max = 4.0;
};

/// Builds the seeded input pair a spec describes.
MeasurePair make_problem(const ProblemSpec& spec);

struct BenchConfig {
  ProblemSpec problem;  // n / m overridden by `sizes`
  /// 1D: grid point counts. 2D: points per axis (square grids).
  std::vector<std::size_t> sizes;
  std::vector<Method> methods{Method::fs1, Method::naive};
  std::size_t trials = 10;
  std::size_t iterations = 1000;
  double epsilon = 0.001;
  bool stabilized = false;
  double tau = 1e10;
};

struct BenchResult {
  std::vector<BenchRecord> records;
  std::map<Method, double> exponents;
  std::vector<std::string> notes;
};

/// Runs every (size, method, trial) serially with tol = 0 and a single
/// marginal-error check at the end, after one short untimed warm-up per
/// (size, method). Exponents are fitted to the per-size median times.
BenchResult run_bench(const BenchConfig& config, std::ostream* progress = nullptr);

struct CompareReport {
  double fs1_seconds = 0.0;
  double naive_seconds = 0.0;
  double speedup = 0.0;
  double plan_frobenius = 0.0;
  double fs1_cost = 0.0;
  double naive_cost = 0.0;
  std::size_t iterations = 0;
  bool aborted = false;
};

/// Runs both methods on the same input and iteration budget and compares
/// their plans entrywise.
CompareReport compare_methods(const MeasurePair& problem, const SolverConfig& config);

/// Shortest round-trip decimal, independent of the global locale.
std::string format_double(double value);

void write_bench_csv(std::ostream& os, const BenchConfig& config, const BenchResult& result);

}  // namespace fastsinkhorn
