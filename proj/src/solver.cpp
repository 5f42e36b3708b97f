#include "fastsinkhorn/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace fastsinkhorn {

std::string_view to_string(Method method) noexcept {
  return method == Method::fs1 ? "fs1" : "naive";
}

namespace {

/// Applies the (possibly rescaled) kernel with the chosen method.
class KernelOperator {
 public:
  KernelOperator(Method method, const Grid& grid, const KernelSpec& kernel)
      : method_(method), kernel_(kernel) {
    if (const auto* g2 = std::get_if<Grid2D>(&grid)) {
      rows_ = g2->n;
      cols_ = g2->m;
      two_d_ = true;
      if (!kernel.lambda2) throw Error(ErrorCode::GridMismatch, "2D grid needs a 2D kernel");
    } else {
      rows_ = point_count(grid);
      cols_ = 1;
    }
    if (method == Method::naive) {
      if (two_d_ && rows_ * cols_ > kNaiveMaxEntries2D) {
        throw Error(ErrorCode::TooLarge, "naive solve above the 2D size cap");
      }
      if (!two_d_ && rows_ > kNaiveMaxN1D) {
        throw Error(ErrorCode::TooLarge, "naive solve above the 1D size cap");
      }
    }
  }

  // out = diag(e^{out_log/eps}) K diag(e^{in_log/eps}) x; the logs are
  // ignored while `scaled` is false.
  void apply(std::span<const double> x, std::span<const double> out_log,
             std::span<const double> in_log, bool scaled, std::span<double> out) {
    const double eps = kernel_.epsilon;
    const double l1 = kernel_.lambda1;
    if (!two_d_) {
      if (method_ == Method::fs1) {
        if (scaled) detail::stabilized_apply_1d(x, out_log, in_log, l1, eps, buf_, out);
        else detail::apply_1d(x, l1, buf_, out);
      } else {
        if (scaled) detail::naive_stabilized_apply_1d(x, out_log, in_log, l1, eps, out);
        else detail::naive_apply_1d(x, l1, out);
      }
      return;
    }
    const double l2 = *kernel_.lambda2;
    if (method_ == Method::fs1) {
      if (scaled) detail::stabilized_apply_2d(x, out_log, in_log, rows_, cols_, l1, l2, eps, buf_, out);
      else detail::apply_2d(x, rows_, cols_, l1, l2, buf_, out);
    } else {
      if (scaled) detail::naive_stabilized_apply_2d(x, out_log, in_log, rows_, cols_, l1, l2, eps, out);
      else detail::naive_apply_2d(x, rows_, cols_, l1, l2, out);
    }
  }

 private:
  Method method_;
  const KernelSpec& kernel_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 1;
  bool two_d_ = false;
  RecursionBuffers buf_;
};

// target / kx written into `side`; returns false if any quotient is not finite.
bool divide_into(std::span<const double> target, std::span<const double> kx,
                 std::vector<double>& side) {
  bool finite = true;
  for (std::size_t i = 0; i < side.size(); ++i) {
    side[i] = target[i] / kx[i];
    finite &= std::isfinite(side[i]);
  }
  return finite;
}

double l1_residual(std::span<const double> scale, std::span<const double> kx,
                   std::span<const double> target) {
  double err = 0.0;
  for (std::size_t i = 0; i < scale.size(); ++i) err += std::abs(scale[i] * kx[i] - target[i]);
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void require_state_matches(const SinkhornState& state, std::size_t n) {
  if (state.phi.size() != n || state.psi.size() != n || state.alpha.size() != n ||
      state.beta.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "state does not match the measure");
  }
}

KernelSpec require_kernel_for(const Grid& grid, const KernelSpec& kernel) {
  if (is_2d(grid) != kernel.lambda2.has_value()) {
    throw Error(ErrorCode::GridMismatch, "kernel dimension does not match the grid");
  }
  return kernel;
}

double marginal_error_impl(const SinkhornState& state, const DiscreteMeasure& target,
                           const KernelSpec& kernel, Method method, Side side) {
  require_state_matches(state, target.size());
  require_kernel_for(target.grid, kernel);
  KernelOperator op(method, target.grid, kernel);
  std::vector<double> kx(target.size());
  if (side == Side::psi) {
    op.apply(state.phi, state.beta, state.alpha, state.absorbed, kx);
    return l1_residual(state.psi, kx, target.weights);
  }
  op.apply(state.psi, state.alpha, state.beta, state.absorbed, kx);
  return l1_residual(state.phi, kx, target.weights);
}

void validate_problem(const DiscreteMeasure& u, const DiscreteMeasure& v) {
  if (!(u.grid == v.grid)) throw Error(ErrorCode::GridMismatch, "u and v live on different grids");
  if (u.size() != point_count(u.grid) || v.size() != point_count(v.grid)) {
    throw Error(ErrorCode::LengthMismatch, "measure length does not match its grid");
  }
  if (!u.strictly_positive() || !v.strictly_positive()) {
    throw Error(ErrorCode::NonPositiveInput, "solver requires strictly positive weights");
  }
}

}  // namespace

SinkhornState sinkhorn_halfstep(Side side, SinkhornState state, const DiscreteMeasure& target,
                                const KernelSpec& kernel, Method method) {
  require_state_matches(state, target.size());
  require_kernel_for(target.grid, kernel);
  KernelOperator op(method, target.grid, kernel);
  std::vector<double> kx(target.size());
  bool finite = false;
  if (side == Side::psi) {
    op.apply(state.phi, state.beta, state.alpha, state.absorbed, kx);
    finite = divide_into(target.weights, kx, state.psi);
  } else {
    op.apply(state.psi, state.alpha, state.beta, state.absorbed, kx);
    finite = divide_into(target.weights, kx, state.phi);
  }
  if (!finite) throw Error(ErrorCode::NonFiniteResult, "scaling update overflowed");
  return state;
}

StabilizationEvent absorb(SinkhornState& state, const KernelSpec& kernel) {
  for (const auto* v : {&state.phi, &state.psi}) {
    for (double x : *v) {
      if (!std::isfinite(x) || !(x > 0.0)) {
        throw Error(ErrorCode::NonFiniteInput, "absorption needs finite positive scalings");
      }
    }
  }
  StabilizationEvent event{state.iteration, max_abs(state.phi), max_abs(state.psi)};
  const double eps = kernel.epsilon;
  for (std::size_t i = 0; i < state.phi.size(); ++i) {
    state.alpha[i] += eps * std::log(state.phi[i]);
    state.phi[i] = 1.0;
  }
  for (std::size_t j = 0; j < state.psi.size(); ++j) {
    state.beta[j] += eps * std::log(state.psi[j]);
    state.psi[j] = 1.0;
  }
  state.absorbed = true;
  return event;
}

double marginal_error(const SinkhornState& state, const DiscreteMeasure& v,
                      const KernelSpec& kernel, Method method) {
  return marginal_error_impl(state, v, kernel, method, Side::psi);
}

double source_marginal_error(const SinkhornState& state, const DiscreteMeasure& u,
                             const KernelSpec& kernel, Method method) {
  return marginal_error_impl(state, u, kernel, method, Side::phi);
}

double transport_cost_1d(const SinkhornState& state, const KernelSpec& kernel, const Grid1D& grid) {
  require_state_matches(state, grid.size());
  std::vector<double> t(grid.size());
  RecursionBuffers buf;
  if (state.absorbed) {
    detail::stabilized_weighted_apply_1d(state.psi, state.alpha, state.beta, kernel.lambda1,
                                         grid.h, kernel.epsilon, buf, t);
  } else {
    detail::weighted_apply_1d(state.psi, kernel.lambda1, grid.h, buf, t);
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) cost += state.phi[i] * t[i];
  if (!std::isfinite(cost)) throw Error(ErrorCode::NonFiniteResult, "transport cost is not finite");
  return cost;
}

double transport_cost_2d(const SinkhornState& state, const KernelSpec& kernel, const Grid2D& grid) {
  require_state_matches(state, grid.size());
  if (!kernel.lambda2) throw Error(ErrorCode::GridMismatch, "2D grid needs a 2D kernel");
  std::vector<double> t(grid.size());
  RecursionBuffers buf;
  if (state.absorbed) {
    detail::stabilized_weighted_apply_2d(state.psi, state.alpha, state.beta, grid.n, grid.m,
                                         kernel.lambda1, *kernel.lambda2, grid.h1, grid.h2,
                                         kernel.epsilon, buf, t);
  } else {
    detail::weighted_apply_2d(state.psi, grid.n, grid.m, kernel.lambda1, *kernel.lambda2, grid.h1,
                              grid.h2, buf, t);
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) cost += state.phi[i] * t[i];
  if (!std::isfinite(cost)) throw Error(ErrorCode::NonFiniteResult, "transport cost is not finite");
  return cost;
}

double transport_cost(const SinkhornState& state, const KernelSpec& kernel, const Grid& grid) {
  if (const auto* g2 = std::get_if<Grid2D>(&grid)) return transport_cost_2d(state, kernel, *g2);
  return transport_cost_1d(state, kernel, std::get<Grid1D>(grid));
}

double transport_cost_bruteforce(const SinkhornState& state, const KernelSpec& kernel,
                                 const Grid& grid) {
  const TransportPlanView plan(state, kernel, grid);
  const std::size_t n = plan.size();
  double cost = 0.0;
  if (const auto* g2 = std::get_if<Grid2D>(&grid)) {
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i1 = a % g2->n, j1 = a / g2->n;
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t i2 = b % g2->n, j2 = b / g2->n;
        const double d = static_cast<double>(i1 > i2 ? i1 - i2 : i2 - i1) * g2->h1 +
                         static_cast<double>(j1 > j2 ? j1 - j2 : j2 - j1) * g2->h2;
        cost += plan.entry(a, b) * d;
      }
    }
  } else {
    const double h = std::get<Grid1D>(grid).h;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cost += plan.entry(i, j) * static_cast<double>(i > j ? i - j : j - i) * h;
  }
  return cost;
}

SolveResult solve_with(Method method, const DiscreteMeasure& u, const DiscreteMeasure& v,
                       const SolverConfig& config) {
  config.validate();
  validate_problem(u, v);
  const std::size_t n = u.size();

  SolveResult result{SolveReport{}, SinkhornState::uniform(n),
                     KernelSpec::for_grid(u.grid, config.epsilon), u.grid};
  SolveReport& report = result.report;
  SinkhornState& state = result.state;
  report.diagnostics = result.kernel.diagnostics();

  KernelOperator op(method, u.grid, result.kernel);
  std::vector<double> kx(n);

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&start] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  double last_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t it = 0;
  while (it < config.itr_max) {
    op.apply(state.phi, state.beta, state.alpha, state.absorbed, kx);
    bool finite = divide_into(v.weights, kx, state.psi);
    op.apply(state.psi, state.alpha, state.beta, state.absorbed, kx);
    finite &= divide_into(u.weights, kx, state.phi);
    state.iteration = ++it;

    if (!finite) {
      report.aborted_nonfinite = true;
      break;
    }
    if (config.stabilized && std::max(max_abs(state.phi), max_abs(state.psi)) > config.tau) {
      report.stabilization_events.push_back(absorb(state, result.kernel));
    }
    if (it % config.check_interval == 0 || it == config.itr_max) {
      op.apply(state.phi, state.beta, state.alpha, state.absorbed, kx);
      last_error = l1_residual(state.psi, kx, v.weights);
      report.marginal_error_trace.push_back({it, last_error, elapsed()});
      if (!std::isfinite(last_error)) {
        report.aborted_nonfinite = true;
        break;
      }
      if (config.tol > 0.0 && last_error <= config.tol) {
        report.converged = true;
        break;
      }
    }
  }
  report.wall_time_seconds = elapsed();
  report.iterations = it;
  report.final_marginal_error = last_error;

  if (report.aborted_nonfinite) {
    report.cost = std::numeric_limits<double>::quiet_NaN();
  } else if (method == Method::fs1) {
    report.cost = transport_cost(state, result.kernel, u.grid);
  } else {
    report.cost = transport_cost_bruteforce(state, result.kernel, u.grid);
  }
  return result;
}

SolveResult solve(const DiscreteMeasure& u, const DiscreteMeasure& v, const SolverConfig& config) {
  return solve_with(Method::fs1, u, v, config);
}

SolveResult naive_solve(const DiscreteMeasure& u, const DiscreteMeasure& v,
                        const SolverConfig& config) {
  return solve_with(Method::naive, u, v, config);
}

double exact_w1_1d(std::span<const double> u, std::span<const double> v, double h) {
  if (u.size() != v.size()) throw Error(ErrorCode::LengthMismatch, "measures differ in length");
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  if (std::abs(mu - mv) > kMassTolerance) throw Error(ErrorCode::MassMismatch, "total masses differ");
  double running = 0.0, total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    running += u[i] - v[i];
    total += std::abs(running);
  }
  return h * total;
}

double exact_w1_1d(const DiscreteMeasure& u, const DiscreteMeasure& v) {
  const auto* g = std::get_if<Grid1D>(&u.grid);
  if (!g || !(u.grid == v.grid)) throw Error(ErrorCode::GridMismatch, "exact W1 needs one 1D grid");
  return exact_w1_1d(u.weights, v.weights, g->h);
}

}  // namespace fastsinkhorn
