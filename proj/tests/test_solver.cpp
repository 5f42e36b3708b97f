#include <doctest.h>

#include <cmath>
#include <random>

#include "fastsinkhorn/problems.hpp"
#include "fastsinkhorn/solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fastsinkhorn;

namespace {

DiscreteMeasure random_positive(std::mt19937_64& rng, const Grid& grid) {
  return validate_measure(oracle::random_simplex(rng, point_count(grid)), grid);
}

SinkhornState random_state(std::mt19937_64& rng, std::size_t n) {
  SinkhornState s = SinkhornState::uniform(n);
  s.phi = oracle::uniform_vector(rng, n, 0.2, 2.0);
  s.psi = oracle::uniform_vector(rng, n, 0.2, 2.0);
  return s;
}

// Smooth bump floored at delta and normalized.
std::vector<double> bump(std::size_t n, double h, double center, double width, double delta) {
  std::vector<double> w(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * h - center;
    w[i] = std::exp(-t * t / (2.0 * width * width)) + delta;
    s += w[i];
  }
  for (double& e : w) e /= s;
  return w;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("halfstep with the identity kernel") {
  const Grid g = Grid1D(3, 1.0);
  const auto u = validate_measure({0.2, 0.3, 0.5}, g);
  KernelSpec k;
  k.epsilon = 1e-3;
  k.lambda1 = 0.0;
  SinkhornState s = SinkhornState::uniform(3);
  s.phi = u.weights;
  s = sinkhorn_halfstep(Side::psi, s, u, k);
  for (double p : s.psi) CHECK(p == Rel{1.0, 1e-15});

  const Grid g1 = Grid1D(1, 1.0);
  const auto one = validate_measure({1.0}, g1);
  SinkhornState s1 = SinkhornState::uniform(1);
  s1.phi = {4.0};
  k.lambda1 = 0.3;
  s1 = sinkhorn_halfstep(Side::psi, s1, one, k);
  CHECK(s1.psi[0] == doctest::Approx(0.25));
}

TEST_CASE("halfstep matches the dense oracle") {
  std::mt19937_64 rng(300);
  const std::size_t n = 300;
  const Grid g = Grid1D(n, 0.01);
  const auto v = random_positive(rng, g);
  KernelSpec k;
  k.epsilon = 1.0;
  k.lambda1 = 0.8;
  SinkhornState s = random_state(rng, n);
  const auto out = sinkhorn_halfstep(Side::psi, s, v, k);
  const auto kphi = oracle::dense_apply_1d(s.phi, 0.8);
  std::vector<double> ref(n);
  for (std::size_t i = 0; i < n; ++i) ref[i] = v.weights[i] / kphi[i];
  CHECK(oracle::max_rel_diff(out.psi, ref) <= 1e-12);
  CHECK(out.phi == s.phi);
  const auto naive = sinkhorn_halfstep(Side::psi, s, v, k, Method::naive);
  CHECK(oracle::max_rel_diff(out.psi, naive.psi) <= 1e-12);
}

TEST_CASE("absorb") {
  const std::size_t n = 5;
  KernelSpec k;
  k.epsilon = 0.2;
  k.lambda1 = 0.6;
  SinkhornState s = SinkhornState::uniform(n);
  s.phi.assign(n, 1.0);
  s.psi.assign(n, 1.0);
  absorb(s, k);
  CHECK(s.alpha == std::vector<double>(n, 0.0));
  CHECK(s.beta == std::vector<double>(n, 0.0));

  s.phi[2] = 1e9;
  const auto ev = absorb(s, k);
  CHECK(ev.max_phi == 1e9);
  CHECK(*std::max_element(s.phi.begin(), s.phi.end()) == 1.0);
  CHECK(s.alpha[2] == doctest::Approx(0.2 * std::log(1e9)));
  CHECK(s.absorbed);
}

TEST_CASE("absorb leaves plan entries unchanged") {
  std::mt19937_64 rng(64);
  for (std::size_t n : {1u, 7u, 64u}) {
    SinkhornState s = random_state(rng, n);
    s.phi[0] = 1e6;
    KernelSpec k;
    k.epsilon = 0.05;
    k.lambda1 = 0.75;
    const Grid g = Grid1D(n, 1.0);
    const SinkhornState before = s;
    absorb(s, k);
    const TransportPlanView a(before, k, g), b(s, k, g);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(b.entry(i, j) == Rel{a.entry(i, j), 1e-12});
  }
}

TEST_CASE("marginal error") {
  const Grid g = Grid1D(2, 1.0);
  const auto v = validate_measure({0.5, 0.5}, g);
  KernelSpec k;
  k.epsilon = 1e-3;
  k.lambda1 = 0.0;
  SinkhornState s = SinkhornState::uniform(2);
  s.phi = {1.0, 1.0};
  s.psi = {1.0, 1.0};
  CHECK(marginal_error(s, v, k) == doctest::Approx(1.0));

  std::mt19937_64 rng(200);
  const std::size_t n = 200;
  const Grid gn = Grid1D(n, 1.0);
  const auto vn = random_positive(rng, gn);
  k.lambda1 = 0.85;
  SinkhornState r = random_state(rng, n);
  const auto kphi = oracle::dense_apply_1d(r.phi, 0.85);
  double ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) ref += std::abs(r.psi[i] * kphi[i] - vn.weights[i]);
  CHECK(marginal_error(r, vn, k) == Rel{ref, 1e-12});
  CHECK(marginal_error(r, vn, k, Method::naive) == Rel{ref, 1e-12});

  r = sinkhorn_halfstep(Side::psi, r, vn, k);
  CHECK(marginal_error(r, vn, k) <= 1e-12);
}

TEST_CASE("transport cost equals the literal double sum") {
  std::mt19937_64 rng(128);
  const std::size_t n = 128;
  const double h = 0.05, eps = 0.1;
  const Grid g = Grid1D(n, h);
  const auto k = KernelSpec::for_grid(g, eps);
  for (bool logs : {false, true}) {
    SinkhornState s = random_state(rng, n);
    if (logs) {
      s.alpha = oracle::uniform_vector(rng, n, -0.3, 0.3);
      s.beta = oracle::uniform_vector(rng, n, -0.3, 0.3);
      s.absorbed = true;
    }
    const oracle::Plan1D ref{s.phi, s.psi, s.alpha, s.beta, k.lambda1, eps};
    const double brute = oracle::bruteforce_cost_1d(ref, h);
    CHECK(transport_cost_1d(s, k, std::get<Grid1D>(g)) == Rel{brute, 1e-12});
    CHECK(transport_cost_bruteforce(s, k, g) == Rel{brute, 1e-12});
  }
  SinkhornState s = random_state(rng, 1);
  CHECK(transport_cost_1d(s, KernelSpec::for_grid(Grid1D(1, 1.0), 1.0), Grid1D(1, 1.0)) == 0.0);
}

TEST_CASE("transport cost in 2D") {
  std::mt19937_64 rng(65);
  const std::size_t n = 6, m = 5;
  const double h1 = 0.2, h2 = 0.3, eps = 0.25;
  const Grid2D g(n, m, h1, h2);
  const auto k = KernelSpec::for_grid(g, eps);
  SinkhornState s = random_state(rng, n * m);
  s.alpha = oracle::uniform_vector(rng, n * m, -0.1, 0.1);
  s.beta = oracle::uniform_vector(rng, n * m, -0.1, 0.1);
  s.absorbed = true;
  double brute = 0.0;
  for (std::size_t a = 0; a < n * m; ++a)
    for (std::size_t b = 0; b < n * m; ++b) {
      const std::size_t di = oracle::dist(a % n, b % n), dj = oracle::dist(a / n, b / n);
      const double kern = oracle::kernel_power(k.lambda1, di) * oracle::kernel_power(*k.lambda2, dj);
      const double c = static_cast<double>(di) * h1 + static_cast<double>(dj) * h2;
      brute += std::exp((s.alpha[a] + s.beta[b]) / eps) * s.phi[a] * kern * s.psi[b] * c;
    }
  CHECK(transport_cost_2d(s, k, g) == Rel{brute, 1e-12});

  // One row: the 2D cost reduces to the 1D cost along the columns.
  SinkhornState r = random_state(rng, 9);
  const Grid2D row(1, 9, 0.7, 0.4);
  const auto kr = KernelSpec::for_grid(row, 0.5);
  KernelSpec k1;
  k1.epsilon = 0.5;
  k1.lambda1 = *kr.lambda2;
  CHECK(transport_cost_2d(r, kr, row) == Rel{transport_cost_1d(r, k1, Grid1D(9, 0.4)), 1e-14});
}

TEST_CASE("identity kernel converges in one iteration") {
  const Grid g = Grid1D(4, 1.0);
  const auto u = validate_measure({0.25, 0.25, 0.25, 0.25}, g);
  SolverConfig c;
  c.epsilon = 1e-3;
  for (Method method : {Method::fs1, Method::naive}) {
    const auto r = solve_with(method, u, u, c);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 1);
    CHECK(r.report.final_marginal_error == 0.0);
    CHECK(r.report.cost == 0.0);
  }
}

TEST_CASE("fast and naive trajectories agree") {
  std::mt19937_64 rng(256);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 8 + rng() % 249;
    const Grid g = Grid1D(n, 1.0 / static_cast<double>(n));
    const auto u = random_positive(rng, g), v = random_positive(rng, g);
    SolverConfig c;
    c.epsilon = std::uniform_real_distribution<double>(0.002, 0.05)(rng);
    c.tol = 0.0;
    c.itr_max = 1 + rng() % 200;
    const auto a = solve(u, v, c);
    const auto b = naive_solve(u, v, c);
    CHECK(a.report.iterations == b.report.iterations);
    CHECK(oracle::max_rel_diff(a.state.phi, b.state.phi) <= 1e-11);
    CHECK(oracle::max_rel_diff(a.state.psi, b.state.psi) <= 1e-11);
  }
}

TEST_CASE("naive solve matches on 64 points after 50 iterations") {
  std::mt19937_64 rng(50);
  const Grid g = Grid1D(64, 0.1);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  SolverConfig c;
  c.epsilon = 0.05;
  c.tol = 0.0;
  c.itr_max = 50;
  for (bool stab : {false, true}) {
    c.stabilized = stab;
    c.tau = 2.0;
    const auto a = solve(u, v, c), b = naive_solve(u, v, c);
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(a.state.phi[i] == Rel{b.state.phi[i], 1e-12});
      CHECK(a.state.psi[i] == Rel{b.state.psi[i], 1e-12});
    }
    CHECK(plan_frobenius_distance(a.plan(), b.plan()) <= 1e-12);
  }
}

TEST_CASE("2D solve agrees with the dense kernel solve") {
  std::mt19937_64 rng(10);
  const Grid g = Grid2D(6, 7, 1.0, 0.5);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  SolverConfig c;
  c.epsilon = 0.5;
  c.tol = 0.0;
  c.itr_max = 100;
  const auto a = solve(u, v, c), b = naive_solve(u, v, c);
  CHECK(plan_frobenius_distance(a.plan(), b.plan()) <= 1e-12);
  CHECK(a.report.cost == Rel{transport_cost_bruteforce(a.state, a.kernel, a.grid), 1e-12});
}

TEST_CASE("absorption at random iterations is transparent") {
  std::mt19937_64 rng(64);
  const Grid g = Grid1D(64, 0.02);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  const auto k = KernelSpec::for_grid(g, 0.01);
  SinkhornState plain = SinkhornState::uniform(64), mixed = plain;
  for (int it = 0; it < 50; ++it) {
    plain = sinkhorn_halfstep(Side::psi, plain, v, k);
    plain = sinkhorn_halfstep(Side::phi, plain, u, k);
    mixed = sinkhorn_halfstep(Side::psi, mixed, v, k);
    if (rng() % 3 == 0) absorb(mixed, k);
    mixed = sinkhorn_halfstep(Side::phi, mixed, u, k);
    if (rng() % 3 == 0) absorb(mixed, k);
  }
  const TransportPlanView a(plain, k, g), b(mixed, k, g);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j)
      CHECK(b.entry(i, j) == Rel{a.entry(i, j), 1e-10});
  CHECK(transport_cost(mixed, k, g) == Rel{transport_cost(plain, k, g), 1e-10});
}

TEST_CASE("one iteration is invariant under scaling phi") {
  std::mt19937_64 rng(1);
  const Grid g = Grid1D(40, 0.05);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  const auto k = KernelSpec::for_grid(g, 0.02);
  SinkhornState s = random_state(rng, 40), t = s;
  for (double& p : t.phi) p *= 37.5;
  s = sinkhorn_halfstep(Side::phi, sinkhorn_halfstep(Side::psi, s, v, k), u, k);
  t = sinkhorn_halfstep(Side::phi, sinkhorn_halfstep(Side::psi, t, v, k), u, k);
  const TransportPlanView a(s, k, g), b(t, k, g);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      CHECK(b.entry(i, j) == Rel{a.entry(i, j), 1e-12});
}

TEST_CASE("convergence implies both marginals within tolerance") {
  std::mt19937_64 rng(77);
  const Grid g = Grid1D(100, 0.01);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  SolverConfig c;
  c.epsilon = 0.01;
  c.tol = 1e-9;
  const auto r = solve(u, v, c);
  REQUIRE(r.report.converged);
  CHECK(r.report.final_marginal_error <= 1e-9);
  CHECK(marginal_error(r.state, v, r.kernel) <= 1e-9);
  CHECK(source_marginal_error(r.state, u, r.kernel) <= 1e-9);
  CHECK(r.report.marginal_error_trace.size() == r.report.iterations);
  for (const auto& p : r.report.marginal_error_trace) CHECK(std::isfinite(p.error));
}

TEST_CASE("check interval controls the trace") {
  std::mt19937_64 rng(78);
  const Grid g = Grid1D(30, 0.1);
  const auto u = random_positive(rng, g), v = random_positive(rng, g);
  SolverConfig c;
  c.epsilon = 0.1;
  c.tol = 0.0;
  c.itr_max = 25;
  c.check_interval = 10;
  const auto r = solve(u, v, c);
  REQUIRE(r.report.marginal_error_trace.size() == 3);
  CHECK(r.report.marginal_error_trace[0].iteration == 10);
  CHECK(r.report.marginal_error_trace[2].iteration == 25);
  CHECK_FALSE(r.report.converged);
}

TEST_CASE("cost approaches the exact distance as epsilon shrinks") {
  const std::size_t n = 400;
  const double h = 0.01;
  const Grid g = Grid1D(n, h);
  const auto u = validate_measure(bump(n, h, 0.9, 0.1, 1e-7), g);
  const auto v = validate_measure(bump(n, h, 2.9, 0.1, 1e-7), g);
  const double exact = exact_w1_1d(u, v);
  double previous = INFINITY;
  for (double eps : {0.1, 0.01, 0.001}) {
    SolverConfig c;
    c.epsilon = eps;
    c.tol = 1e-9;
    c.itr_max = 200000;
    c.stabilized = true;
    const auto r = solve(u, v, c);
    CHECK(r.report.converged);
    CHECK(std::abs(r.report.cost - exact) < std::abs(previous - exact));
    previous = r.report.cost;
  }
  CHECK(std::abs(previous - exact) <= 0.02 * exact);
}

TEST_CASE("input validation") {
  const Grid g = Grid1D(2, 1.0);
  const auto u = validate_measure({0.5, 0.5}, g);
  const auto zero = validate_measure({1.0, 0.0}, g);
  const auto other = validate_measure({0.5, 0.5}, Grid1D(2, 2.0));
  SolverConfig c;
  CHECK_ERROR_CODE(solve(u, zero, c), ErrorCode::NonPositiveInput);
  CHECK_ERROR_CODE(solve(u, other, c), ErrorCode::GridMismatch);
  c.epsilon = -1.0;
  CHECK_ERROR_CODE(solve(u, u, c), ErrorCode::NonPositiveEpsilon);
  const Grid big = Grid1D(kNaiveMaxN1D + 1, 1.0);
  const auto wide = validate_measure(std::vector<double>(kNaiveMaxN1D + 1, 1.0 / (kNaiveMaxN1D + 1)), big);
  CHECK_ERROR_CODE(naive_solve(wide, wide, SolverConfig{}), ErrorCode::TooLarge);
}

TEST_CASE("overflow is reported as abnormal termination") {
  const std::size_t n = 200;
  const double h = 0.01;
  const Grid g = Grid1D(n, h);
  const auto u = validate_measure(bump(n, h, 0.3, 0.05, 1e-12), g);
  const auto v = validate_measure(bump(n, h, 1.7, 0.05, 1e-12), g);
  SolverConfig c;
  c.epsilon = 5e-4;
  c.tol = 0.0;
  c.itr_max = 2000;
  const auto r = solve(u, v, c);
  CHECK(r.report.aborted_nonfinite);
  CHECK(r.report.iterations < 2000);
  CHECK(std::isnan(r.report.cost));
  c.stabilized = true;
  const auto s = solve(u, v, c);
  CHECK_FALSE(s.report.aborted_nonfinite);
  CHECK(s.state.finite());
  CHECK_FALSE(s.report.stabilization_events.empty());
}

TEST_CASE("exact W1 in closed form") {
  CHECK(exact_w1_1d(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}, 1.0) == 0.0);
  CHECK(exact_w1_1d(std::vector<double>{1, 0, 0}, std::vector<double>{0, 0, 1}, 0.5) == 1.0);
  CHECK_ERROR_CODE(exact_w1_1d(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.4}, 1.0),
                   ErrorCode::MassMismatch);
  CHECK_ERROR_CODE(exact_w1_1d(std::vector<double>{1}, std::vector<double>{0.5, 0.5}, 1.0),
                   ErrorCode::LengthMismatch);
}

TEST_CASE("exact W1 against min-cost flow") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = trial < 20 ? 1 + rng() % 8 : 40;
    const double h = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const auto u = oracle::random_simplex(rng, n), v = oracle::random_simplex(rng, n);
    CHECK(exact_w1_1d(u, v, h) == Rel{oracle::w1_by_flow(u, v, h), 1e-9});
  }
}

}  // TEST_SUITE
