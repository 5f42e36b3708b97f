#include <doctest.h>

#include <cmath>
#include <random>

#include "fastsinkhorn/types.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fastsinkhorn;

TEST_SUITE("types") {

TEST_CASE("grids reject empty axes and non-positive spacing") {
  CHECK_ERROR_CODE(Grid1D(0, 1.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(Grid1D(3, 0.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(Grid1D(3, -1.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(Grid2D(0, 2, 1.0, 1.0), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(Grid2D(2, 2, 1.0, std::nan("")), ErrorCode::InvalidArgument);
  CHECK(point_count(Grid2D(3, 4, 1.0, 1.0)) == 12);
  CHECK(is_2d(Grid2D(3, 4, 1.0, 1.0)));
  CHECK_FALSE(is_2d(Grid1D(3, 1.0)));
}

TEST_CASE("column-major flattening round-trips") {
  std::mt19937_64 rng(11);
  for (std::size_t rows : {1u, 2u, 5u}) {
    for (std::size_t cols : {1u, 3u, 4u}) {
      std::vector<std::vector<double>> nested(rows, std::vector<double>(cols));
      for (auto& r : nested)
        for (double& e : r) e = std::uniform_real_distribution<double>(-1, 1)(rng);
      const Array2D a = Array2D::from_rows(nested);
      const Grid2D g(rows, cols, 1.0, 1.0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          CHECK(a.flat()[g.flatten(i, j)] == nested[i][j]);
          CHECK(a(i, j) == nested[i][j]);
        }
      const Array2D b(rows, cols, a.data());
      CHECK(a == b);
    }
  }
  CHECK_ERROR_CODE(Array2D::from_rows({{1.0, 2.0}, {3.0}}), ErrorCode::LengthMismatch);
}

TEST_CASE("validate_measure") {
  const auto m = validate_measure({0.5, 0.5}, Grid1D(2, 1.0));
  CHECK(m.size() == 2);
  CHECK(m.strictly_positive());
  CHECK_ERROR_CODE(validate_measure({0.5, 0.4}, Grid1D(2, 1.0)), ErrorCode::MassNotOne);
  CHECK_ERROR_CODE(validate_measure({1.1, -0.1}, Grid1D(2, 1.0)), ErrorCode::NegativeWeight);
  CHECK_ERROR_CODE(validate_measure({1.0}, Grid1D(2, 1.0)), ErrorCode::LengthMismatch);
  CHECK_ERROR_CODE(validate_measure({0.5, std::nan("")}, Grid1D(2, 1.0)), ErrorCode::NonFiniteInput);
  // Within the 1e-9 mass tolerance, and not renormalized.
  const auto near = validate_measure({0.5, 0.5 + 5e-10}, Grid1D(2, 1.0));
  CHECK(near.weights[1] == 0.5 + 5e-10);
  CHECK_FALSE(validate_measure({1.0, 0.0}, Grid1D(2, 1.0)).strictly_positive());
}

TEST_CASE("kernel spec from grids") {
  const auto k1 = KernelSpec::for_grid(Grid1D(4, 0.5), 0.25);
  CHECK(k1.lambda1 == Rel{std::exp(-2.0), 1e-15});
  CHECK_FALSE(k1.lambda2.has_value());
  const auto k2 = KernelSpec::for_grid(Grid2D(2, 3, 1.0, 2.0), 1.0);
  REQUIRE(k2.lambda2.has_value());
  CHECK(*k2.lambda2 == Rel{std::exp(-2.0), 1e-15});
  CHECK_ERROR_CODE(KernelSpec::for_grid(Grid1D(4, 1.0), 0.0), ErrorCode::NonPositiveEpsilon);
  const auto tiny = KernelSpec::for_grid(Grid1D(4, 1.0), 1e-3);
  CHECK(tiny.lambda1 == 0.0);
  CHECK(tiny.has_underflowed_lambda());
  CHECK_FALSE(tiny.diagnostics().empty());
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.tol = 0.0;
  CHECK_NOTHROW(c.validate());
  c.tol = -1.0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.tau = 1.0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.itr_max = 0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.check_interval = 0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.epsilon = 0.0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::NonPositiveEpsilon);
}

TEST_CASE("plan entries with unit scalings are kernel powers") {
  SinkhornState s = SinkhornState::uniform(4);
  s.phi.assign(4, 1.0);
  s.psi.assign(4, 1.0);
  KernelSpec k;
  k.epsilon = 1.0;
  k.lambda1 = 0.5;
  const Grid g = Grid1D(4, 1.0);
  const TransportPlanView view(s, k, g);
  CHECK(plan_entry(view, 2, 2) == 1.0);
  CHECK(plan_entry(view, 0, 2) == 0.25);
  CHECK(plan_entry(view, 3, 1) == 0.25);
  CHECK_ERROR_CODE(plan_entry(view, 4, 0), ErrorCode::IndexOutOfRange);
}

TEST_CASE("plan entries match the materialized scaled kernel") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6;
    SinkhornState s = SinkhornState::uniform(n);
    s.phi = oracle::uniform_vector(rng, n, 0.1, 3.0);
    s.psi = oracle::uniform_vector(rng, n, 0.1, 3.0);
    const bool logs = trial % 2 == 1;
    if (logs) {
      s.alpha = oracle::uniform_vector(rng, n, -0.2, 0.2);
      s.beta = oracle::uniform_vector(rng, n, -0.2, 0.2);
      s.absorbed = true;
    }
    KernelSpec k;
    k.epsilon = 0.3;
    k.lambda1 = 0.7;
    const Grid g = Grid1D(n, 0.3 * -std::log(0.7));
    const oracle::Plan1D ref{s.phi, s.psi, s.alpha, s.beta, 0.7, 0.3};
    const TransportPlanView view(s, k, g);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(plan_entry(view, i, j) == Rel{ref.entry(i, j), 1e-13});
  }
}

TEST_CASE("plan symmetry for equal scalings and zero logs") {
  std::mt19937_64 rng(17);
  const std::size_t n = 64;
  SinkhornState s = SinkhornState::uniform(n);
  s.phi = oracle::uniform_vector(rng, n, 0.1, 2.0);
  s.psi = s.phi;
  KernelSpec k;
  k.epsilon = 0.1;
  k.lambda1 = 0.9;
  const Grid g = Grid1D(n, 0.1 * -std::log(0.9));
  const TransportPlanView view(s, k, g);
  const oracle::Plan1D ref{s.phi, s.psi, s.alpha, s.beta, 0.9, 0.1};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(view.entry(i, j) == Rel{view.entry(j, i), 1e-15});
      CHECK(view.entry(i, j) == Rel{ref.entry(i, j), 1e-12});
      CHECK(view.entry(i, j) >= 0.0);
    }
}

TEST_CASE("2D plan entries factor over the two axes") {
  SinkhornState s = SinkhornState::uniform(6);
  s.phi = {1, 2, 3, 4, 5, 6};
  s.psi = {6, 5, 4, 3, 2, 1};
  KernelSpec k;
  k.epsilon = 1.0;
  k.lambda1 = 0.5;
  k.lambda2 = 0.25;
  const Grid g = Grid2D(2, 3, 1.0, 1.0);
  const TransportPlanView view(s, k, g);
  // (0,0) -> flat 0; (1,2) -> flat 5: one row step, two column steps.
  CHECK(view.entry(0, 5) == doctest::Approx(1.0 * 0.5 * 0.0625 * 1.0));
  CHECK(view.entry(3, 2) == doctest::Approx(4.0 * 0.5 * 1.0 * 4.0));
}

TEST_CASE("materialize") {
  SinkhornState one = SinkhornState::uniform(1);
  one.phi = {1.0};
  one.psi = {1.0};
  KernelSpec k;
  k.lambda1 = 0.3;
  const Grid g1 = Grid1D(1, 1.0);
  const Array2D m1 = plan_materialize(TransportPlanView(one, k, g1));
  CHECK(m1.rows() == 1);
  CHECK(m1(0, 0) == 1.0);

  SinkhornState s = SinkhornState::uniform(3);
  s.phi = {0.2, 1.5, 0.7};
  s.psi = {2.0, 0.1, 0.9};
  const Grid g3 = Grid1D(3, 1.0);
  const TransportPlanView view(s, k, g3);
  const Array2D m3 = plan_materialize(view);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(m3(i, j) == plan_entry(view, i, j));
  CHECK_ERROR_CODE(plan_materialize(view, 8), ErrorCode::TooLarge);
  CHECK(plan_frobenius_distance(view, view) == 0.0);
}

TEST_CASE("stepwise powers") {
  const auto p = stepwise_powers(0.5, 4);
  CHECK(p == std::vector<double>{1.0, 0.5, 0.25, 0.125});
  CHECK(stepwise_powers(0.0, 3) == std::vector<double>{1.0, 0.0, 0.0});
}

}  // TEST_SUITE
