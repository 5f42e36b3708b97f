#pragma once

#include <cstddef>
#include <span>

#include "fastsinkhorn/kernel_ops.hpp"
#include "fastsinkhorn/types.hpp"

namespace fastsinkhorn {

enum class Side { psi, phi };

/// How kernel products are evaluated inside the Sinkhorn loop.
enum class Method { fs1, naive };

std::string_view to_string(Method method) noexcept;

struct SolveResult {
  SolveReport report;
  SinkhornState state;
  KernelSpec kernel;
  Grid grid;

  TransportPlanView plan() const { return TransportPlanView(state, kernel, grid); }
};

/// Replaces one scaling: psi <- v / (K~^T phi) or phi <- u / (K~ psi), where
/// K~ is the kernel rescaled by the absorbed potentials. The other side is
/// left untouched. Throws NonFiniteResult if a quotient is not finite.
SinkhornState sinkhorn_halfstep(Side side, SinkhornState state, const DiscreteMeasure& target,
                                const KernelSpec& kernel, Method method = Method::fs1);

/// Moves phi and psi into the log potentials (alpha += eps ln phi,
/// beta += eps ln psi) and resets both scalings to one. Every plan entry is
/// preserved up to rounding.
StabilizationEvent absorb(SinkhornState& state, const KernelSpec& kernel);

/// || psi * (K~^T phi) - v ||_1. Returns +inf if any intermediate is not finite.
double marginal_error(const SinkhornState& state, const DiscreteMeasure& v,
                      const KernelSpec& kernel, Method method = Method::fs1);

/// || phi * (K~ psi) - u ||_1, the other marginal.
double source_marginal_error(const SinkhornState& state, const DiscreteMeasure& u,
                             const KernelSpec& kernel, Method method = Method::fs1);

/// sum_ij gamma_ij |i-j| h in O(N).
double transport_cost_1d(const SinkhornState& state, const KernelSpec& kernel, const Grid1D& grid);
/// sum gamma (|i1-i2| h1 + |j1-j2| h2) in O(NM).
double transport_cost_2d(const SinkhornState& state, const KernelSpec& kernel, const Grid2D& grid);
double transport_cost(const SinkhornState& state, const KernelSpec& kernel, const Grid& grid);

/// Literal double (quadruple in 2D) sum over plan entries. O(N^2).
double transport_cost_bruteforce(const SinkhornState& state, const KernelSpec& kernel,
                                 const Grid& grid);

/// Linear-time Sinkhorn iteration on a 1D or 2D grid.
SolveResult solve(const DiscreteMeasure& u, const DiscreteMeasure& v, const SolverConfig& config);

/// Same iteration with dense kernel products; an oracle and benchmark foil.
SolveResult naive_solve(const DiscreteMeasure& u, const DiscreteMeasure& v,
                        const SolverConfig& config);

SolveResult solve_with(Method method, const DiscreteMeasure& u, const DiscreteMeasure& v,
                       const SolverConfig& config);

/// Unregularized 1D Wasserstein-1 distance: h * sum_k |sum_{i<=k} (u_i - v_i)|.
double exact_w1_1d(std::span<const double> u, std::span<const double> v, double h);
double exact_w1_1d(const DiscreteMeasure& u, const DiscreteMeasure& v);

}  // namespace fastsinkhorn
