#pragma once

// Kernel-vector products for the Wasserstein-1 Gibbs kernel
// K_ij = lambda^|i-j| (1D) and its Kronecker-structured 2D counterpart.
//
// The fast routines evaluate K x with one forward and one backward
// Horner-style sweep (O(N) per axis). The naive routines sum the dense
// product term by term and exist as oracles and benchmark foils.

#include <cstddef>
#include <span>
#include <vector>

#include "fastsinkhorn/types.hpp"

namespace fastsinkhorn {

inline constexpr std::size_t kNaiveMaxN1D = 16384;
inline constexpr std::size_t kNaiveMaxEntries2D = 65536;

/// Reusable scratch for the sweeps. Sized on demand, never shrunk.
struct RecursionBuffers {
  std::vector<double> p;  // forward partial sums (lower triangle incl. diagonal)
  std::vector<double> q;  // backward partial sums (strict upper triangle)
  std::vector<double> r;  // 2D: per-column applies along the first axis
  std::vector<double> s;  // 2D: running second-axis sweep column
  std::vector<double> w;  // 2D distance-weighted products: second intermediate array

  void ensure(std::size_t axis_len, std::size_t total);
};

/// exp(-h / epsilon). May underflow to exactly 0 for h/epsilon beyond ~745.
double lambda_from(double h, double epsilon);

namespace detail {

/// The two sweeps behind fast_apply_1d, templated on the scalar so an
/// instrumented number type can count the arithmetic:
///   p_0 = x_0,      p_{k+1} = lambda p_k + x_{k+1}
///   q_{N-1} = 0,    q_k = lambda (q_{k+1} + x_{k+1})
///   out_k = p_k + q_k
template <class T>
void sweep_apply(std::span<const T> x, const T& lambda, std::span<T> p, std::span<T> q,
                 std::span<T> out) {
  const std::size_t n = x.size();
  if (n == 0) return;
  p[0] = x[0];
  for (std::size_t k = 0; k + 1 < n; ++k) p[k + 1] = lambda * p[k] + x[k + 1];
  q[n - 1] = T(0);
  for (std::size_t k = n - 1; k-- > 0;) q[k] = lambda * (q[k + 1] + x[k + 1]);
  for (std::size_t k = 0; k < n; ++k) out[k] = p[k] + q[k];
}

// Unchecked kernels used by the solver hot loop. `out` must not alias `x`.
void apply_1d(std::span<const double> x, double lambda, RecursionBuffers& buf,
              std::span<double> out);
void weighted_apply_1d(std::span<const double> x, double lambda, double h,
                       RecursionBuffers& buf, std::span<double> out);
void apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
              double lambda2, RecursionBuffers& buf, std::span<double> out);
void weighted_apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
                       double lambda2, double h1, double h2, RecursionBuffers& buf,
                       std::span<double> out);

// Rescaled kernel diag(e^{out_log/eps}) K diag(e^{in_log/eps}) applied with
// neighbouring-difference exponentials only.
void stabilized_apply_1d(std::span<const double> x, std::span<const double> out_log,
                         std::span<const double> in_log, double lambda, double epsilon,
                         RecursionBuffers& buf, std::span<double> out);
void stabilized_weighted_apply_1d(std::span<const double> x, std::span<const double> out_log,
                                  std::span<const double> in_log, double lambda, double h,
                                  double epsilon, RecursionBuffers& buf, std::span<double> out);
void stabilized_apply_2d(std::span<const double> x, std::span<const double> out_log,
                         std::span<const double> in_log, std::size_t n, std::size_t m,
                         double lambda1, double lambda2, double epsilon, RecursionBuffers& buf,
                         std::span<double> out);
void stabilized_weighted_apply_2d(std::span<const double> x, std::span<const double> out_log,
                                  std::span<const double> in_log, std::size_t n, std::size_t m,
                                  double lambda1, double lambda2, double h1, double h2,
                                  double epsilon, RecursionBuffers& buf, std::span<double> out);

void naive_apply_1d(std::span<const double> x, double lambda, std::span<double> out);
void naive_apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
                    double lambda2, std::span<double> out);
void naive_stabilized_apply_1d(std::span<const double> x, std::span<const double> out_log,
                               std::span<const double> in_log, double lambda, double epsilon,
                               std::span<double> out);
void naive_stabilized_apply_2d(std::span<const double> x, std::span<const double> out_log,
                               std::span<const double> in_log, std::size_t n, std::size_t m,
                               double lambda1, double lambda2, double epsilon,
                               std::span<double> out);

}  // namespace detail

/// y_k = sum_j lambda^|k-j| x_j in one forward and one backward sweep.
std::vector<double> fast_apply_1d(std::span<const double> x, double lambda);
void fast_apply_1d(std::span<const double> x, double lambda, RecursionBuffers& buffers,
                   std::span<double> out);

/// Same product by the direct double loop. Powers of lambda are built by
/// repeated multiplication. Throws TooLarge above `max_n`.
std::vector<double> naive_apply_1d(std::span<const double> x, double lambda,
                                   std::size_t max_n = kNaiveMaxN1D);

/// t_k = sum_j |k-j| h lambda^|k-j| x_j, the distance-weighted product used
/// for the transport cost.
std::vector<double> fast_weighted_apply_1d(std::span<const double> x, double lambda, double h);

/// Block-kernel product: first-axis sweeps on every column with lambda1, then
/// the column-level sweep with lambda2.
Array2D fast_apply_2d(const Array2D& x, double lambda1, double lambda2);
Array2D naive_apply_2d(const Array2D& x, double lambda1, double lambda2,
                       std::size_t max_entries = kNaiveMaxEntries2D);

/// T_kl = sum_ij lambda1^|k-i| lambda2^|l-j| (|k-i| h1 + |l-j| h2) X_ij.
Array2D weighted_apply_2d(const Array2D& x, double lambda1, double lambda2, double h1, double h2);

/// y_k = e^{out_log_k/eps} sum_j lambda^|k-j| e^{in_log_j/eps} x_j.
/// With the Sinkhorn potentials: the phi-side update uses (out, in) = (alpha,
/// beta) and the psi-side update (beta, alpha).
std::vector<double> stabilized_fast_apply_1d(std::span<const double> x,
                                             std::span<const double> out_log,
                                             std::span<const double> in_log, double lambda,
                                             double epsilon);
Array2D stabilized_fast_apply_2d(const Array2D& x, std::span<const double> out_log,
                                 std::span<const double> in_log, double lambda1, double lambda2,
                                 double epsilon);
std::vector<double> stabilized_weighted_apply_1d(std::span<const double> x,
                                                 std::span<const double> out_log,
                                                 std::span<const double> in_log, double lambda,
                                                 double h, double epsilon);
Array2D stabilized_weighted_apply_2d(const Array2D& x, std::span<const double> out_log,
                                     std::span<const double> in_log, double lambda1,
                                     double lambda2, double h1, double h2, double epsilon);

}  // namespace fastsinkhorn
