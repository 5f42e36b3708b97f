#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fastsinkhorn/error.hpp"

namespace fastsinkhorn {

/// Uniform 1D grid of `n` points with spacing `h`.
struct Grid1D {
  std::size_t n = 1;
  double h = 1.0;

  Grid1D() = default;
  Grid1D(std::size_t n_, double h_);

  std::size_t size() const noexcept { return n; }
  bool operator==(const Grid1D&) const = default;
};

/// Uniform N x M grid. `n` counts rows (vertical axis, spacing h1), `m` counts
/// columns (horizontal axis, spacing h2). Values are flattened column-major:
/// (i, j) -> j * n + i.
struct Grid2D {
  std::size_t n = 1;
  std::size_t m = 1;
  double h1 = 1.0;
  double h2 = 1.0;

  Grid2D() = default;
  Grid2D(std::size_t n_, std::size_t m_, double h1_, double h2_);

  std::size_t size() const noexcept { return n * m; }
  std::size_t flatten(std::size_t i, std::size_t j) const noexcept { return j * n + i; }
  bool operator==(const Grid2D&) const = default;
};

using Grid = std::variant<Grid1D, Grid2D>;

std::size_t point_count(const Grid& grid) noexcept;
bool is_2d(const Grid& grid) noexcept;

/// Dense column-major N x M array of doubles.
class Array2D {
 public:
  Array2D() = default;
  Array2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Array2D(std::size_t rows, std::size_t cols, std::vector<double> column_major);

  /// Builds from row-major nested rows (the natural reading order of files).
  static Array2D from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  std::span<const double> column(std::size_t j) const noexcept {
    return std::span<const double>(data_).subspan(j * rows_, rows_);
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double> release() && { return std::move(data_); }

  bool operator==(const Array2D&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kMassTolerance = 1e-9;

/// Nonnegative weights of total mass one attached to a grid.
struct DiscreteMeasure {
  std::vector<double> weights;
  Grid grid;

  std::size_t size() const noexcept { return weights.size(); }
  bool strictly_positive() const noexcept;
};

/// Checks sign, length and total mass. Never renormalizes.
DiscreteMeasure validate_measure(std::vector<double> weights, const Grid& grid);

/// Regularization strength and the per-axis decay factors exp(-h/eps).
struct KernelSpec {
  double epsilon = 1.0;
  double lambda1 = 0.0;
  std::optional<double> lambda2;

  static KernelSpec for_grid(const Grid& grid, double epsilon);

  /// A factor of exactly 1 (h == 0 or eps huge) reduces the kernel to all-ones.
  bool has_unit_lambda() const noexcept;
  /// exp(-h/eps) rounded to zero: the kernel is numerically the identity.
  bool has_underflowed_lambda() const noexcept;
  std::vector<std::string> diagnostics() const;
};

/// Scalings phi, psi and the absorbed log potentials alpha, beta.
/// Plan entries are exp((alpha_i + beta_j)/eps) * phi_i * K_ij * psi_j.
struct SinkhornState {
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::size_t iteration = 0;
  /// True once any absorption has moved mass into alpha/beta.
  bool absorbed = false;

  static SinkhornState uniform(std::size_t size);
  std::size_t size() const noexcept { return phi.size(); }
  bool finite() const noexcept;
};

struct SolverConfig {
  double epsilon = 0.01;
  /// Stop once the v-side marginal error falls to this level. Zero disables
  /// early exit so a run always spends exactly itr_max iterations.
  double tol = 1e-9;
  std::size_t itr_max = 10000;
  bool stabilized = false;
  double tau = 1e10;
  std::size_t check_interval = 1;

  void validate() const;
};

struct TracePoint {
  std::size_t iteration = 0;
  double error = 0.0;
  double elapsed_seconds = 0.0;
};

struct StabilizationEvent {
  std::size_t iteration = 0;
  double max_phi = 0.0;
  double max_psi = 0.0;
};

struct SolveReport {
  double cost = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<TracePoint> marginal_error_trace;
  double final_marginal_error = 0.0;
  double wall_time_seconds = 0.0;
  bool aborted_nonfinite = false;
  std::vector<StabilizationEvent> stabilization_events;
  std::vector<std::string> diagnostics;
};

/// Lazy view of the transport plan. Holds references; the referenced
/// objects must outlive the view. Indices are flat (column-major in 2D).
class TransportPlanView {
 public:
  TransportPlanView(const SinkhornState& state, const KernelSpec& kernel, const Grid& grid);

  std::size_t size() const noexcept { return size_; }
  double entry(std::size_t i, std::size_t j) const;

 private:
  double kernel_entry(std::size_t i, std::size_t j) const noexcept;
  double log_kernel_entry(std::size_t i, std::size_t j) const noexcept;

  const SinkhornState& state_;
  const KernelSpec& kernel_;
  const Grid& grid_;
  std::size_t size_;
  std::size_t rows_;
  // lambda^d by stepwise multiplication, per axis.
  std::vector<double> powers1_;
  std::vector<double> powers2_;
};

double plan_entry(const TransportPlanView& view, std::size_t i, std::size_t j);

inline constexpr std::size_t kDefaultPlanMaxEntries = std::size_t{1} << 24;

Array2D plan_materialize(const TransportPlanView& view,
                         std::size_t max_size = kDefaultPlanMaxEntries);

/// Frobenius norm of the difference of two plans over the same grid,
/// streamed entry by entry so no plan is materialized.
double plan_frobenius_distance(const TransportPlanView& a, const TransportPlanView& b);

/// lambda^0 .. lambda^(count-1) by repeated multiplication.
std::vector<double> stepwise_powers(double lambda, std::size_t count);

}  // namespace fastsinkhorn
