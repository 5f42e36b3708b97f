#include "fastsinkhorn/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fastsinkhorn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::MassNotOne: return "MassNotOne";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteResult: return "NonFiniteResult";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::MassMismatch: return "MassMismatch";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Grid1D::Grid1D(std::size_t n_, double h_) : n(n_), h(h_) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point");
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive and finite");
  }
}

Grid2D::Grid2D(std::size_t n_, std::size_t m_, double h1_, double h2_)
    : n(n_), m(m_), h1(h1_), h2(h2_) {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point per axis");
  if (!(h1 > 0.0) || !(h2 > 0.0) || !std::isfinite(h1) || !std::isfinite(h2)) {
    throw Error(ErrorCode::InvalidArgument, "grid spacings must be positive and finite");
  }
}

std::size_t point_count(const Grid& grid) noexcept {
  return std::visit([](const auto& g) { return g.size(); }, grid);
}

bool is_2d(const Grid& grid) noexcept { return std::holds_alternative<Grid2D>(grid); }

Array2D::Array2D(std::size_t rows, std::size_t cols, std::vector<double> column_major)
    : rows_(rows), cols_(cols), data_(std::move(column_major)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::LengthMismatch, "array data does not match its shape");
  }
}

Array2D Array2D::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Array2D();
  const std::size_t cols = rows.front().size();
  Array2D out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw Error(ErrorCode::LengthMismatch, "ragged rows");
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = rows[i][j];
  }
  return out;
}

bool DiscreteMeasure::strictly_positive() const noexcept {
  return std::all_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
}

DiscreteMeasure validate_measure(std::vector<double> weights, const Grid& grid) {
  if (weights.size() != point_count(grid)) {
    std::ostringstream os;
    os << "expected " << point_count(grid) << " weights, got " << weights.size();
    throw Error(ErrorCode::LengthMismatch, os.str());
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw Error(ErrorCode::NonFiniteInput, "weight is not finite");
    if (weights[i] < 0.0) {
      std::ostringstream os;
      os << "weight " << i << " is " << weights[i];
      throw Error(ErrorCode::NegativeWeight, os.str());
    }
  }
  const double mass = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(mass - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "total mass is " << mass;
    throw Error(ErrorCode::MassNotOne, os.str());
  }
  return DiscreteMeasure{std::move(weights), grid};
}

namespace {

double checked_lambda(double h, double epsilon) {
  return std::exp(-h / epsilon);
}

}  // namespace

KernelSpec KernelSpec::for_grid(const Grid& grid, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be positive");
  KernelSpec spec;
  spec.epsilon = epsilon;
  if (const auto* g1 = std::get_if<Grid1D>(&grid)) {
    spec.lambda1 = checked_lambda(g1->h, epsilon);
  } else {
    const auto& g2 = std::get<Grid2D>(grid);
    spec.lambda1 = checked_lambda(g2.h1, epsilon);
    spec.lambda2 = checked_lambda(g2.h2, epsilon);
  }
  return spec;
}

bool KernelSpec::has_unit_lambda() const noexcept {
  return lambda1 == 1.0 || (lambda2 && *lambda2 == 1.0);
}

bool KernelSpec::has_underflowed_lambda() const noexcept {
  return lambda1 == 0.0 || (lambda2 && *lambda2 == 0.0);
}

std::vector<std::string> KernelSpec::diagnostics() const {
  std::vector<std::string> out;
  if (has_unit_lambda()) out.emplace_back("kernel decay factor is 1: all-ones kernel");
  if (has_underflowed_lambda()) out.emplace_back("kernel decay factor underflowed to 0: identity kernel");
  return out;
}

SinkhornState SinkhornState::uniform(std::size_t size) {
  SinkhornState s;
  const double init = 1.0 / static_cast<double>(size);
  s.phi.assign(size, init);
  s.psi.assign(size, init);
  s.alpha.assign(size, 0.0);
  s.beta.assign(size, 0.0);
  return s;
}

bool SinkhornState::finite() const noexcept {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(phi) && ok(psi) && ok(alpha) && ok(beta);
}

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be positive");
  if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be nonnegative");
  if (itr_max < 1) throw Error(ErrorCode::InvalidArgument, "itr_max must be at least 1");
  if (!(tau > 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must exceed 1");
  if (check_interval < 1) throw Error(ErrorCode::InvalidArgument, "check_interval must be at least 1");
}

std::vector<double> stepwise_powers(double lambda, std::size_t count) {
  std::vector<double> out(count);
  double p = 1.0;
  for (std::size_t d = 0; d < count; ++d) {
    out[d] = p;
    p *= lambda;
  }
  return out;
}

TransportPlanView::TransportPlanView(const SinkhornState& state, const KernelSpec& kernel,
                                     const Grid& grid)
    : state_(state), kernel_(kernel), grid_(grid), size_(point_count(grid)) {
  if (state.size() != size_ || state.psi.size() != size_ || state.alpha.size() != size_ ||
      state.beta.size() != size_) {
    throw Error(ErrorCode::LengthMismatch, "state does not match grid");
  }
  if (const auto* g2 = std::get_if<Grid2D>(&grid)) {
    if (!kernel.lambda2) throw Error(ErrorCode::GridMismatch, "2D grid needs a 2D kernel");
    rows_ = g2->n;
    powers1_ = stepwise_powers(kernel.lambda1, g2->n);
    powers2_ = stepwise_powers(*kernel.lambda2, g2->m);
  } else {
    rows_ = size_;
    powers1_ = stepwise_powers(kernel.lambda1, size_);
  }
}

double TransportPlanView::kernel_entry(std::size_t i, std::size_t j) const noexcept {
  if (powers2_.empty()) return powers1_[i > j ? i - j : j - i];
  const std::size_t i1 = i % rows_, j1 = i / rows_;
  const std::size_t i2 = j % rows_, j2 = j / rows_;
  return powers1_[i1 > i2 ? i1 - i2 : i2 - i1] * powers2_[j1 > j2 ? j1 - j2 : j2 - j1];
}

double TransportPlanView::log_kernel_entry(std::size_t i, std::size_t j) const noexcept {
  auto axis = [](double lambda, std::size_t d) {
    if (d == 0) return 0.0;
    return static_cast<double>(d) * std::log(lambda);
  };
  if (powers2_.empty()) return axis(kernel_.lambda1, i > j ? i - j : j - i);
  const std::size_t i1 = i % rows_, j1 = i / rows_;
  const std::size_t i2 = j % rows_, j2 = j / rows_;
  return axis(kernel_.lambda1, i1 > i2 ? i1 - i2 : i2 - i1) +
         axis(*kernel_.lambda2, j1 > j2 ? j1 - j2 : j2 - j1);
}

double TransportPlanView::entry(std::size_t i, std::size_t j) const {
  if (i >= size_ || j >= size_) throw Error(ErrorCode::IndexOutOfRange, "plan index out of range");
  const double k = kernel_entry(i, j);
  if (!state_.absorbed) return state_.phi[i] * k * state_.psi[j];
  const double r = (state_.alpha[i] + state_.beta[j]) / kernel_.epsilon;
  const double scale = std::exp(r);
  if (std::isnormal(scale) && std::isnormal(k)) return scale * state_.phi[i] * k * state_.psi[j];
  // exp(r) or the kernel power left the normal range on its own; combine
  // the factors in the log domain instead.
  return std::exp(r + std::log(state_.phi[i]) + std::log(state_.psi[j]) + log_kernel_entry(i, j));
}

double plan_entry(const TransportPlanView& view, std::size_t i, std::size_t j) {
  return view.entry(i, j);
}

Array2D plan_materialize(const TransportPlanView& view, std::size_t max_size) {
  const std::size_t n = view.size();
  if (n != 0 && n > max_size / n) {
    throw Error(ErrorCode::TooLarge, "plan has more entries than allowed");
  }
  Array2D out(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) out(i, j) = view.entry(i, j);
  return out;
}

double plan_frobenius_distance(const TransportPlanView& a, const TransportPlanView& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::GridMismatch, "plans have different sizes");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double d = a.entry(i, j) - b.entry(i, j);
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace fastsinkhorn
