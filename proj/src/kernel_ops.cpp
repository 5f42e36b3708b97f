#include "fastsinkhorn/kernel_ops.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <sstream>

namespace fastsinkhorn {

void RecursionBuffers::ensure(std::size_t axis_len, std::size_t total) {
  if (p.size() < axis_len) p.resize(axis_len);
  if (q.size() < axis_len) q.resize(axis_len);
  if (s.size() < axis_len) s.resize(axis_len);
  if (r.size() < total) r.resize(total);
}

double lambda_from(double h, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be positive");
  if (!(h >= 0.0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be nonnegative");
  return std::exp(-h / epsilon);
}

namespace {

/// Forward/backward transfer factors for the rescaled kernel:
/// moving the running sum from index `from` to index `to` multiplies it by
/// lambda * exp((out_log[to] - out_log[from]) / eps).
struct LogScaling {
  std::span<const double> out_log;
  std::span<const double> in_log;
  double epsilon;
  double lambda;
  double log_lambda;

  LogScaling(std::span<const double> out, std::span<const double> in, double lam, double eps)
      : out_log(out), in_log(in), epsilon(eps), lambda(lam), log_lambda(std::log(lam)) {}

  double step(std::size_t from, std::size_t to) const noexcept {
    const double d = out_log[to] - out_log[from];
    if (d == 0.0) return lambda;
    return std::exp(log_lambda + d / epsilon);
  }
  double weight(std::size_t k) const noexcept {
    const double s = out_log[k] + in_log[k];
    if (s == 0.0) return 1.0;
    return std::exp(s / epsilon);
  }
};

// Forward sums into p, backward into q, out = p + q (all length n).
void stabilized_sweeps(std::span<const double> x, const LogScaling& sc, std::span<double> p,
                       std::span<double> q) {
  const std::size_t n = x.size();
  if (n == 0) return;
  p[0] = sc.weight(0) * x[0];
  for (std::size_t k = 0; k + 1 < n; ++k) {
    p[k + 1] = sc.step(k, k + 1) * p[k] + sc.weight(k + 1) * x[k + 1];
  }
  q[n - 1] = 0.0;
  for (std::size_t k = n - 1; k-- > 0;) {
    q[k] = sc.step(k + 1, k) * (q[k + 1] + sc.weight(k + 1) * x[k + 1]);
  }
}

// Distance-weighted tail from the plain sums:
//   p'_0 = 0,       p'_{k+1} = a_k (p'_k + p_k)
//   q'_{N-1} = 0,   q'_k = b_k q'_{k+1} + q_k
// where a_k, b_k are the forward/backward transfer factors.
template <class Forward, class Backward>
void weighted_tail(std::span<const double> p, std::span<const double> q, double h,
                   Forward forward, Backward backward, std::span<double> out) {
  const std::size_t n = p.size();
  if (n == 0) return;
  out[0] = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) out[k + 1] = forward(k) * (out[k] + p[k]);
  double tail = 0.0;
  out[n - 1] = h * out[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    tail = backward(k) * tail + q[k];
    out[k] = h * (out[k] + tail);
  }
}

// Second-axis sweep over the columns of an n x m column-major array z:
//   out_l = sum_j f(l, j) z_j with f the product of transfer factors.
// `factor(k, from, to)` gives the transfer factor for row k.
template <class Factor>
void column_sweep(std::span<const double> z, std::size_t n, std::size_t m, Factor factor,
                  std::span<double> running, std::span<double> out) {
  std::copy_n(z.begin(), n, out.begin());
  for (std::size_t l = 0; l + 1 < m; ++l) {
    const double* prev = out.data() + l * n;
    const double* zc = z.data() + (l + 1) * n;
    double* cur = out.data() + (l + 1) * n;
    for (std::size_t k = 0; k < n; ++k) cur[k] = factor(k, l, l + 1) * prev[k] + zc[k];
  }
  std::fill_n(running.begin(), n, 0.0);
  for (std::size_t l = m; l-- > 0;) {
    double* cur = out.data() + l * n;
    const double* zc = z.data() + l * n;
    for (std::size_t k = 0; k < n; ++k) cur[k] += running[k];
    if (l == 0) break;
    for (std::size_t k = 0; k < n; ++k) running[k] = factor(k, l, l - 1) * (running[k] + zc[k]);
  }
}

// Distance-weighted second-axis sweep, accumulated into out:
//   out_l += h * sum_j |l-j| f(l, j) z_j.
// `prefix` must hold n*m entries; p/q/q' running columns use length-n scratch.
template <class Factor>
void column_weighted_sweep_add(std::span<const double> z, std::size_t n, std::size_t m, double h,
                               Factor factor, std::span<double> prefix, std::span<double> run_p,
                               std::span<double> run_q, std::span<double> run_qd,
                               std::span<double> out) {
  // Forward: run_p holds p_l, prefix column l holds p'_l.
  std::copy_n(z.begin(), n, run_p.begin());
  std::fill_n(prefix.begin(), n, 0.0);
  for (std::size_t l = 0; l + 1 < m; ++l) {
    const double* pd_prev = prefix.data() + l * n;
    double* pd_cur = prefix.data() + (l + 1) * n;
    const double* zc = z.data() + (l + 1) * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = factor(k, l, l + 1);
      pd_cur[k] = a * (pd_prev[k] + run_p[k]);
      run_p[k] = a * run_p[k] + zc[k];
    }
  }
  // Backward: run_q holds q_l, run_qd holds q'_l.
  std::fill_n(run_q.begin(), n, 0.0);
  std::fill_n(run_qd.begin(), n, 0.0);
  for (std::size_t l = m; l-- > 0;) {
    double* oc = out.data() + l * n;
    const double* pd = prefix.data() + l * n;
    for (std::size_t k = 0; k < n; ++k) oc[k] += h * (pd[k] + run_qd[k]);
    if (l == 0) break;
    const double* zc = z.data() + l * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double b = factor(k, l, l - 1);
      run_q[k] = b * (run_q[k] + zc[k]);
      run_qd[k] = b * run_qd[k] + run_q[k];
    }
  }
}

struct PlainColumnFactor {
  double lambda;
  double operator()(std::size_t, std::size_t, std::size_t) const noexcept { return lambda; }
};

// Second-axis factor with mid-potential equal to out_log: the additive
// weight is exp((out - out)/eps) = 1 and only neighbouring differences of
// out_log along the row enter.
struct LogColumnFactor {
  std::span<const double> out_log;
  std::size_t n;
  double lambda;
  double log_lambda;
  double epsilon;

  double operator()(std::size_t k, std::size_t from, std::size_t to) const noexcept {
    const double d = out_log[to * n + k] - out_log[from * n + k];
    if (d == 0.0) return lambda;
    return std::exp(log_lambda + d / epsilon);
  }
};

std::vector<double> flushed_powers(double lambda, std::size_t count) {
  // Subnormal powers contribute below 1e-308 relative to their operand and
  // would only slow the dense loop down; they are taken as zero.
  std::vector<double> pw = stepwise_powers(lambda, count);
  for (double& v : pw) {
    if (v < DBL_MIN) v = 0.0;
  }
  return pw;
}

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " is not finite");
  }
}

void require_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "decay factor must lie in [0, 1]");
  }
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be positive");
}

void require_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << " has length " << got << ", expected " << want;
    throw Error(ErrorCode::LengthMismatch, os.str());
  }
}

}  // namespace

namespace detail {

void apply_1d(std::span<const double> x, double lambda, RecursionBuffers& buf,
              std::span<double> out) {
  const std::size_t n = x.size();
  buf.ensure(n, 0);
  sweep_apply<double>(x, lambda, std::span(buf.p).first(n), std::span(buf.q).first(n), out);
}

void weighted_apply_1d(std::span<const double> x, double lambda, double h,
                       RecursionBuffers& buf, std::span<double> out) {
  const std::size_t n = x.size();
  buf.ensure(n, 0);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  sweep_apply<double>(x, lambda, p, q, out);
  auto f = [lambda](std::size_t) { return lambda; };
  weighted_tail(p, q, h, f, f, out);
}

void apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
              double lambda2, RecursionBuffers& buf, std::span<double> out) {
  buf.ensure(n, n * m);
  auto z = std::span(buf.r).first(n * m);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  for (std::size_t j = 0; j < m; ++j) {
    sweep_apply<double>(x.subspan(j * n, n), lambda1, p, q, z.subspan(j * n, n));
  }
  column_sweep(std::span<const double>(z), n, m, PlainColumnFactor{lambda2}, std::span(buf.s), out);
}

void weighted_apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
                       double lambda2, double h1, double h2, RecursionBuffers& buf,
                       std::span<double> out) {
  buf.ensure(n, n * m);
  if (buf.w.size() < n * m) buf.w.resize(n * m);
  auto plain = std::span(buf.r).first(n * m);
  auto weighted = std::span(buf.w).first(n * m);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  auto f1 = [lambda1](std::size_t) { return lambda1; };
  for (std::size_t j = 0; j < m; ++j) {
    auto xc = x.subspan(j * n, n);
    sweep_apply<double>(xc, lambda1, p, q, plain.subspan(j * n, n));
    weighted_tail(p, q, h1, f1, f1, weighted.subspan(j * n, n));
  }
  // First-axis distances carried along the second axis unweighted...
  column_sweep(std::span<const double>(weighted), n, m, PlainColumnFactor{lambda2},
               std::span(buf.s), out);
  // ...plus second-axis distances on the plain first-axis products.
  std::vector<double> run_qd(n);
  column_weighted_sweep_add(std::span<const double>(plain), n, m, h2, PlainColumnFactor{lambda2},
                            weighted, p, q, run_qd, out);
}

void stabilized_apply_1d(std::span<const double> x, std::span<const double> out_log,
                         std::span<const double> in_log, double lambda, double epsilon,
                         RecursionBuffers& buf, std::span<double> out) {
  const std::size_t n = x.size();
  buf.ensure(n, 0);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  stabilized_sweeps(x, LogScaling(out_log, in_log, lambda, epsilon), p, q);
  for (std::size_t k = 0; k < n; ++k) out[k] = p[k] + q[k];
}

void stabilized_weighted_apply_1d(std::span<const double> x, std::span<const double> out_log,
                                  std::span<const double> in_log, double lambda, double h,
                                  double epsilon, RecursionBuffers& buf, std::span<double> out) {
  const std::size_t n = x.size();
  buf.ensure(n, 0);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  const LogScaling sc(out_log, in_log, lambda, epsilon);
  stabilized_sweeps(x, sc, p, q);
  weighted_tail(
      p, q, h, [&sc](std::size_t k) { return sc.step(k, k + 1); },
      [&sc](std::size_t k) { return sc.step(k + 1, k); }, out);
}

void stabilized_apply_2d(std::span<const double> x, std::span<const double> out_log,
                         std::span<const double> in_log, std::size_t n, std::size_t m,
                         double lambda1, double lambda2, double epsilon, RecursionBuffers& buf,
                         std::span<double> out) {
  buf.ensure(n, n * m);
  auto z = std::span(buf.r).first(n * m);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  for (std::size_t j = 0; j < m; ++j) {
    const LogScaling sc(out_log.subspan(j * n, n), in_log.subspan(j * n, n), lambda1, epsilon);
    stabilized_sweeps(x.subspan(j * n, n), sc, p, q);
    for (std::size_t k = 0; k < n; ++k) z[j * n + k] = p[k] + q[k];
  }
  column_sweep(std::span<const double>(z), n, m,
               LogColumnFactor{out_log, n, lambda2, std::log(lambda2), epsilon}, std::span(buf.s),
               out);
}

void stabilized_weighted_apply_2d(std::span<const double> x, std::span<const double> out_log,
                                  std::span<const double> in_log, std::size_t n, std::size_t m,
                                  double lambda1, double lambda2, double h1, double h2,
                                  double epsilon, RecursionBuffers& buf, std::span<double> out) {
  buf.ensure(n, n * m);
  if (buf.w.size() < n * m) buf.w.resize(n * m);
  auto plain = std::span(buf.r).first(n * m);
  auto weighted = std::span(buf.w).first(n * m);
  auto p = std::span(buf.p).first(n);
  auto q = std::span(buf.q).first(n);
  for (std::size_t j = 0; j < m; ++j) {
    const LogScaling sc(out_log.subspan(j * n, n), in_log.subspan(j * n, n), lambda1, epsilon);
    stabilized_sweeps(x.subspan(j * n, n), sc, p, q);
    for (std::size_t k = 0; k < n; ++k) plain[j * n + k] = p[k] + q[k];
    weighted_tail(
        p, q, h1, [&sc](std::size_t k) { return sc.step(k, k + 1); },
        [&sc](std::size_t k) { return sc.step(k + 1, k); }, weighted.subspan(j * n, n));
  }
  const LogColumnFactor factor{out_log, n, lambda2, std::log(lambda2), epsilon};
  column_sweep(std::span<const double>(weighted), n, m, factor, std::span(buf.s), out);
  std::vector<double> run_qd(n);
  column_weighted_sweep_add(std::span<const double>(plain), n, m, h2, factor, weighted, p, q,
                            run_qd, out);
}

void naive_apply_1d(std::span<const double> x, double lambda, std::span<double> out) {
  const std::size_t n = x.size();
  const std::vector<double> pw = flushed_powers(lambda, n);
  const double* xs = x.data();
  const double* w = pw.data();
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += w[k - j] * xs[j];
    for (std::size_t j = k; j < n; ++j) acc += w[j - k] * xs[j];
    out[k] = acc;
  }
}

void naive_apply_2d(std::span<const double> x, std::size_t n, std::size_t m, double lambda1,
                    double lambda2, std::span<double> out) {
  const std::vector<double> pw1 = flushed_powers(lambda1, n);
  const std::vector<double> pw2 = flushed_powers(lambda2, m);
  for (std::size_t l = 0; l < m; ++l) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double c2 = pw2[l > j ? l - j : j - l];
        for (std::size_t i = 0; i < n; ++i) acc += pw1[k > i ? k - i : i - k] * c2 * x[j * n + i];
      }
      out[l * n + k] = acc;
    }
  }
}

void naive_stabilized_apply_1d(std::span<const double> x, std::span<const double> out_log,
                               std::span<const double> in_log, double lambda, double epsilon,
                               std::span<double> out) {
  const std::size_t n = x.size();
  const double log_lambda = std::log(lambda);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = k > j ? k - j : j - k;
      double e = (out_log[k] + in_log[j]) / epsilon;
      if (d > 0) e += static_cast<double>(d) * log_lambda;
      acc += std::exp(e) * x[j];
    }
    out[k] = acc;
  }
}

void naive_stabilized_apply_2d(std::span<const double> x, std::span<const double> out_log,
                               std::span<const double> in_log, std::size_t n, std::size_t m,
                               double lambda1, double lambda2, double epsilon,
                               std::span<double> out) {
  const double ll1 = std::log(lambda1);
  const double ll2 = std::log(lambda2);
  for (std::size_t l = 0; l < m; ++l) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      const double o = out_log[l * n + k];
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t d2 = l > j ? l - j : j - l;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t d1 = k > i ? k - i : i - k;
          double e = (o + in_log[j * n + i]) / epsilon;
          if (d1 > 0) e += static_cast<double>(d1) * ll1;
          if (d2 > 0) e += static_cast<double>(d2) * ll2;
          acc += std::exp(e) * x[j * n + i];
        }
      }
      out[l * n + k] = acc;
    }
  }
}

}  // namespace detail

std::vector<double> fast_apply_1d(std::span<const double> x, double lambda) {
  std::vector<double> out(x.size());
  RecursionBuffers buf;
  fast_apply_1d(x, lambda, buf, out);
  return out;
}

void fast_apply_1d(std::span<const double> x, double lambda, RecursionBuffers& buffers,
                   std::span<double> out) {
  require_lambda(lambda);
  require_finite(x, "input");
  require_len(out.size(), x.size(), "output");
  detail::apply_1d(x, lambda, buffers, out);
}

std::vector<double> naive_apply_1d(std::span<const double> x, double lambda, std::size_t max_n) {
  require_lambda(lambda);
  require_finite(x, "input");
  if (x.size() > max_n) throw Error(ErrorCode::TooLarge, "naive product size above cap");
  std::vector<double> out(x.size());
  detail::naive_apply_1d(x, lambda, out);
  return out;
}

std::vector<double> fast_weighted_apply_1d(std::span<const double> x, double lambda, double h) {
  require_lambda(lambda);
  require_finite(x, "input");
  std::vector<double> out(x.size());
  RecursionBuffers buf;
  detail::weighted_apply_1d(x, lambda, h, buf, out);
  return out;
}

Array2D fast_apply_2d(const Array2D& x, double lambda1, double lambda2) {
  require_lambda(lambda1);
  require_lambda(lambda2);
  require_finite(x.flat(), "input");
  Array2D out(x.rows(), x.cols());
  if (x.size() == 0) return out;
  RecursionBuffers buf;
  detail::apply_2d(x.flat(), x.rows(), x.cols(), lambda1, lambda2, buf, out.flat());
  return out;
}

Array2D naive_apply_2d(const Array2D& x, double lambda1, double lambda2, std::size_t max_entries) {
  require_lambda(lambda1);
  require_lambda(lambda2);
  require_finite(x.flat(), "input");
  if (x.size() > max_entries) throw Error(ErrorCode::TooLarge, "naive product size above cap");
  Array2D out(x.rows(), x.cols());
  detail::naive_apply_2d(x.flat(), x.rows(), x.cols(), lambda1, lambda2, out.flat());
  return out;
}

Array2D weighted_apply_2d(const Array2D& x, double lambda1, double lambda2, double h1, double h2) {
  require_lambda(lambda1);
  require_lambda(lambda2);
  require_finite(x.flat(), "input");
  Array2D out(x.rows(), x.cols());
  if (x.size() == 0) return out;
  RecursionBuffers buf;
  detail::weighted_apply_2d(x.flat(), x.rows(), x.cols(), lambda1, lambda2, h1, h2, buf,
                            out.flat());
  return out;
}

std::vector<double> stabilized_fast_apply_1d(std::span<const double> x,
                                             std::span<const double> out_log,
                                             std::span<const double> in_log, double lambda,
                                             double epsilon) {
  require_lambda(lambda);
  require_epsilon(epsilon);
  require_finite(x, "input");
  require_finite(out_log, "output potential");
  require_finite(in_log, "input potential");
  require_len(out_log.size(), x.size(), "output potential");
  require_len(in_log.size(), x.size(), "input potential");
  std::vector<double> out(x.size());
  RecursionBuffers buf;
  detail::stabilized_apply_1d(x, out_log, in_log, lambda, epsilon, buf, out);
  return out;
}

Array2D stabilized_fast_apply_2d(const Array2D& x, std::span<const double> out_log,
                                 std::span<const double> in_log, double lambda1, double lambda2,
                                 double epsilon) {
  require_lambda(lambda1);
  require_lambda(lambda2);
  require_epsilon(epsilon);
  require_finite(x.flat(), "input");
  require_finite(out_log, "output potential");
  require_finite(in_log, "input potential");
  require_len(out_log.size(), x.size(), "output potential");
  require_len(in_log.size(), x.size(), "input potential");
  Array2D out(x.rows(), x.cols());
  if (x.size() == 0) return out;
  RecursionBuffers buf;
  detail::stabilized_apply_2d(x.flat(), out_log, in_log, x.rows(), x.cols(), lambda1, lambda2,
                              epsilon, buf, out.flat());
  return out;
}

std::vector<double> stabilized_weighted_apply_1d(std::span<const double> x,
                                                 std::span<const double> out_log,
                                                 std::span<const double> in_log, double lambda,
                                                 double h, double epsilon) {
  require_lambda(lambda);
  require_epsilon(epsilon);
  require_finite(x, "input");
  require_finite(out_log, "output potential");
  require_finite(in_log, "input potential");
  require_len(out_log.size(), x.size(), "output potential");
  require_len(in_log.size(), x.size(), "input potential");
  std::vector<double> out(x.size());
  RecursionBuffers buf;
  detail::stabilized_weighted_apply_1d(x, out_log, in_log, lambda, h, epsilon, buf, out);
  return out;
}

Array2D stabilized_weighted_apply_2d(const Array2D& x, std::span<const double> out_log,
                                     std::span<const double> in_log, double lambda1,
                                     double lambda2, double h1, double h2, double epsilon) {
  require_lambda(lambda1);
  require_lambda(lambda2);
  require_epsilon(epsilon);
  require_finite(x.flat(), "input");
  require_finite(out_log, "output potential");
  require_finite(in_log, "input potential");
  require_len(out_log.size(), x.size(), "output potential");
  require_len(in_log.size(), x.size(), "input potential");
  Array2D out(x.rows(), x.cols());
  if (x.size() == 0) return out;
  RecursionBuffers buf;
  detail::stabilized_weighted_apply_2d(x.flat(), out_log, in_log, x.rows(), x.cols(), lambda1,
                                       lambda2, h1, h2, epsilon, buf, out.flat());
  return out;
}

}  // namespace fastsinkhorn
