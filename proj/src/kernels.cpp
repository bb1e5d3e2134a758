#include "ramp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <omp.h>

namespace ramp::kernels {

std::pair<long, long> quantile_ranks(long m, double delta) {
  // The 1e-9 guard keeps products such as 0.95 * 100 from rounding up a rank.
  long lo = static_cast<long>(std::ceil(delta * static_cast<double>(m) - 1e-9));
  long hi = static_cast<long>(std::ceil((1.0 - delta) * static_cast<double>(m) - 1e-9));
  return {std::clamp(lo, 1L, m), std::clamp(hi, 1L, m)};
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void gather_window(const Eigen::MatrixXd& values, int t, int w1, std::vector<double>& out) {
  const long n = values.cols();
  out.resize(static_cast<size_t>(w1) * n);
  size_t i = 0;
  for (int day = t - w1; day < t; ++day)
    for (long j = 0; j < n; ++j) out[i++] = values(day, j);
}

}  // namespace

Bands quantile_bands_serial(const Eigen::MatrixXd& values, int w1, double delta) {
  const long T = values.rows();
  Bands b{Eigen::VectorXd::Constant(T, kNaN), Eigen::VectorXd::Constant(T, kNaN)};
  std::vector<double> window;
  for (long t = w1; t < T; ++t) {
    gather_window(values, static_cast<int>(t), w1, window);
    std::sort(window.begin(), window.end());
    auto [rl, rh] = quantile_ranks(static_cast<long>(window.size()), delta);
    b.low(t) = window[rl - 1];
    b.high(t) = window[rh - 1];
  }
  return b;
}

Bands quantile_bands_omp(const Eigen::MatrixXd& values, int w1, double delta) {
  const long T = values.rows();
  Bands b{Eigen::VectorXd::Constant(T, kNaN), Eigen::VectorXd::Constant(T, kNaN)};
#pragma omp parallel
  {
    std::vector<double> window;
#pragma omp for schedule(static)
    for (long t = w1; t < T; ++t) {
      gather_window(values, static_cast<int>(t), w1, window);
      auto [rl, rh] = quantile_ranks(static_cast<long>(window.size()), delta);
      std::nth_element(window.begin(), window.begin() + (rl - 1), window.end());
      b.low(t) = window[rl - 1];
      std::nth_element(window.begin(), window.begin() + (rh - 1), window.end());
      b.high(t) = window[rh - 1];
    }
  }
  return b;
}

Eigen::MatrixXd gram_serial(const SparseRows& rows, std::span<const double> weights) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows.cols, rows.cols);
  for (int i = 0; i < rows.rows(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    auto r = rows.row(i);
    for (int a : r)
      for (int c : r) G(a, c) += w;
  }
  return G;
}

// Each thread owns a contiguous range of output columns and adds the rows
// in index order, so every entry is summed exactly as in the serial
// reference whatever the thread count.
Eigen::MatrixXd gram_omp(const SparseRows& rows, std::span<const double> weights) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows.cols, rows.cols);
#pragma omp parallel
  {
    const int parts = omp_get_num_threads(), me = omp_get_thread_num();
    const int lo = static_cast<int>(static_cast<long>(rows.cols) * me / parts);
    const int hi = static_cast<int>(static_cast<long>(rows.cols) * (me + 1) / parts);
    for (int i = 0; i < rows.rows(); ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      auto r = rows.row(i);
      for (int c : r) {
        if (c < lo || c >= hi) continue;
        for (int a : r) G(a, c) += w;
      }
    }
  }
  return G;
}

Eigen::MatrixXd moments_omp(const SparseRows& rows, const Eigen::MatrixXd& counts) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows.cols, counts.cols());
#pragma omp parallel
  {
    const int parts = omp_get_num_threads(), me = omp_get_thread_num();
    const int lo = static_cast<int>(static_cast<long>(rows.cols) * me / parts);
    const int hi = static_cast<int>(static_cast<long>(rows.cols) * (me + 1) / parts);
    for (int i = 0; i < rows.rows(); ++i)
      for (int a : rows.row(i))
        if (a >= lo && a < hi) B.row(a) += counts.row(i);
  }
  return B;
}

namespace {

// Accumulates rows [begin, end) into out (loss unnormalized).
void nll_range(const SparseRows& rows, const Eigen::MatrixXd& counts, const Eigen::MatrixXd& x, int begin,
               int end, bool with_grad, LossGrad& out) {
  const int M = static_cast<int>(x.rows());
  std::vector<double> prob(M + 1);
  for (int i = begin; i < end; ++i) {
    auto r = rows.row(i);
    double rest = 1.0;
    for (int p = 1; p <= M; ++p) {
      double v = 0.0;
      for (int j : r) v += x(p - 1, j);
      prob[p] = v;
      rest -= v;
    }
    prob[0] = rest;
    for (int o = 0; o <= M; ++o) {
      if (!(prob[o] > 0.0)) {
        out.in_domain = false;
        return;
      }
      const double c = counts(i, o);
      if (c != 0.0) out.loss -= c * std::log(prob[o]);
    }
    if (!with_grad) continue;
    const double zero_term = counts(i, 0) / prob[0];
    for (int p = 1; p <= M; ++p) {
      const double g = zero_term - counts(i, p) / prob[p];
      if (g == 0.0) continue;
      for (int j : r) out.grad(p - 1, j) += g;
    }
  }
}

LossGrad empty_result(const Eigen::MatrixXd& x, bool with_grad) {
  LossGrad r;
  if (with_grad) r.grad = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  return r;
}

void normalize(LossGrad& r, double total, bool with_grad) {
  if (!r.in_domain) {
    r.loss = std::numeric_limits<double>::infinity();
    return;
  }
  r.loss /= total;
  if (with_grad) r.grad /= total;
}

}  // namespace

LossGrad nll_serial(const SparseRows& rows, const Eigen::MatrixXd& counts, double total, const Eigen::MatrixXd& x,
                    bool with_grad) {
  LossGrad r = empty_result(x, with_grad);
  nll_range(rows, counts, x, 0, rows.rows(), with_grad, r);
  normalize(r, total, with_grad);
  return r;
}

LossGrad nll_omp(const SparseRows& rows, const Eigen::MatrixXd& counts, double total, const Eigen::MatrixXd& x,
                 bool with_grad) {
  const int P = rows.rows();
  const int chunks = (P + kChunk - 1) / kChunk;
  if (chunks <= 1) return nll_serial(rows, counts, total, x, with_grad);
  std::vector<LossGrad> partial(chunks);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    partial[c] = empty_result(x, with_grad);
    nll_range(rows, counts, x, c * kChunk, std::min(P, (c + 1) * kChunk), with_grad, partial[c]);
  }
  LossGrad r = empty_result(x, with_grad);
  for (const auto& p : partial) {
    r.in_domain = r.in_domain && p.in_domain;
    r.loss += p.loss;
    if (with_grad) r.grad += p.grad;
  }
  normalize(r, total, with_grad);
  return r;
}

}  // namespace ramp::kernels
