#pragma once

// Data-parallel inner loops. Each kernel has a straightforward serial
// reference (kept for tests and benchmarks) and an OpenMP version. No
// OpenMP result depends on the thread count: the likelihood reduces over
// fixed-size chunks combined in index order, and the Gram kernels give
// each thread whole output columns. The library always calls the *_omp
// variants.

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

namespace ramp::kernels {

inline constexpr int kChunk = 256;

// Binary rows stored as lists of active column indices (CSR without values).
struct SparseRows {
  int cols = 0;
  std::vector<int> offsets{0};
  std::vector<int> index;

  int rows() const { return static_cast<int>(offsets.size()) - 1; }
  std::span<const int> row(int i) const {
    return {index.data() + offsets[i], static_cast<size_t>(offsets[i + 1] - offsets[i])};
  }
  void add(std::span<const int> active) {
    index.insert(index.end(), active.begin(), active.end());
    offsets.push_back(static_cast<int>(index.size()));
  }
};

// ---------------------------------------------------------------------------
// Sliding-window order statistics for event extraction.

// 1-based ranks ceil(delta*m) and ceil((1-delta)*m), clamped to [1, m].
std::pair<long, long> quantile_ranks(long m, double delta);

struct Bands {
  Eigen::VectorXd low;   // NaN for days without a full window
  Eigen::VectorXd high;
};

// values is T x n (one row per day). Day t uses days t-w1 .. t-1.
Bands quantile_bands_serial(const Eigen::MatrixXd& values, int w1, double delta);
Bands quantile_bands_omp(const Eigen::MatrixXd& values, int w1, double delta);

// ---------------------------------------------------------------------------
// Weighted Gram matrix sum_i w_i z_i z_i^T of binary rows.

Eigen::MatrixXd gram_serial(const SparseRows& rows, std::span<const double> weights);
Eigen::MatrixXd gram_omp(const SparseRows& rows, std::span<const double> weights);

// Right-hand sides: column c is sum_i counts(i, c) z_i.
Eigen::MatrixXd moments_omp(const SparseRows& rows, const Eigen::MatrixXd& counts);

// ---------------------------------------------------------------------------
// Categorical negative log-likelihood and gradient over distinct histories.
//
// x is M x m; row p-1 holds the coefficients for state p over the m
// features. For row i the state-p probability is sum_{j in row i} x(p-1, j)
// and state 0 takes the rest. counts is rows x (M+1) (observed outcome
// weights), total the normalizer N.

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // M x m
  bool in_domain = true;  // false if some probability left (0, 1]
};

LossGrad nll_serial(const SparseRows& rows, const Eigen::MatrixXd& counts, double total,
                    const Eigen::MatrixXd& x, bool with_grad = true);
LossGrad nll_omp(const SparseRows& rows, const Eigen::MatrixXd& counts, double total,
                 const Eigen::MatrixXd& x, bool with_grad = true);

}  // namespace ramp::kernels
