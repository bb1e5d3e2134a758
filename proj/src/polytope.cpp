#include "ramp/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ramp {

namespace {

// Level t with sum_i (t - y_i)_+ = mu, for mu >= 0.
double fill_level(std::vector<double> y, double mu) {
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  const size_t n = y.size();
  for (size_t k = 1; k <= n; ++k) {
    acc += y[k - 1];
    const double t = (mu + acc) / static_cast<double>(k);
    if (k == n || t <= y[k]) return t;
  }
  return y.back() + mu;  // unreachable
}

// Smallest mu >= 0 with sum_i (a_i - mu)_+ <= target.
double excess_threshold(const std::vector<double>& sorted_desc, double target) {
  double total = 0.0;
  for (double a : sorted_desc) total += std::max(a, 0.0);
  if (total <= target) return 0.0;
  double acc = 0.0;
  const size_t n = sorted_desc.size();
  for (size_t k = 1; k <= n; ++k) {
    acc += sorted_desc[k - 1];
    const double mu = (acc - target) / static_cast<double>(k);
    const double next = k < n ? std::max(sorted_desc[k], 0.0) : 0.0;
    if (mu >= next) return std::max(mu, 0.0);
  }
  return 0.0;
}

// Root of a monotone function on [a, b]; increasing says which way.
double bisect(const std::function<double(double)>& f, double a, double b, bool increasing) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const double v = f(mid);
    if ((v < 0.0) == increasing)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

Eigen::MatrixXd project_binary(const FeasibleSet& set, const Eigen::MatrixXd& y) {
  const int G = set.groups;
  std::vector<double> neg(G), pos(G);
  for (int g = 0; g < G; ++g) {
    neg[g] = -y(0, 1 + g);
    pos[g] = y(0, 1 + g);
  }
  std::sort(neg.begin(), neg.end(), std::greater<>());
  std::sort(pos.begin(), pos.end(), std::greater<>());
  const double y0 = y(0, 0);
  const double lo = set.lo, hi = set.hi;
  auto mu_of = [&](double c) { return excess_threshold(neg, c - lo); };
  auto nu_of = [&](double c) { return excess_threshold(pos, hi - c); };
  // With the birthrate fixed at c, the multipliers of both constraints are
  // determined; the stationarity residual y0 + mu - nu - c decreases in c.
  auto phi = [&](double c) { return y0 + mu_of(c) - nu_of(c) - c; };
  double c;
  if (phi(lo) <= 0.0)
    c = lo;
  else if (phi(hi) >= 0.0)
    c = hi;
  else
    c = bisect(phi, lo, hi, false);
  const double mu = mu_of(c), nu = nu_of(c);
  Eigen::MatrixXd x(1, set.width());
  x(0, 0) = c;
  for (int g = 0; g < G; ++g) {
    const double v = y(0, 1 + g);
    x(0, 1 + g) = v > nu ? v - nu : (v < -mu ? v + mu : 0.0);
  }
  return x;
}

double lower_value(const FeasibleSet& set, const Eigen::MatrixXd& x, int p) {
  double v = x(p - 1, 0);
  for (int g = 0; g < set.groups; ++g) {
    double m = 0.0;
    for (int q = 1; q <= set.M; ++q) m = std::min(m, x(p - 1, set.col(g, q)));
    v += m;
  }
  return v;
}

double upper_value(const FeasibleSet& set, const Eigen::MatrixXd& x) {
  double v = x.col(0).sum();
  for (int g = 0; g < set.groups; ++g) {
    double m = 0.0;
    for (int q = 1; q <= set.M; ++q) m = std::max(m, x.col(set.col(g, q)).sum());
    v += m;
  }
  return v;
}

}  // namespace

SetSlack slack(const FeasibleSet& set, const Eigen::MatrixXd& x) {
  SetSlack s;
  s.lower.resize(set.M);
  for (int p = 1; p <= set.M; ++p) s.lower(p - 1) = lower_value(set, x, p) - set.lo;
  s.upper = set.hi - upper_value(set, x);
  return s;
}

Eigen::MatrixXd project_lower(const FeasibleSet& set, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd x = y;
  const int M = set.M, G = set.groups;
  std::vector<double> grp(M);
  for (int p = 1; p <= M; ++p) {
    if (lower_value(set, y, p) >= set.lo) continue;
    const double y0 = y(p - 1, 0);
    auto level = [&](int g, double mu) {
      for (int q = 1; q <= M; ++q) grp[q - 1] = y(p - 1, set.col(g, q));
      return std::min(fill_level(grp, mu), 0.0);
    };
    auto h = [&](double mu) {
      double v = y0 + mu - set.lo;
      for (int g = 0; g < G; ++g) v += level(g, mu);
      return v;
    };
    double top = set.lo - y0;
    for (int g = 0; g < G; ++g) {
      double m = 0.0;
      for (int q = 1; q <= M; ++q) m = std::min(m, y(p - 1, set.col(g, q)));
      top -= m;
    }
    const double mu = bisect(h, 0.0, std::max(top, 0.0) + 1e-300, true);
    x(p - 1, 0) = y0 + mu;
    for (int g = 0; g < G; ++g) {
      const double t = level(g, mu);
      for (int q = 1; q <= M; ++q) x(p - 1, set.col(g, q)) = std::max(y(p - 1, set.col(g, q)), t);
    }
  }
  return x;
}

Eigen::MatrixXd project_upper(const FeasibleSet& set, const Eigen::MatrixXd& y) {
  if (upper_value(set, y) <= set.hi) return y;
  const int M = set.M, G = set.groups;
  std::vector<std::vector<double>> colsum(G, std::vector<double>(M));
  for (int g = 0; g < G; ++g)
    for (int q = 1; q <= M; ++q) colsum[g][q - 1] = y.col(set.col(g, q)).sum();
  // Cap level r with sum_q (Y_q - r)_+ = amount; mirror of fill_level.
  auto cap = [&](int g, double amount) {
    std::vector<double> neg(M);
    for (int q = 0; q < M; ++q) neg[q] = -colsum[g][q];
    return std::max(-fill_level(neg, amount), 0.0);
  };
  const double births = y.col(0).sum();
  auto h = [&](double nu) {
    double v = births - M * nu - set.hi;
    for (int g = 0; g < G; ++g) v += cap(g, M * nu);
    return v;
  };
  double top = births - set.hi;
  for (int g = 0; g < G; ++g) top += std::max(0.0, *std::max_element(colsum[g].begin(), colsum[g].end()));
  const double nu = bisect(h, 0.0, std::max(top / M, 0.0) + 1e-300, false);
  Eigen::MatrixXd x = y;
  x.col(0).array() -= nu;
  for (int g = 0; g < G; ++g) {
    const double r = cap(g, M * nu);
    for (int q = 1; q <= M; ++q) {
      const double cut = std::max(colsum[g][q - 1] - r, 0.0);
      if (cut > 0.0) x.col(set.col(g, q)).array() -= cut / M;
    }
  }
  return x;
}

Eigen::MatrixXd project(const FeasibleSet& set, const Eigen::MatrixXd& y) {
  if (y.rows() != set.M || y.cols() != set.width()) throw std::invalid_argument("projection shape mismatch");
  if (set.hi < set.lo) throw std::invalid_argument("empty feasible set");
  if (slack(set, y).worst() >= 0.0) return y;
  if (set.M == 1) return project_binary(set, y);

  // Dykstra: the lower constraints act on disjoint rows, so their product
  // is projected row by row; the upper constraint couples the rows.
  Eigen::MatrixXd x = y;
  Eigen::MatrixXd pl = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  Eigen::MatrixXd pu = pl;
  for (int it = 0; it < 20000; ++it) {
    Eigen::MatrixXd a = project_lower(set, x + pl);
    pl = x + pl - a;
    Eigen::MatrixXd b = project_upper(set, a + pu);
    pu = a + pu - b;
    const double change = (b - x).cwiseAbs().maxCoeff();
    x = std::move(b);
    if (change <= 1e-15 * (1.0 + x.cwiseAbs().maxCoeff()) && slack(set, x).worst() >= -1e-13) break;
  }
  return x;
}

Eigen::MatrixXd lp_vertex(const FeasibleSet& set, const Eigen::MatrixXd& g) {
  if (set.M != 1) throw std::invalid_argument("linear oracle is implemented for the binary model only");
  const double lo = set.lo, hi = set.hi, span = hi - lo;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(1, set.width());
  double best = lo * g(0, 0);
  int choice = -1;  // -1: lo*e0, -2: hi*e0, j>=0 with sign
  bool plus = true;
  if (hi * g(0, 0) < best) {
    best = hi * g(0, 0);
    choice = -2;
  }
  for (int j = 1; j < set.width(); ++j) {
    const double up = lo * g(0, 0) + span * g(0, j);
    const double down = hi * g(0, 0) - span * g(0, j);
    if (up < best) {
      best = up;
      choice = j;
      plus = true;
    }
    if (down < best) {
      best = down;
      choice = j;
      plus = false;
    }
  }
  if (choice == -1) {
    v(0, 0) = lo;
  } else if (choice == -2) {
    v(0, 0) = hi;
  } else if (plus) {
    v(0, 0) = lo;
    v(0, choice) = span;
  } else {
    v(0, 0) = hi;
    v(0, choice) = -span;
  }
  return v;
}

}  // namespace ramp
