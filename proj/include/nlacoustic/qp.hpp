#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "nlacoustic/error.hpp"

namespace nlacoustic {

struct QpResult {
  Eigen::VectorXd x;
  std::vector<int> active;
  int iterations = 0;
};

/// Primal active-set method for  min 1/2 x'Hx + q'x  s.t.  G x >= h,
/// H symmetric positive definite, x0 feasible. Dense; meant for tens of
/// unknowns and a few thousand constraints.
inline QpResult solve_inequality_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& q, const Eigen::MatrixXd& G,
                                    const Eigen::VectorXd& h, Eigen::VectorXd x0, int max_iter = 0) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = G.rows();
  require(H.cols() == n && q.size() == n && G.cols() == n && h.size() == m && x0.size() == n,
          ErrorKind::ShapeMismatch, "solve_inequality_qp: dimensions");
  if (max_iter <= 0) max_iter = static_cast<int>(10 * (n + m) + 100);
  const double feas_tol = 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff());
  require(m == 0 || ((G * x0 - h).array() >= -1e3 * feas_tol).all(), ErrorKind::InfeasibleConstraints,
          "solve_inequality_qp: starting point is infeasible");

  QpResult res;
  Eigen::VectorXd x = std::move(x0);
  std::vector<int> work;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const auto k = static_cast<Eigen::Index>(work.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = H;
    for (Eigen::Index r = 0; r < k; ++r) {
      kkt.block(n + r, 0, 1, n) = G.row(work[static_cast<std::size_t>(r)]);
      kkt.block(0, n + r, n, 1) = -G.row(work[static_cast<std::size_t>(r)]).transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
    rhs.head(n) = -(H * x + q);
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    const Eigen::VectorXd lambda = sol.tail(k);

    if (p.norm() <= 1e-10 * (1.0 + x.norm())) {
      Eigen::Index worst = -1;
      double most_negative = -1e-10 * (1.0 + (H * x + q).norm());
      for (Eigen::Index r = 0; r < k; ++r)
        if (lambda[r] < most_negative) {
          most_negative = lambda[r];
          worst = r;
        }
      if (worst < 0) {
        res.x = x;
        res.active = work;
        return res;
      }
      work.erase(work.begin() + worst);
      continue;
    }

    double step = 1.0;
    int blocking = -1;
    const double pn = p.norm();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), static_cast<int>(i)) != work.end()) continue;
      const double gp = G.row(i).dot(p);
      // rows nearly orthogonal to p are (numerically) in the span of the working set
      if (gp >= -1e-10 * G.row(i).norm() * pn) continue;
      const double t = std::max(0.0, (h[i] - G.row(i).dot(x)) / gp);
      if (t < step) {
        step = t;
        blocking = static_cast<int>(i);
      }
    }
    x += step * p;
    if (blocking >= 0) work.push_back(blocking);
  }
  fail(ErrorKind::InfeasibleConstraints,
       "solve_inequality_qp: no convergence in " + std::to_string(max_iter) + " iterations");
}

}  // namespace nlacoustic
