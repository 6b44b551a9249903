#include "racing/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace racing {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Givens {
  double c = 1.0;
  double s = 0.0;
  double h = 0.0;
};

// Rotation mapping (a, b) to (h, 0).
Givens givens(double a, double b) {
  const double h = std::hypot(a, b);
  if (h == 0.0) return {1.0, 0.0, 0.0};
  return {a / h, b / h, h};
}

double feasibility_tol(double b) { return 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

QpResult DenseQpSolver::solve(const QpProblem& qp) const {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.C.rows();
  if (qp.H.cols() != n || qp.g.size() != n || (m > 0 && qp.C.cols() != n) || qp.b.size() != m) {
    throw std::invalid_argument("qp: inconsistent problem dimensions");
  }

  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) throw QpSingularError("qp: Hessian is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const double diag_min = L.diagonal().minCoeff();
  const double diag_max = L.diagonal().maxCoeff();
  if (!(diag_min > 1e-12 * std::max(1.0, diag_max))) {
    throw QpSingularError("qp: Hessian is numerically singular");
  }

  // J = L^{-T}; its columns are rotated as constraints enter and leave.
  Eigen::MatrixXd J = L.transpose().triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);

  QpResult res;
  res.x = -llt.solve(qp.g);
  res.multipliers = Eigen::VectorXd::Zero(m);
  res.objective = 0.5 * qp.g.dot(res.x);

  std::vector<int> active;
  std::vector<double> u;
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);
  double r_norm = 1.0;

  const int limit = max_iterations > 0 ? max_iterations : static_cast<int>(10 * (n + m) + 10);
  Eigen::VectorXd s(m), d(n), z(n), r(n), np(n);

  auto drop = [&](std::size_t pos, std::vector<double>& duals) {
    const int iq = static_cast<int>(active.size());
    is_active[static_cast<std::size_t>(active[pos])] = 0;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(pos));
    duals.erase(duals.begin() + static_cast<std::ptrdiff_t>(pos));
    for (int j = static_cast<int>(pos); j < iq - 1; ++j) R.col(j) = R.col(j + 1);
    R.col(iq - 1).setZero();
    for (int j = static_cast<int>(pos); j < iq - 1; ++j) {
      const Givens g = givens(R(j, j), R(j + 1, j));
      if (g.h == 0.0) continue;
      for (int k = j; k < iq - 1; ++k) {
        const double a = R(j, k);
        const double b = R(j + 1, k);
        R(j, k) = g.c * a + g.s * b;
        R(j + 1, k) = -g.s * a + g.c * b;
      }
      R(j + 1, j) = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double a = J(k, j);
        const double b = J(k, j + 1);
        J(k, j) = g.c * a + g.s * b;
        J(k, j + 1) = -g.s * a + g.c * b;
      }
    }
  };

  int iter = 0;
  for (;;) {
    if (++iter > limit) {
      res.status = QpStatus::MaxIterations;
      break;
    }
    s.noalias() = qp.C * res.x - qp.b;
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_active[static_cast<std::size_t>(i)]) continue;
      if (s(i) < -feasibility_tol(qp.b(i)) && s(i) < worst) {
        worst = s(i);
        p = i;
      }
    }
    if (p < 0) {
      res.status = QpStatus::Optimal;
      break;
    }

    np = qp.C.row(p).transpose();
    std::vector<double> u_plus = u;
    u_plus.push_back(0.0);
    double sp = s(p);
    bool added = false;
    while (!added) {
      if (++iter > limit) break;
      const int iq = static_cast<int>(active.size());
      d.noalias() = J.transpose() * np;
      z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
      if (iq > 0) {
        r.head(iq) = R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
      }

      double t1 = kInf;
      int l = -1;
      for (int k = 0; k < iq; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u_plus[static_cast<std::size_t>(k)] / r(k);
          if (ratio < t1) {
            t1 = ratio;
            l = k;
          }
        }
      }
      const double zn = z.dot(np);
      const double t2 = z.squaredNorm() > 1e-24 && zn > 0.0 ? -sp / zn : kInf;
      const double t = std::min(t1, t2);

      if (t == kInf) {
        res.status = QpStatus::Infeasible;
        res.active_set = active;
        res.iterations = iter;
        return res;
      }
      if (t2 == kInf) {
        for (int k = 0; k < iq; ++k) u_plus[static_cast<std::size_t>(k)] -= t * r(k);
        u_plus.back() += t;
        drop(static_cast<std::size_t>(l), u_plus);
        continue;
      }

      res.x += t * z;
      res.objective += t * zn * (0.5 * t + u_plus.back());
      for (int k = 0; k < iq; ++k) u_plus[static_cast<std::size_t>(k)] -= t * r(k);
      u_plus.back() += t;

      if (t == t2) {
        for (Eigen::Index j = n - 1; j > iq; --j) {
          const Givens g = givens(d(j - 1), d(j));
          if (g.h == 0.0) continue;
          d(j - 1) = g.h;
          d(j) = 0.0;
          for (Eigen::Index k = 0; k < n; ++k) {
            const double a = J(k, j - 1);
            const double b = J(k, j);
            J(k, j - 1) = g.c * a + g.s * b;
            J(k, j) = -g.s * a + g.c * b;
          }
        }
        R.col(iq).head(iq + 1) = d.head(iq + 1);
        if (std::abs(d(iq)) <= std::numeric_limits<double>::epsilon() * r_norm) {
          // Linearly dependent with the working set; treat the step as taken.
          R.col(iq).setZero();
          u_plus.pop_back();
          u = u_plus;
          added = true;
          break;
        }
        r_norm = std::max(r_norm, std::abs(d(iq)));
        active.push_back(static_cast<int>(p));
        is_active[static_cast<std::size_t>(p)] = 1;
        u = u_plus;
        added = true;
      } else {
        drop(static_cast<std::size_t>(l), u_plus);
        sp = np.dot(res.x) - qp.b(p);
      }
    }
    if (!added) {
      res.status = QpStatus::MaxIterations;
      break;
    }
  }

  for (std::size_t k = 0; k < active.size(); ++k) {
    res.multipliers(active[k]) = u[k];
  }
  res.active_set = active;
  res.iterations = iter;
  return res;
}

double kkt_residual(const QpProblem& qp, const QpResult& res) {
  const Eigen::VectorXd grad = qp.H * res.x + qp.g - qp.C.transpose() * res.multipliers;
  double worst = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (qp.C.rows() > 0) {
    const Eigen::VectorXd s = qp.C * res.x - qp.b;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      worst = std::max(worst, std::max(0.0, -s(i)));
      worst = std::max(worst, std::abs(res.multipliers(i) * s(i)));
      worst = std::max(worst, std::max(0.0, -res.multipliers(i)));
    }
  }
  return worst;
}

}  // namespace racing
