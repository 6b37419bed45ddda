#include "mpctune/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpctune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// KKT solve with the working set treated as equalities, with iterative
// refinement. Returns false if the KKT matrix is singular.
bool solve_working_kkt(const QpProblem& qp, const std::vector<int>& active,
                       int refine_steps, Eigen::VectorXd& u,
                       Eigen::VectorXd& lam) {
  const int n = qp.num_vars();
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) = qp.H;
  for (int a = 0; a < na; ++a) {
    kkt.block(0, n + a, n, 1) = qp.G.row(active[static_cast<std::size_t>(a)]).transpose();
    kkt.block(n + a, 0, 1, n) = qp.G.row(active[static_cast<std::size_t>(a)]);
  }
  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -qp.f;
  for (int a = 0; a < na; ++a) rhs(n + a) = qp.h(active[static_cast<std::size_t>(a)]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  for (int r = 0; r < refine_steps; ++r) {
    sol += lu.solve(rhs - kkt * sol);
  }
  if (!sol.allFinite()) return false;
  u = sol.head(n);
  lam = sol.tail(na);
  return true;
}

}  // namespace

double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& duals) {
  const Eigen::VectorXd stat = qp.H * u + qp.f + qp.G.transpose() * duals;
  double r = stat.lpNorm<Eigen::Infinity>();
  if (qp.num_constraints() > 0) {
    const Eigen::VectorXd slack = qp.G * u - qp.h;
    r = std::max(r, slack.maxCoeff());                  // primal feasibility
    r = std::max(r, -std::min(0.0, duals.minCoeff()));  // dual feasibility
    r = std::max(r, (duals.array() * slack.array()).abs().maxCoeff());
  }
  return r;
}

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  if (qp.H.rows() != n || qp.H.cols() != n || qp.f.size() != n ||
      qp.h.size() != m || (m > 0 && qp.G.cols() != n))
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  if (!qp.H.allFinite() || !qp.f.allFinite() ||
      (m > 0 && (!qp.G.allFinite() || !qp.h.allFinite())))
    throw std::invalid_argument("solve_qp: non-finite problem data");

  Eigen::LLT<Eigen::MatrixXd> hfact(qp.H);
  if (hfact.info() != Eigen::Success)
    throw std::invalid_argument("solve_qp: Hessian not positive definite");

  QpSolution out;
  out.u = -hfact.solve(qp.f);
  out.duals = Eigen::VectorXd::Zero(m);
  if (m == 0) {
    out.objective = qp.objective(out.u);
    out.kkt_residual = kkt_residual(qp, out.u, out.duals);
    return out;
  }

  std::vector<int> active;   // working set, insertion order
  Eigen::VectorXd lam(0);    // working-set duals, same order
  Eigen::MatrixXd W(n, 0);   // H^-1 G_A'
  Eigen::MatrixXd M(0, 0);   // G_A H^-1 G_A'
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);
  const int max_iter =
      settings.max_iterations > 0 ? settings.max_iterations : 20 * m + 200;

  auto append_active = [&](int idx, double lam_idx,
                           const Eigen::VectorXd& hinv_g) {
    const int na = static_cast<int>(active.size());
    W.conservativeResize(Eigen::NoChange, na + 1);
    W.col(na) = hinv_g;
    M.conservativeResize(na + 1, na + 1);
    for (int a = 0; a < na; ++a) {
      const double v = qp.G.row(active[static_cast<std::size_t>(a)]).dot(hinv_g);
      M(a, na) = v;
      M(na, a) = v;
    }
    M(na, na) = qp.G.row(idx).dot(hinv_g);
    active.push_back(idx);
    is_active[static_cast<std::size_t>(idx)] = 1;
    lam.conservativeResize(na + 1);
    lam(na) = lam_idx;
  };

  auto drop_active = [&](int pos) {
    const int na = static_cast<int>(active.size());
    is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(pos)])] = 0;
    for (int c = pos; c + 1 < na; ++c) {
      active[static_cast<std::size_t>(c)] = active[static_cast<std::size_t>(c + 1)];
      W.col(c) = W.col(c + 1);
      lam(c) = lam(c + 1);
    }
    active.pop_back();
    W.conservativeResize(Eigen::NoChange, na - 1);
    lam.conservativeResize(na - 1);
    // Remove row/col pos from M.
    for (int rr = pos; rr + 1 < na; ++rr) M.row(rr) = M.row(rr + 1);
    for (int cc = pos; cc + 1 < na; ++cc) M.col(cc) = M.col(cc + 1);
    M.conservativeResize(na - 1, na - 1);
  };

  int iter = 0;
  bool aborted = false;
  while (!aborted) {
    if (++iter > max_iter) {
      out.status = QpStatus::MaxIterations;
      break;
    }

    // Most violated constraint outside the working set, lowest index on ties.
    const Eigen::VectorXd slack = qp.G * out.u - qp.h;
    int p = -1;
    double worst = settings.feas_tol;
    for (int i = 0; i < m; ++i) {
      if (!is_active[static_cast<std::size_t>(i)] && slack(i) > worst) {
        worst = slack(i);
        p = i;
      }
    }
    if (p < 0) break;  // primal feasible: optimal

    const Eigen::VectorXd np = qp.G.row(p).transpose();
    const Eigen::VectorXd hinv_np = hfact.solve(np);
    double lam_p = 0.0;
    double sp = slack(p);

    // Walk toward making constraint p tight, dropping blocking constraints
    // as their duals reach zero.
    while (true) {
      if (++iter > max_iter) {
        out.status = QpStatus::MaxIterations;
        aborted = true;
        break;
      }
      const int na = static_cast<int>(active.size());
      Eigen::VectorXd r(na);
      Eigen::VectorXd z = hinv_np;
      if (na > 0) {
        Eigen::VectorXd rhs(na);
        for (int a = 0; a < na; ++a)
          rhs(a) = qp.G.row(active[static_cast<std::size_t>(a)]).dot(hinv_np);
        r = M.ldlt().solve(rhs);
        z -= W * r;
      }

      const double znorm = z.lpNorm<Eigen::Infinity>();
      // Blocking dual step length.
      double t1 = kInf;
      int k = -1;
      for (int a = 0; a < na; ++a) {
        if (r(a) > settings.dependency_tol) {
          const double t = lam(a) / r(a);
          if (t < t1) {
            t1 = t;
            k = a;
          }
        }
      }

      if (znorm <= settings.dependency_tol) {
        // No primal progress possible: constraint normal lies in the span of
        // the working set. Either step in the dual or certify infeasibility.
        if (k < 0) {
          out.status = QpStatus::Infeasible;
          aborted = true;
          break;
        }
        lam -= t1 * r;
        lam_p += t1;
        drop_active(k);
        continue;
      }

      const double denom = np.dot(z);  // equals z'Hz > 0
      const double t2 = sp / denom;
      const double t = std::min(t1, t2);
      out.u -= t * z;
      lam -= t * r;
      lam_p += t;
      sp -= t * denom;

      if (t2 <= t1) {
        append_active(p, lam_p, hinv_np);
        break;
      }
      drop_active(k);
    }
  }

  // Polish the final iterate on its working set and assemble full duals.
  if (out.status != QpStatus::Infeasible && !active.empty()) {
    Eigen::VectorXd u_pol, lam_pol;
    if (solve_working_kkt(qp, active, settings.refine_steps, u_pol, lam_pol)) {
      const Eigen::VectorXd slack_pol = qp.G * u_pol - qp.h;
      if (slack_pol.maxCoeff() < 10 * settings.feas_tol &&
          lam_pol.minCoeff() > -10 * settings.feas_tol) {
        out.u = u_pol;
        lam = lam_pol;
      }
    }
  }
  for (std::size_t a = 0; a < active.size(); ++a)
    out.duals(active[a]) = std::max(0.0, lam(static_cast<int>(a)));
  out.active_set.assign(active.begin(), active.end());
  std::sort(out.active_set.begin(), out.active_set.end());
  out.iterations = iter;
  out.objective = qp.objective(out.u);
  out.kkt_residual = kkt_residual(qp, out.u, out.duals);
  return out;
}

}  // namespace mpctune
