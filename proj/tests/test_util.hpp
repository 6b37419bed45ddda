#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "mpctune/qp.hpp"
#include "mpctune/rng.hpp"
#include "mpctune/state.hpp"

namespace mpctune::testing {

// Corrected relative error: small absolute differences are ignored.
inline double rel_error(double actual, double expected, double atol = 1e-9) {
  const double num = std::max(0.0, std::abs(actual - expected) - atol);
  return num / (std::abs(actual) + std::abs(expected) + atol);
}

inline double max_rel_error(const Eigen::MatrixXd& actual,
                            const Eigen::MatrixXd& expected,
                            double atol = 1e-9) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < actual.rows(); ++i)
    for (Eigen::Index j = 0; j < actual.cols(); ++j)
      worst = std::max(worst, rel_error(actual(i, j), expected(i, j), atol));
  return worst;
}

inline SrbmState random_state(Rng& rng, const RobotParams& params,
                              double tilt = 0.3) {
  SrbmState s;
  s.euler = Vec3(rng.uniform(-tilt, tilt), rng.uniform(-tilt, tilt),
                 rng.uniform(-M_PI, M_PI));
  s.com_pos = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                   params.com_height_m + rng.uniform(-0.1, 0.1));
  s.ang_vel = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  s.com_vel = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  s.grav_aug = params.gravity;
  return s;
}

inline ControlInput random_control(Rng& rng, double f_scale = 100.0,
                                   double m_scale = 15.0) {
  ControlVec u;
  for (int i = 0; i < 6; ++i) u(i) = rng.uniform(-f_scale, f_scale);
  for (int i = 6; i < 12; ++i) u(i) = rng.uniform(-m_scale, m_scale);
  return ControlInput::from_vec(u);
}

inline FootConfig random_feet(Rng& rng, const SrbmState& state) {
  FootConfig feet;
  for (int i = 0; i < kNumFeet; ++i) {
    feet.foot_pos[static_cast<std::size_t>(i)] =
        state.com_pos + Vec3(rng.uniform(-0.2, 0.2),
                             rng.uniform(-0.2, 0.2) + (i == 0 ? 0.05 : -0.05),
                             -state.com_pos.z());
    feet.in_stance[static_cast<std::size_t>(i)] = true;
  }
  return feet;
}

// Exhaustive active-set enumeration oracle for small strictly convex QPs.
// Solves every full-rank equality-constrained subproblem and keeps the
// KKT-consistent candidate with the lowest objective.
inline std::optional<Eigen::VectorXd> brute_force_qp(const QpProblem& qp,
                                                     double tol = 1e-7) {
  const int n = qp.num_vars();
  const int m = qp.num_constraints();
  std::optional<Eigen::VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
      if (mask & (1ul << i)) active.push_back(i);
    if (static_cast<int>(active.size()) > n) continue;
    const int na = static_cast<int>(active.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
    kkt.topLeftCorner(n, n) = qp.H;
    for (int a = 0; a < na; ++a) {
      kkt.block(0, n + a, n, 1) = qp.G.row(active[static_cast<std::size_t>(a)]).transpose();
      kkt.block(n + a, 0, 1, n) = qp.G.row(active[static_cast<std::size_t>(a)]);
    }
    Eigen::VectorXd rhs(n + na);
    rhs.head(n) = -qp.f;
    for (int a = 0; a < na; ++a)
      rhs(n + a) = qp.h(active[static_cast<std::size_t>(a)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd u = sol.head(n);
    const Eigen::VectorXd lam = sol.tail(na);
    if (lam.size() > 0 && lam.minCoeff() < -tol) continue;
    if (((qp.G * u - qp.h).array() > tol).any()) continue;
    const double obj = qp.objective(u);
    if (obj < best_obj) {
      best_obj = obj;
      best = u;
    }
  }
  return best;
}

}  // namespace mpctune::testing
