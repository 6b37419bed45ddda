#include "mpctune/mpc.hpp"

#include <cmath>

#include "mpctune/srbm.hpp"

namespace mpctune {

namespace {

// Constraint block for one (step, foot) at yaw psi. Rows act on the 6 local
// columns [F; M] of that foot.
void fill_foot_rows(Eigen::MatrixXd& G, Eigen::VectorXd& h, int row0, int fcol,
                    int mcol, double psi, double f_max, double mu, double mu_t,
                    double l_t, double l_h) {
  const double c = std::cos(psi), s = std::sin(psi);
  // Friction pyramid: +-Fx <= mu Fz, +-Fy <= mu Fz.
  G(row0 + 0, fcol + 0) = 1.0;
  G(row0 + 0, fcol + 2) = -mu;
  G(row0 + 1, fcol + 0) = -1.0;
  G(row0 + 1, fcol + 2) = -mu;
  G(row0 + 2, fcol + 1) = 1.0;
  G(row0 + 2, fcol + 2) = -mu;
  G(row0 + 3, fcol + 1) = -1.0;
  G(row0 + 3, fcol + 2) = -mu;
  // Vertical force limit: 0 <= Fz <= F_max (F_max = 0 in swing).
  G(row0 + 4, fcol + 2) = 1.0;
  h(row0 + 4) = f_max;
  G(row0 + 5, fcol + 2) = -1.0;
  // Body-frame Mx = 0 as an opposing pair.
  G(row0 + 6, mcol + 0) = c;
  G(row0 + 6, mcol + 1) = s;
  G(row0 + 7, mcol + 0) = -c;
  G(row0 + 7, mcol + 1) = -s;
  // Line foot: -l_h Fz <= body My <= l_t Fz.
  G(row0 + 8, mcol + 0) = -s;
  G(row0 + 8, mcol + 1) = c;
  G(row0 + 8, fcol + 2) = -l_t;
  G(row0 + 9, mcol + 0) = s;
  G(row0 + 9, mcol + 1) = -c;
  G(row0 + 9, fcol + 2) = -l_h;
  // Torsional cap: +-Mz <= mu_t Fz.
  G(row0 + 10, mcol + 2) = 1.0;
  G(row0 + 10, fcol + 2) = -mu_t;
  G(row0 + 11, mcol + 2) = -1.0;
  G(row0 + 11, fcol + 2) = -mu_t;
}

}  // namespace

MpcQpData build_qp(const StateVec& x0, const std::vector<StateVec>& refs,
                   const std::vector<std::array<bool, kNumFeet>>& contacts,
                   const FootConfig& feet, const MpcTheta& theta,
                   const MpcConfig& cfg, const RobotParams& params,
                   const StateVec* lin_state) {
  cfg.validate();
  const StateVec lin_x = lin_state ? *lin_state : x0;
  const int N = cfg.horizon;
  if (static_cast<int>(refs.size()) != N ||
      static_cast<int>(contacts.size()) != N)
    throw std::invalid_argument("build_qp: refs/contacts length != horizon");
  if (!x0.allFinite()) throw std::invalid_argument("build_qp: non-finite x0");
  for (int k = 0; k < N; ++k) {
    if (!contacts[static_cast<std::size_t>(k)][0] &&
        !contacts[static_cast<std::size_t>(k)][1])
      throw std::invalid_argument("build_qp: no stance foot at step " +
                                  std::to_string(k));
  }

  const int nu = kControlDim * N;
  const int nx_stack = kStateDim * (N - 1);

  // Per-step discrete models. The linearization point freezes omega and u at
  // zero so x_{k+1} = A x_k + B u_k holds without an affine residual; the yaw
  // (and with it T(psi), the world inertia, and the moment constraint frame)
  // comes from x0, or from the per-step reference in yaw-varying mode.
  std::vector<StateMat> a_disc(static_cast<std::size_t>(N));
  std::vector<InputMat> b_disc(static_cast<std::size_t>(N));
  std::vector<double> psi_k(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const double psi =
        cfg.yaw_varying ? refs[static_cast<std::size_t>(k)](2) : lin_x(2);
    psi_k[static_cast<std::size_t>(k)] = psi;
    SrbmState lin_point = SrbmState::from_vec(lin_x);
    lin_point.euler = Vec3(0.0, 0.0, psi);
    lin_point.ang_vel.setZero();
    StateMat a_cont;
    InputMat b_cont;
    srbm::linearize(lin_point, ControlInput{}, feet, params, a_cont, b_cont);
    const LinearizedDynamics lin = srbm::discretize(a_cont, b_cont, cfg.dt_s);
    a_disc[static_cast<std::size_t>(k)] = lin.a_disc;
    b_disc[static_cast<std::size_t>(k)] = lin.b_disc;
    if (!cfg.yaw_varying) {
      // Identical for every step; reuse.
      for (int kk = k + 1; kk < N; ++kk) {
        psi_k[static_cast<std::size_t>(kk)] = psi;
        a_disc[static_cast<std::size_t>(kk)] = lin.a_disc;
        b_disc[static_cast<std::size_t>(kk)] = lin.b_disc;
      }
      break;
    }
  }

  MpcQpData data;
  data.horizon = N;
  data.x0 = x0;
  data.theta = theta;
  data.contacts = contacts;

  // Condensation: x_k = Phi_k x0 + sum_l S_{k,l} u_l, rows k = 1..N-1.
  data.state_map = Eigen::MatrixXd::Zero(nx_stack, nu);
  data.free_response = Eigen::MatrixXd::Zero(nx_stack, kStateDim);
  data.xref_stack = Eigen::VectorXd::Zero(nx_stack);
  StateMat phi = StateMat::Identity();
  std::vector<Eigen::Matrix<double, kStateDim, kControlDim>> blocks;
  for (int k = 1; k < N; ++k) {
    const auto& a_prev = a_disc[static_cast<std::size_t>(k - 1)];
    for (auto& blk : blocks) blk = a_prev * blk;
    blocks.push_back(b_disc[static_cast<std::size_t>(k - 1)]);
    phi = a_prev * phi;
    const int row = kStateDim * (k - 1);
    data.free_response.block<kStateDim, kStateDim>(row, 0) = phi;
    for (int l = 0; l < k; ++l)
      data.state_map.block<kStateDim, kControlDim>(row, kControlDim * l) =
          blocks[static_cast<std::size_t>(l)];
    data.xref_stack.segment<kStateDim>(row) = refs[static_cast<std::size_t>(k)];
  }

  // Stacked cost diagonals.
  data.q_bar = Eigen::VectorXd::Zero(nx_stack);
  data.r_bar = Eigen::VectorXd::Zero(nu);
  const auto q_full = theta.q_full();
  for (int k = 1; k < N; ++k)
    data.q_bar.segment<kStateDim>(kStateDim * (k - 1)) = q_full;
  for (int k = 0; k < N; ++k)
    data.r_bar.segment<kControlDim>(kControlDim * k) = theta.r_diag;

  // H = 2 (S'QS + R), f = 2 S'Q (Phi x0 - Xref).
  const Eigen::MatrixXd qs = data.q_bar.asDiagonal() * data.state_map;
  data.qp.H = 2.0 * (data.state_map.transpose() * qs);
  data.qp.H.diagonal() += 2.0 * data.r_bar;
  const Eigen::VectorXd free_err = data.free_response * x0 - data.xref_stack;
  data.qp.f = 2.0 * (qs.transpose() * free_err);

  const StateVec err0 = x0 - refs[0];
  data.objective_offset = err0.dot(q_full.asDiagonal() * err0);

  // Constraints.
  const int rows = N * kNumFeet * kRowsPerFoot;
  data.qp.G = Eigen::MatrixXd::Zero(rows, nu);
  data.qp.h = Eigen::VectorXd::Zero(rows);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < kNumFeet; ++i) {
      const int row0 = (k * kNumFeet + i) * kRowsPerFoot;
      const int fcol = kControlDim * k + 3 * i;
      const int mcol = kControlDim * k + 6 + 3 * i;
      const double f_max =
          contacts[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]
              ? params.f_max_n
              : 0.0;
      fill_foot_rows(data.qp.G, data.qp.h, row0, fcol, mcol,
                     psi_k[static_cast<std::size_t>(k)], f_max,
                     params.friction_mu, params.torsional_mu_m,
                     params.toe_length_m, params.heel_length_m);
    }
  }
  return data;
}

MpcSolution solve(const MpcQpData& data, const QpSettings& settings) {
  const QpSolution qs = solve_qp(data.qp, settings);
  MpcSolution sol;
  sol.status = qs.status;
  sol.u_stacked = qs.u;
  sol.u0 = qs.u.head<kControlDim>();
  sol.active_set = qs.active_set;
  sol.duals = qs.duals;
  sol.kkt_residual = qs.kkt_residual;
  sol.objective = qs.objective + data.objective_offset;
  sol.iterations = qs.iterations;
  return sol;
}

PolicyJacobians differentiate_policy(const MpcQpData& data,
                                     const MpcSolution& sol, double dual_eps,
                                     double slack_eps) {
  PolicyJacobians jac;
  const int nu = static_cast<int>(sol.u_stacked.size());
  const int na = static_cast<int>(sol.active_set.size());
  const int N = data.horizon;

  // Strict complementarity check: every active constraint should carry a
  // clearly positive dual and every inactive one clear slack.
  const Eigen::VectorXd slack = data.qp.G * sol.u_stacked - data.qp.h;
  {
    std::size_t a = 0;
    for (int i = 0; i < data.qp.num_constraints(); ++i) {
      const bool is_act = a < sol.active_set.size() &&
                          sol.active_set[a] == i;
      if (is_act) {
        if (sol.duals(i) < dual_eps) jac.weak_complementarity = true;
        ++a;
      } else if (slack(i) > -slack_eps) {
        jac.weak_complementarity = true;
      }
    }
  }

  // RHS columns of the fixed-active-set KKT system, one per parameter.
  // Stationarity: H u + f + G_A' lam = 0; differentiating w.r.t. p gives
  //   H du + G_A' dlam = -(dH/dp u + df/dp),  G_A du = 0.
  // q_i: dH/dp u + df/dp = 2 S' D_i (S u + Phi x0 - Xref) = 2 S' D_i e_x.
  // r_i: 2 D_i u.  x0_j: 2 S' Qbar Phi e_j.
  const Eigen::VectorXd e_x = data.state_map * sol.u_stacked +
                              data.free_response * data.x0 - data.xref_stack;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nu + na, kThetaDim + kStateDim);
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd masked = Eigen::VectorXd::Zero(e_x.size());
    for (int k = 0; k + 1 < N; ++k)
      masked(kStateDim * k + i) = e_x(kStateDim * k + i);
    rhs.block(0, i, nu, 1) = -2.0 * (data.state_map.transpose() * masked);
  }
  for (int i = 0; i < 12; ++i) {
    for (int k = 0; k < N; ++k)
      rhs(kControlDim * k + i, 12 + i) = -2.0 * sol.u_stacked(kControlDim * k + i);
  }
  const Eigen::MatrixXd df_dx0 =
      2.0 * (data.state_map.transpose() *
             (data.q_bar.asDiagonal() * data.free_response));
  rhs.block(0, kThetaDim, nu, kStateDim) = -df_dx0;

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nu + na, nu + na);
  kkt.topLeftCorner(nu, nu) = data.qp.H;
  for (int a = 0; a < na; ++a) {
    const int idx = sol.active_set[static_cast<std::size_t>(a)];
    kkt.block(0, nu + a, nu, 1) = data.qp.G.row(idx).transpose();
    kkt.block(nu + a, 0, 1, nu) = data.qp.G.row(idx);
  }

  Eigen::MatrixXd dsol;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  dsol = lu.solve(rhs);
  // Guard against a rank-deficient active set: fall back to least squares.
  const double resid = (kkt * dsol - rhs).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (!dsol.allFinite() || resid > 1e-6 * scale) {
    dsol = kkt.completeOrthogonalDecomposition().solve(rhs);
    jac.degenerate = true;
  }

  jac.du_dtheta = dsol.block(0, 0, kControlDim, kThetaDim);
  jac.du_dx = dsol.block(0, kThetaDim, kControlDim, kStateDim);
  return jac;
}

}  // namespace mpctune
