#pragma once

#include <array>
#include <vector>

#include "mpctune/qp.hpp"
#include "mpctune/state.hpp"

namespace mpctune {

inline constexpr int kThetaDim = 24;  // [q_diag; r_diag]
using ThetaVec = Eigen::Matrix<double, kThetaDim, 1>;

// Tunable diagonal cost weights. q_diag covers the e, p_c, omega, v_c blocks;
// the three gravity-state weights are frozen at zero (their reference always
// equals the state, so any weight would be inert).
struct MpcTheta {
  Eigen::Matrix<double, 12, 1> q_diag;
  Eigen::Matrix<double, 12, 1> r_diag;

  static MpcTheta nominal() {
    MpcTheta t;
    t.q_diag << 100, 100, 100, 100, 100, 100, 1, 1, 1, 1, 1, 1;
    t.r_diag.setConstant(1e-3);
    return t;
  }

  ThetaVec flat() const {
    ThetaVec v;
    v << q_diag, r_diag;
    return v;
  }

  static MpcTheta from_flat(const ThetaVec& v) {
    MpcTheta t;
    t.q_diag = v.head<12>();
    t.r_diag = v.tail<12>();
    return t;
  }

  // Full 15-dim state-cost diagonal (gravity rows zero).
  Eigen::Matrix<double, kStateDim, 1> q_full() const {
    Eigen::Matrix<double, kStateDim, 1> q = Eigen::Matrix<double, kStateDim, 1>::Zero();
    q.head<12>() = q_diag;
    return q;
  }
};

// Feasible box for theta.
struct ThetaBounds {
  ThetaVec lo;
  ThetaVec hi;

  static ThetaBounds defaults() {
    ThetaBounds b;
    b.lo.head<12>().setConstant(1e-4);
    b.hi.head<12>().setConstant(1e6);
    b.lo.tail<12>().setConstant(1e-8);
    b.hi.tail<12>().setConstant(1e2);
    return b;
  }

  bool contains(const ThetaVec& v) const {
    return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
  }

  ThetaVec clamp(const ThetaVec& v) const {
    return v.cwiseMax(lo).cwiseMin(hi);
  }
};

struct MpcConfig {
  int horizon = 10;
  double dt_s = 0.04;
  // Linearize/condense with the reference yaw of each horizon step instead of
  // a single current-yaw point.
  bool yaw_varying = false;
  QpSettings qp;

  void validate() const {
    if (horizon < 2) throw std::invalid_argument("mpc: horizon must be >= 2");
    if (!(dt_s > 0)) throw std::invalid_argument("mpc: dt must be positive");
  }
};

inline constexpr int kRowsPerFoot = 12;  // pyramid 4, Fz 2, Mx 2, My 2, Mz 2

// Condensed QP over the stacked input sequence, plus everything the KKT
// differentiation needs. States x_1..x_{N-1} are eliminated through the
// discrete dynamics; the k = 0 tracking term is a constant and is kept only
// in `objective_offset`.
struct MpcQpData {
  QpProblem qp;
  Eigen::MatrixXd state_map;     // S: 15(N-1) x 12N, x_k rows stacked k=1..N-1
  Eigen::MatrixXd free_response; // Phi: 15(N-1) x 15
  Eigen::VectorXd xref_stack;    // 15(N-1)
  Eigen::VectorXd q_bar;         // state-cost diagonal, stacked (k=1..N-1)
  Eigen::VectorXd r_bar;         // input-cost diagonal, stacked (k=0..N-1)
  StateVec x0;
  MpcTheta theta;
  double objective_offset = 0.0;
  int horizon = 0;
  std::vector<std::array<bool, kNumFeet>> contacts;
};

struct MpcSolution {
  QpStatus status = QpStatus::Optimal;
  Eigen::VectorXd u_stacked;    // 12N
  ControlVec u0;                // applied action
  std::vector<int> active_set;
  Eigen::VectorXd duals;
  double kkt_residual = 0.0;
  double objective = 0.0;       // Eq-(3)-style cost including the k=0 constant
  int iterations = 0;
};

struct PolicyJacobians {
  Eigen::Matrix<double, kControlDim, kStateDim> du_dx =
      Eigen::Matrix<double, kControlDim, kStateDim>::Zero();
  Eigen::Matrix<double, kControlDim, kThetaDim> du_dtheta =
      Eigen::Matrix<double, kControlDim, kThetaDim>::Zero();
  bool degenerate = false;       // singular KKT, least-squares fallback used
  bool weak_complementarity = false;
};

// Build the condensed GRFM MPC. `refs` and `contacts` must have length N;
// refs[0] pairs with the (constant) k = 0 tracking term. Constraint rows per
// (step, foot): friction pyramid (4), vertical force limit with F_max = 0 for
// swing feet (2), body-frame M_x = 0 as an opposing pair (2), line-foot
// -l_h Fz <= M_y <= l_t Fz in the body frame (2), torsional |M_z| <= mu_t Fz (2).
// `lin_state` (default x0) fixes the linearization point independently of the
// initial state, which is the map differentiate_policy differentiates w.r.t. x0.
MpcQpData build_qp(const StateVec& x0, const std::vector<StateVec>& refs,
                   const std::vector<std::array<bool, kNumFeet>>& contacts,
                   const FootConfig& feet, const MpcTheta& theta,
                   const MpcConfig& cfg, const RobotParams& params,
                   const StateVec* lin_state = nullptr);

MpcSolution solve(const MpcQpData& data, const QpSettings& settings = {});

// Fixed-active-set KKT differentiation of the first control action.
// theta enters through the cost Hessian and gradient; x0 through the
// condensed cost gradient (the linearization point is treated as data).
PolicyJacobians differentiate_policy(const MpcQpData& data,
                                     const MpcSolution& sol,
                                     double dual_eps = 1e-8,
                                     double slack_eps = 1e-8);

}  // namespace mpctune
