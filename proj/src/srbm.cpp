#include "mpctune/srbm.hpp"

#include <cmath>

namespace mpctune::srbm {

namespace {

// d/dpsi of Rz(psi)^T.
Mat3 euler_rate_map_dpsi(double psi) {
  Mat3 d;
  const double c = std::cos(psi), s = std::sin(psi);
  d << -s, c, 0, -c, -s, 0, 0, 0, 0;
  return d;
}

void check_inputs(const SrbmState& state, const ControlInput& u,
                  const FootConfig& feet) {
  if (!state.vec().allFinite() || !u.vec().allFinite() ||
      !feet.foot_pos[0].allFinite() || !feet.foot_pos[1].allFinite())
    throw std::invalid_argument("srbm: non-finite input");
  if (std::abs(state.euler.y()) >= M_PI / 2)
    throw std::invalid_argument("srbm: |pitch| >= pi/2 (Euler-rate map singular)");
}

}  // namespace

Mat3 euler_rate_map(double psi) { return yaw_rotation(psi).transpose(); }

Mat3 world_inertia(const RobotParams& params, double psi) {
  const Mat3 rz = yaw_rotation(psi);
  return rz * params.body_inertia * rz.transpose();
}

StateVec continuous_dynamics(const SrbmState& state, const ControlInput& u,
                             const FootConfig& feet,
                             const RobotParams& params) {
  check_inputs(state, u, feet);

  const double psi = state.euler.z();
  const Mat3 gi = world_inertia(params, psi);

  Vec3 torque = Vec3::Zero();
  Vec3 force = Vec3::Zero();
  for (int i = 0; i < kNumFeet; ++i) {
    const Vec3 r = feet.lever(i, state.com_pos);
    torque += r.cross(u.force(i)) + u.moment(i);
    force += u.force(i);
  }

  StateVec dx;
  dx.segment<3>(0) = euler_rate_map(psi) * state.ang_vel;
  dx.segment<3>(3) = state.com_vel;
  dx.segment<3>(6) = gi.ldlt().solve(torque);
  dx.segment<3>(9) = force / params.mass_kg - state.grav_aug;
  dx.segment<3>(12).setZero();
  return dx;
}

void linearize(const SrbmState& state, const ControlInput& u,
               const FootConfig& feet, const RobotParams& params,
               StateMat& a_cont, InputMat& b_cont) {
  check_inputs(state, u, feet);

  const double psi = state.euler.z();
  const Mat3 gi = world_inertia(params, psi);
  Eigen::LDLT<Mat3> gi_fact(gi);
  if (gi_fact.info() != Eigen::Success || !(gi.determinant() > 0))
    throw std::invalid_argument("srbm: singular world inertia");
  const Mat3 gi_inv = gi_fact.solve(Mat3::Identity());

  a_cont.setZero();
  b_cont.setZero();

  // Euler rows: T(psi) on omega, plus the yaw coupling T'(psi)*omega.
  a_cont.block<3, 3>(0, 6) = euler_rate_map(psi);
  a_cont.block<3, 1>(0, 2) = euler_rate_map_dpsi(psi) * state.ang_vel;

  // Position rows integrate velocity.
  a_cont.block<3, 3>(3, 9).setIdentity();

  // Angular-velocity rows.
  Vec3 torque = Vec3::Zero();
  Vec3 force_sum = Vec3::Zero();
  for (int i = 0; i < kNumFeet; ++i) {
    const Vec3 r = feet.lever(i, state.com_pos);
    torque += r.cross(u.force(i)) + u.moment(i);
    force_sum += u.force(i);
    b_cont.block<3, 3>(6, 3 * i) = gi_inv * skew(r);
    b_cont.block<3, 3>(6, 6 + 3 * i) = gi_inv;
    b_cont.block<3, 3>(9, 3 * i) = Mat3::Identity() / params.mass_kg;
  }
  // d(r x F)/d p_c = +skew(F) because r = p_f - p_c.
  a_cont.block<3, 3>(6, 3) = gi_inv * skew(force_sum);
  // d(GI^-1)/dpsi = -GI^-1 (dGI/dpsi) GI^-1.
  const Mat3 rz = yaw_rotation(psi);
  Mat3 rz_dpsi;
  {
    const double c = std::cos(psi), s = std::sin(psi);
    rz_dpsi << -s, -c, 0, c, -s, 0, 0, 0, 0;
  }
  const Mat3 gi_dpsi = rz_dpsi * params.body_inertia * rz.transpose() +
                       rz * params.body_inertia * rz_dpsi.transpose();
  a_cont.block<3, 1>(6, 2) = -gi_inv * gi_dpsi * gi_inv * torque;

  // Velocity rows: gravity state enters with -I (m(p" + g) = sum F).
  a_cont.block<3, 3>(9, 12) = -Mat3::Identity();
}

LinearizedDynamics discretize(const StateMat& a_cont, const InputMat& b_cont,
                              double dt) {
  if (!(dt > 0)) throw std::invalid_argument("discretize: dt must be positive");
  if (!a_cont.allFinite() || !b_cont.allFinite())
    throw std::invalid_argument("discretize: non-finite input");
  LinearizedDynamics lin;
  lin.a_cont = a_cont;
  lin.b_cont = b_cont;
  lin.a_disc = StateMat::Identity() + a_cont * dt;
  lin.b_disc = b_cont * dt;
  lin.dt = dt;
  return lin;
}

}  // namespace mpctune::srbm
