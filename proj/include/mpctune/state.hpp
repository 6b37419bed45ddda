#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>

namespace mpctune {

inline constexpr int kStateDim = 15;    // [e; p_c; omega; v_c; g]
inline constexpr int kControlDim = 12;  // [F0; F1; M0; M1]
inline constexpr int kNumFeet = 2;
inline constexpr int kHistoryLen = 3;  // command-history window w

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kControlDim>;

// Physical constants of the plant and of the single-rigid-body model.
// Mass and gravity magnitude are the robot's published figures; inertia and
// foot geometry are plausible defaults for a 12 kg biped and are configurable
// (they are not published values).
struct RobotParams {
  double mass_kg = 12.0;
  Mat3 body_inertia = Vec3(0.168, 0.117, 0.064).asDiagonal();
  double toe_length_m = 0.09;
  double heel_length_m = 0.06;
  double friction_mu = 0.5;
  double torsional_mu_m = 0.05;
  double f_max_n = 500.0;
  // Gravity acts along -z. Stored in the m(p" + g) = sum(F) sign convention,
  // so the vector itself is (0, 0, +9.81) and free fall is p" = -g.
  Vec3 gravity = Vec3(0.0, 0.0, 9.81);
  double hip_width_m = 0.094;  // lateral foot offset is +/- hip_width/2
  double com_height_m = 0.55;

  void validate() const {
    if (!(mass_kg > 0)) throw std::invalid_argument("mass must be positive");
    if (!(toe_length_m > 0 && heel_length_m > 0 && friction_mu > 0 &&
          torsional_mu_m > 0 && f_max_n > 0))
      throw std::invalid_argument("foot geometry and limits must be positive");
    if ((body_inertia - body_inertia.transpose()).norm() > 1e-12)
      throw std::invalid_argument("body inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(body_inertia);
    if (es.eigenvalues().minCoeff() <= 0)
      throw std::invalid_argument("body inertia must be positive definite");
  }
};

// 15-dim model state x = [e; p_c; omega; v_c; g]. The gravity rows are a
// constant state (zero dynamics) so the linear model needs no affine term.
struct SrbmState {
  Vec3 euler = Vec3::Zero();      // roll, pitch, yaw [rad]
  Vec3 com_pos = Vec3::Zero();    // [m]
  Vec3 ang_vel = Vec3::Zero();    // world frame [rad/s]
  Vec3 com_vel = Vec3::Zero();    // [m/s]
  Vec3 grav_aug = Vec3::Zero();   // equals RobotParams.gravity at all times

  StateVec vec() const {
    StateVec x;
    x << euler, com_pos, ang_vel, com_vel, grav_aug;
    return x;
  }

  static SrbmState from_vec(const StateVec& x) {
    SrbmState s;
    s.euler = x.segment<3>(0);
    s.com_pos = x.segment<3>(3);
    s.ang_vel = x.segment<3>(6);
    s.com_vel = x.segment<3>(9);
    s.grav_aug = x.segment<3>(12);
    return s;
  }
};

// 12-dim control u = [F0; F1; M0; M1], world frame.
struct ControlInput {
  Vec3 f0 = Vec3::Zero();
  Vec3 f1 = Vec3::Zero();
  Vec3 m0 = Vec3::Zero();
  Vec3 m1 = Vec3::Zero();

  ControlVec vec() const {
    ControlVec u;
    u << f0, f1, m0, m1;
    return u;
  }

  static ControlInput from_vec(const ControlVec& u) {
    ControlInput c;
    c.f0 = u.segment<3>(0);
    c.f1 = u.segment<3>(3);
    c.m0 = u.segment<3>(6);
    c.m1 = u.segment<3>(9);
    return c;
  }

  Vec3 force(int foot) const { return foot == 0 ? f0 : f1; }
  Vec3 moment(int foot) const { return foot == 0 ? m0 : m1; }
};

// World-frame foot centers and stance flags. Lever arms are always computed
// from the CoM on demand, never cached, so they cannot go stale.
struct FootConfig {
  std::array<Vec3, kNumFeet> foot_pos{Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumFeet> in_stance{true, true};

  Vec3 lever(int foot, const Vec3& com_pos) const {
    return foot_pos[static_cast<std::size_t>(foot)] - com_pos;
  }
};

// Continuous-time Jacobians plus their forward-Euler discretization.
struct LinearizedDynamics {
  StateMat a_cont = StateMat::Zero();
  InputMat b_cont = InputMat::Zero();
  StateMat a_disc = StateMat::Identity();
  InputMat b_disc = InputMat::Zero();
  double dt = 0.0;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

inline Mat3 yaw_rotation(double psi) {
  Mat3 r;
  const double c = std::cos(psi), s = std::sin(psi);
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

}  // namespace mpctune
