#pragma once

#include "mpctune/state.hpp"

namespace mpctune::srbm {

// Euler-rate map under the yaw-only (small roll/pitch) convention:
// e_dot = T(psi) * omega with T(psi) = Rz(psi)^T.
Mat3 euler_rate_map(double psi);

// World-frame inertia via yaw-only rotation of the body inertia.
Mat3 world_inertia(const RobotParams& params, double psi);

// x_dot = [T(psi) w; v; GI^-1 sum(r_i x F_i + M_i); sum(F_i)/m - g; 0].
// Forces and moments of swing feet still enter the sums; the controller, not
// the model, is responsible for zeroing them. The gyroscopic term
// w x (GI w) is dropped so the model is exactly control-affine.
StateVec continuous_dynamics(const SrbmState& state, const ControlInput& u,
                             const FootConfig& feet,
                             const RobotParams& params);

// Exact analytic Jacobians of continuous_dynamics at (state, u).
// a_cont = df/dx, b_cont = df/du. Evaluating at omega = 0, u = 0 yields the
// block-structured matrices the convex MPC uses as its LTI model.
void linearize(const SrbmState& state, const ControlInput& u,
               const FootConfig& feet, const RobotParams& params,
               StateMat& a_cont, InputMat& b_cont);

// Forward Euler: A_disc = I + a_cont*dt, B_disc = b_cont*dt.
LinearizedDynamics discretize(const StateMat& a_cont, const InputMat& b_cont,
                              double dt);

}  // namespace mpctune::srbm
