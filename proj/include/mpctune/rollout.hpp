#pragma once

#include <optional>
#include <string>

#include "mpctune/gait.hpp"
#include "mpctune/mpc.hpp"
#include "mpctune/plant.hpp"

namespace mpctune {

// Everything a closed-loop run needs besides theta and the actuation path.
struct ClosedLoopSetup {
  RobotParams robot;
  GaitSchedule gait;
  TrajectorySpec traj;
  MpcConfig mpc;
  int plant_substeps = 1;

  int default_steps() const {
    return static_cast<int>(std::llround(traj.duration_s / mpc.dt_s));
  }
};

// Stance feet hold their touchdown points; a swing foot carries its planned
// touchdown so the horizon model has a sensible lever arm once it lands.
// Touchdown targets are computed from the reference at the landing time, so
// foot positions never depend on the tuned parameters.
class FootTracker {
 public:
  void init(const ClosedLoopSetup& setup);
  void update(double t, const ClosedLoopSetup& setup);
  const FootConfig& feet() const { return feet_; }

 private:
  Vec3 touchdown_target(int foot, double t_land,
                        const ClosedLoopSetup& setup) const;
  FootConfig feet_;
};

struct ControllerStep {
  MpcQpData qp_data;
  MpcSolution sol;
  PolicyJacobians jac;
};

ControllerStep run_mpc(const StateVec& x, double t, const FootConfig& feet,
                       const MpcTheta& theta, const ClosedLoopSetup& setup,
                       bool with_jacobians);

struct NetPair {
  MlpParams force;
  MlpParams moment;
};

// Actuation model used inside the differentiable simulator: pass commands
// through unchanged, take the newest window column (identity on the current
// command; exercises the window plumbing), or run the learned nets.
struct Actuation {
  enum class Kind { Nominal, Identity, Nets };
  Kind kind = Kind::Nominal;
  std::optional<NetPair> nets;

  static Actuation nominal() { return {}; }
  static Actuation identity() { return {Kind::Identity, std::nullopt}; }
  static Actuation with_nets(NetPair pair) {
    return {Kind::Nets, std::move(pair)};
  }

  ControlVec effect(const CommandWindow& window) const;
};

struct Rollout {
  std::vector<double> t;            // length steps+1
  std::vector<StateVec> x;          // length steps+1
  std::vector<StateVec> x_ref;      // length steps+1
  std::vector<ControlVec> u_cmd;    // length steps
  std::vector<ControlVec> u_eff;    // length steps
  std::vector<std::array<bool, kNumFeet>> stance;
  std::vector<double> kkt_residual;
  std::vector<std::vector<int>> active_sets;
  std::vector<bool> low_confidence;  // degenerate policy differentiation
  bool fell = false;
  int fall_step = -1;

  int steps() const { return static_cast<int>(u_cmd.size()); }
};

// Eq-(9)-style loss terms of a rollout against its reference.
struct LossTerms {
  double l_eul = 0.0;
  double l_pos = 0.0;
  double l_ctrl = 0.0;

  double total(double alpha1, double alpha2) const {
    return alpha1 * l_eul + alpha2 * l_pos + l_ctrl;
  }
};

LossTerms rollout_loss(const Rollout& r);

// Closed loop on the differentiable simulator (nominal or net-augmented).
// Command windows pad missing history with the step's own command.
Rollout run_sim_rollout(const ClosedLoopSetup& setup, const MpcTheta& theta,
                        const Actuation& actuation, int steps = -1);

// Closed loop on the distorted surrogate plant.
Rollout run_plant_rollout(const ClosedLoopSetup& setup, const MpcTheta& theta,
                          const ActuatorDistortion& distortion,
                          std::uint64_t seed, const std::string& stream,
                          int steps = -1);

// Command/effect records from closed-loop plant rollouts over perturbed
// variants of the given trajectories. Records inside the settle window or
// without a full command history are skipped; fallen rollouts are dropped
// entirely and counted. Deterministic per seed; n_rollouts is per trajectory.
GrfmDataset collect_dataset(const std::vector<TrajectorySpec>& specs,
                            const MpcTheta& theta,
                            const ActuatorDistortion& distortion,
                            const ClosedLoopSetup& base, int n_rollouts,
                            std::uint64_t seed, double perturb_v_mps = 0.1,
                            double perturb_yaw_frac = 0.2,
                            double perturb_yaw_radps = 0.05);

// Per-group MSE of command-vs-effect and net-vs-effect over stance channels
// of a (held-out) plant rollout.
FidelityReport fidelity_metrics(const Rollout& rollout, const NetPair& nets);

}  // namespace mpctune
