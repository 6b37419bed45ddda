#pragma once

#include <optional>
#include <string>

#include "mpctune/mlp.hpp"
#include "mpctune/rng.hpp"
#include "mpctune/state.hpp"

namespace mpctune {

using CommandWindow = Eigen::Matrix<double, kControlDim, kHistoryLen>;

// Hidden actuator-distortion map standing in for a high-fidelity plant: a
// per-channel first-order lag, gain error, deadband shrink, saturation, and
// additive Gaussian noise. This is a surrogate, not a published model.
struct ActuatorDistortion {
  Eigen::Array<double, kControlDim, 1> lag_a;       // in [0,1); 0 = fresh sample
  Eigen::Array<double, kControlDim, 1> gain;
  Eigen::Array<double, kControlDim, 1> deadband;    // N / N*m
  Eigen::Array<double, kControlDim, 1> saturation;  // symmetric +-limit
  Eigen::Array<double, kControlDim, 1> noise_std;

  static ActuatorDistortion identity();

  // Default surrogate: lag 0.6, per-channel gains drawn from U[gain_lo,
  // gain_hi] under the seed, deadband 2 N / 0.2 N*m, saturation +-f_max /
  // +-30 N*m, noise 1.5 N / 0.15 N*m.
  static ActuatorDistortion defaults(std::uint64_t seed,
                                     const RobotParams& params,
                                     double lag = 0.6, double gain_lo = 0.85,
                                     double gain_hi = 1.1,
                                     double deadband_f = 2.0,
                                     double deadband_m = 0.2,
                                     double sat_m = 30.0,
                                     double noise_f = 1.5,
                                     double noise_m = 0.15);
};

// Lag memory and the RNG substream. The lag recursion has infinite memory;
// the w-step window is only what the learned model gets to see.
struct DistortionState {
  Eigen::Array<double, kControlDim, 1> lag =
      Eigen::Array<double, kControlDim, 1>::Zero();
  bool primed = false;
  Rng rng;

  explicit DistortionState(Rng r) : rng(std::move(r)) {}
  static DistortionState make(std::uint64_t seed, const std::string& stream) {
    return DistortionState(Rng::substream(seed, stream));
  }
};

// effect = saturate(deadband_shrink(gain * lag(u))) + noise, channelwise.
// Causal: only the newest window column (the current command) advances the
// lag. Deterministic given the state.
ControlVec distort(const CommandWindow& u_hist, const ActuatorDistortion& model,
                   DistortionState& state);

// Fall thresholds for plant rollouts.
inline constexpr double kFallRollRad = 0.6;
inline constexpr double kFallPitchRad = 0.6;
inline constexpr double kFallHeightM = 0.3;   // |z - com_height| bound
inline constexpr double kFallSpeedMps = 10.0;

bool state_diverged(const StateVec& x, const RobotParams& params);

struct PlantStepResult {
  StateVec x_next;
  ControlVec effect;
  bool fallen = false;
};

// Forward-Euler step of the SRBM driven by the distorted effect. `substeps`
// subdivides dt with a zero-order hold on the effect.
PlantStepResult plant_step(const StateVec& x, const CommandWindow& u_hist,
                           const FootConfig& feet,
                           const ActuatorDistortion& model,
                           DistortionState& state, const RobotParams& params,
                           double dt, int substeps = 1);

struct GrfmRecord {
  int traj_id = 0;
  int rollout = 0;
  int step = 0;
  double t_s = 0.0;
  CommandWindow u_hist;  // columns oldest..newest
  ControlVec effect;
};

struct GrfmDataset {
  std::vector<GrfmRecord> records;
  int fallen_rollouts = 0;

  // Rows are [channel(t-2); channel(t-1); channel(t)] for the group's 6
  // channels (oldest first), targets the realized effect for the same group.
  void to_matrices(ChannelGroup group, Eigen::MatrixXd& X,
                   Eigen::MatrixXd& Y) const;

  void save_csv(const std::string& path) const;
  static GrfmDataset load_csv(const std::string& path);
};

// Rows of the group's channels within the 12-dim control vector.
inline int group_channel_offset(ChannelGroup g) {
  return g == ChannelGroup::Force ? 0 : 6;
}

struct FidelityGroupReport {
  double mse_cmd = 0.0;  // MSE(command, plant effect)
  double mse_net = 0.0;  // MSE(net output, plant effect)
  bool net_better = false;
  int samples = 0;
};

struct FidelityReport {
  FidelityGroupReport force;
  FidelityGroupReport moment;
};

}  // namespace mpctune
