#pragma once

#include <cstdint>
#include <string>

#include "mpctune/mlp.hpp"
#include "mpctune/rollout.hpp"
#include "mpctune/tuner.hpp"

namespace mpctune {

// One experiment: plant, controller, distortion, training, and tuning
// settings plus the single global seed. Serializes to a sectioned key-value
// text file with units in the key names; a stored config reproduces a run
// bit-exactly.
struct ExperimentConfig {
  // [robot]
  RobotParams robot;
  // [gait]
  GaitSchedule gait;
  // [trajectory]
  std::string trajectory_preset = "straight";
  double duration_s = 4.0;
  // [mpc]
  MpcConfig mpc;
  // [distortion]
  double distortion_lag = 0.6;
  double distortion_gain_lo = 0.85;
  double distortion_gain_hi = 1.1;
  double distortion_deadband_force_n = 2.0;
  double distortion_deadband_moment_nm = 0.2;
  double distortion_sat_moment_nm = 30.0;
  double distortion_noise_force_n = 1.5;
  double distortion_noise_moment_nm = 0.15;
  // [train]
  TrainConfig train;
  // [tune]
  double tune_alpha1 = 1e5;
  double tune_alpha2 = 2e5;
  double tune_beta_q = 0.05;
  double tune_beta_r = 0.08;
  int tune_iterations = 10;
  double tune_duration_s = 4.0;
  StepMode tune_step_mode = StepMode::Relative;
  // [data]
  int data_rollouts_per_trajectory = 8;
  double data_perturb_v_mps = 0.1;
  double data_perturb_yaw_frac = 0.2;
  double data_perturb_yaw_radps = 0.05;
  // [run]
  std::uint64_t seed = 0;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text);
  std::string serialize() const;
  void save(const std::string& path) const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  TrajectorySpec trajectory() const;
  ClosedLoopSetup loop() const;
  ActuatorDistortion distortion() const;
  TuneConfig tune_config() const;
};

std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace mpctune
