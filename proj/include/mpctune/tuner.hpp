#pragma once

#include "mpctune/rollout.hpp"

namespace mpctune {

using ThetaJacobianX = Eigen::Matrix<double, kStateDim, kThetaDim>;
using ThetaJacobianU = Eigen::Matrix<double, kControlDim, kThetaDim>;

enum class StepMode {
  Relative,      // log-space gradient, block-normalized; largest entry moves
                 // exactly beta_block relative per iteration
  RelativeSign,  // every entry moves beta_block relative in its gradient
                 // direction
  Raw            // theta -= beta_block * gradient
};

StepMode step_mode_from_string(const std::string& s);
std::string to_string(StepMode mode);

struct TuneConfig {
  double alpha1 = 1e5;
  double alpha2 = 2e5;
  double beta_q = 0.05;
  double beta_r = 0.08;
  int iterations = 10;
  MpcTheta theta_init = MpcTheta::nominal();
  ThetaBounds bounds = ThetaBounds::defaults();
  ClosedLoopSetup loop;
  int horizon_steps = -1;  // -1: full trajectory duration
  StepMode step_mode = StepMode::Relative;

  int steps() const {
    return horizon_steps > 0 ? horizon_steps : loop.default_steps();
  }

  void validate() const {
    if (!(alpha1 >= 0 && alpha2 >= 0))
      throw std::invalid_argument("tune: negative loss weights");
    if (!(beta_q > 0 && beta_r > 0))
      throw std::invalid_argument("tune: learning rates must be positive");
    if (iterations < 1) throw std::invalid_argument("tune: iterations >= 1");
    if (!bounds.contains(theta_init.flat()))
      throw std::invalid_argument("tune: theta_init outside bounds");
  }
};

// Running sensitivities: dx_j/dtheta plus the window of past du/dtheta needed
// to differentiate through the command history.
struct SensitivityState {
  ThetaJacobianX dx_dtheta = ThetaJacobianX::Zero();  // zero at j = 0
  std::vector<ThetaJacobianU> du_window;              // oldest..newest, <= w
};

struct RolloutLog {
  Rollout traj;
  std::vector<ThetaJacobianU> du_dtheta;  // closed-loop du_j/dtheta, length T
  std::vector<ThetaJacobianX> dx_dtheta;  // length T+1 (entry 0 is zero)
  LossTerms loss_terms;
  double loss = 0.0;
  ThetaVec gradient = ThetaVec::Zero();
};

// Closed-loop rollout on the differentiable simulator with sensitivity
// propagation. A fall truncates the log (partial loss, flagged).
RolloutLog rollout_with_sensitivity(const MpcTheta& theta,
                                    const TuneConfig& cfg,
                                    const Actuation& actuation);

// Fills loss_terms/loss/gradient of a (possibly truncated) log.
void loss_and_gradient(RolloutLog& log, const TuneConfig& cfg);

ThetaVec project_theta(const ThetaVec& theta, const ThetaBounds& bounds);

// One unprojected parameter update (see StepMode for the three rules).
ThetaVec gradient_step(const ThetaVec& theta, const ThetaVec& grad,
                       double beta_q, double beta_r, StepMode mode);

struct TuneResult {
  MpcTheta theta_best;
  int best_iteration = 0;
  std::vector<double> loss_history;           // evaluations, initial included
  std::vector<LossTerms> terms_history;
  std::vector<ThetaVec> theta_history;
  std::vector<bool> fall_flags;
  bool aborted = false;
};

// Projected gradient descent with per-block rates. A fall at an updated theta
// halves both rates for that update and retries once from the previous
// iterate; falls in two consecutive iterations abort with history intact.
// Returns the best-loss iterate.
TuneResult tune(const TuneConfig& cfg, const Actuation& actuation);

}  // namespace mpctune
