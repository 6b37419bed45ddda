#include "mpctune/tuner.hpp"

#include <cmath>

#include "mpctune/srbm.hpp"

namespace mpctune {

StepMode step_mode_from_string(const std::string& s) {
  if (s == "relative") return StepMode::Relative;
  if (s == "relative_sign") return StepMode::RelativeSign;
  if (s == "raw") return StepMode::Raw;
  throw std::invalid_argument("unknown step mode: " + s);
}

std::string to_string(StepMode mode) {
  switch (mode) {
    case StepMode::Relative: return "relative";
    case StepMode::RelativeSign: return "relative_sign";
    case StepMode::Raw: return "raw";
  }
  return "relative";
}

namespace {

// 12x12 slot Jacobian of the actuation effect w.r.t. the window column l
// (force and moment nets are independent, so the blocks are diagonal).
using SlotJacobian = Eigen::Matrix<double, kControlDim, kControlDim>;

std::array<SlotJacobian, kHistoryLen> actuation_slot_jacobians(
    const Actuation& act, const CommandWindow& window) {
  std::array<SlotJacobian, kHistoryLen> slots;
  for (auto& s : slots) s.setZero();
  if (act.kind != Actuation::Kind::Nets) {
    slots[kHistoryLen - 1].setIdentity();
    return slots;
  }
  for (ChannelGroup g : {ChannelGroup::Force, ChannelGroup::Moment}) {
    const int off = group_channel_offset(g);
    Eigen::VectorXd input(kNetInput);
    for (int w = 0; w < kHistoryLen; ++w)
      input.segment<6>(6 * w) = window.col(w).segment<6>(off);
    const MlpParams& net =
        g == ChannelGroup::Force ? act.nets->force : act.nets->moment;
    const Eigen::MatrixXd jac = mlp_input_jacobian(net, input);  // 6 x 18
    for (int w = 0; w < kHistoryLen; ++w)
      slots[static_cast<std::size_t>(w)].block<6, 6>(off, off) =
          jac.block<6, 6>(0, 6 * w);
  }
  return slots;
}

CommandWindow make_window(const std::vector<ControlVec>& history,
                          const ControlVec& current) {
  CommandWindow window;
  const auto have = static_cast<int>(history.size());
  for (int w = 0; w < kHistoryLen; ++w) {
    const int back = kHistoryLen - 1 - w;
    if (back == 0) {
      window.col(w) = current;
    } else if (back <= have) {
      window.col(w) = history[static_cast<std::size_t>(have - back)];
    } else {
      window.col(w) = current;
    }
  }
  return window;
}

}  // namespace

RolloutLog rollout_with_sensitivity(const MpcTheta& theta,
                                    const TuneConfig& cfg,
                                    const Actuation& actuation) {
  if (!cfg.bounds.contains(theta.flat()))
    throw std::invalid_argument("rollout_with_sensitivity: theta outside bounds");
  const ClosedLoopSetup& setup = cfg.loop;
  const int T = cfg.steps();
  const double dt = setup.mpc.dt_s;

  RolloutLog log;
  StateVec x = reference_state(setup.traj, 0.0, setup.robot.gravity);
  log.traj.t.push_back(0.0);
  log.traj.x.push_back(x);
  log.traj.x_ref.push_back(x);
  log.dx_dtheta.push_back(ThetaJacobianX::Zero());

  FootTracker tracker;
  tracker.init(setup);
  SensitivityState sens;
  std::vector<ControlVec> history;

  for (int j = 0; j < T; ++j) {
    const double t = j * dt;
    tracker.update(t, setup);
    const ControllerStep step =
        run_mpc(x, t, tracker.feet(), theta, setup, true);
    const ControlVec u = step.sol.u0;

    // Eq-(8b): du_j/dtheta = dh/dx * dx_j/dtheta + dh/dtheta.
    const ThetaJacobianU du =
        step.jac.du_dx * sens.dx_dtheta + step.jac.du_dtheta;
    log.du_dtheta.push_back(du);

    const CommandWindow window = make_window(history, u);
    const ControlVec u_eff = actuation.effect(window);

    // d(effect)/dtheta through every window slot; slots padded with the
    // current command pick up the current du.
    const auto slots = actuation_slot_jacobians(actuation, window);
    ThetaJacobianU du_eff = ThetaJacobianU::Zero();
    const auto have = static_cast<int>(sens.du_window.size());
    for (int w = 0; w < kHistoryLen; ++w) {
      const int back = kHistoryLen - 1 - w;
      const ThetaJacobianU& slot_du =
          (back == 0 || back > have)
              ? du
              : sens.du_window[static_cast<std::size_t>(have - back)];
      du_eff += slots[static_cast<std::size_t>(w)] * slot_du;
    }

    // Dynamics Jacobians at the applied effect.
    const SrbmState sj = SrbmState::from_vec(x);
    StateMat a_cont;
    InputMat b_cont;
    srbm::linearize(sj, ControlInput::from_vec(u_eff), tracker.feet(),
                    setup.robot, a_cont, b_cont);
    const StateMat fx = StateMat::Identity() + dt * a_cont;
    const InputMat fu = dt * b_cont;

    x += dt * srbm::continuous_dynamics(sj, ControlInput::from_vec(u_eff),
                                        tracker.feet(), setup.robot);
    sens.dx_dtheta = fx * sens.dx_dtheta + fu * du_eff;
    sens.du_window.push_back(du);
    if (static_cast<int>(sens.du_window.size()) > kHistoryLen)
      sens.du_window.erase(sens.du_window.begin());
    history.push_back(u);

    log.traj.u_cmd.push_back(u);
    log.traj.u_eff.push_back(u_eff);
    log.traj.stance.push_back(contact_at(t, setup.gait));
    log.traj.kkt_residual.push_back(step.sol.kkt_residual);
    log.traj.active_sets.push_back(step.sol.active_set);
    log.traj.low_confidence.push_back(step.jac.degenerate ||
                                      step.jac.weak_complementarity);
    log.traj.t.push_back((j + 1) * dt);
    log.traj.x.push_back(x);
    log.traj.x_ref.push_back(
        reference_state(setup.traj, (j + 1) * dt, setup.robot.gravity));
    log.dx_dtheta.push_back(sens.dx_dtheta);

    if (state_diverged(x, setup.robot)) {
      log.traj.fell = true;
      log.traj.fall_step = j;
      break;
    }
  }
  loss_and_gradient(log, cfg);
  return log;
}

void loss_and_gradient(RolloutLog& log, const TuneConfig& cfg) {
  log.loss_terms = rollout_loss(log.traj);
  log.loss = log.loss_terms.total(cfg.alpha1, cfg.alpha2);

  ThetaVec grad = ThetaVec::Zero();
  const auto n_states = log.traj.x.size();
  for (std::size_t j = 1; j < n_states; ++j) {
    Eigen::Matrix<double, 1, kStateDim> dldx =
        Eigen::Matrix<double, 1, kStateDim>::Zero();
    dldx.segment<3>(0) =
        2.0 * cfg.alpha1 *
        (log.traj.x[j].segment<3>(0) - log.traj.x_ref[j].segment<3>(0))
            .transpose();
    dldx.segment<3>(3) =
        2.0 * cfg.alpha2 *
        (log.traj.x[j].segment<3>(3) - log.traj.x_ref[j].segment<3>(3))
            .transpose();
    grad += (dldx * log.dx_dtheta[j]).transpose();
  }
  // Smoothness term couples adjacent steps; u_{-1} := u_0 zeroes the first.
  const auto T = log.traj.u_cmd.size();
  for (std::size_t j = 0; j < T; ++j) {
    ControlVec dldu = ControlVec::Zero();
    if (j >= 1) dldu += 2.0 * (log.traj.u_cmd[j] - log.traj.u_cmd[j - 1]);
    if (j + 1 < T) dldu -= 2.0 * (log.traj.u_cmd[j + 1] - log.traj.u_cmd[j]);
    grad += log.du_dtheta[j].transpose() * dldu;
  }
  log.gradient = grad;
}

ThetaVec project_theta(const ThetaVec& theta, const ThetaBounds& bounds) {
  return bounds.clamp(theta);
}

ThetaVec gradient_step(const ThetaVec& theta, const ThetaVec& grad,
                       double beta_q, double beta_r, StepMode mode) {
  ThetaVec delta = ThetaVec::Zero();
  for (int block = 0; block < 2; ++block) {
    const int lo = block == 0 ? 0 : 12;
    const double beta = block == 0 ? beta_q : beta_r;
    switch (mode) {
      case StepMode::Raw:
        for (int i = lo; i < lo + 12; ++i) delta(i) = beta * grad(i);
        break;
      case StepMode::RelativeSign:
        for (int i = lo; i < lo + 12; ++i) {
          if (grad(i) > 0)
            delta(i) = beta * std::abs(theta(i));
          else if (grad(i) < 0)
            delta(i) = -beta * std::abs(theta(i));
        }
        break;
      case StepMode::Relative: {
        // d_i = grad_i * |theta_i| is the log-space gradient; normalize by
        // the block infinity norm so the most sensitive entry moves exactly
        // beta relative.
        double norm = 0.0;
        for (int i = lo; i < lo + 12; ++i)
          norm = std::max(norm, std::abs(grad(i) * theta(i)));
        if (norm <= 0.0) break;
        for (int i = lo; i < lo + 12; ++i)
          delta(i) =
              beta * std::abs(theta(i)) * (grad(i) * std::abs(theta(i))) / norm;
        break;
      }
    }
  }
  return theta - delta;
}

TuneResult tune(const TuneConfig& cfg, const Actuation& actuation) {
  cfg.validate();
  TuneResult result;
  ThetaVec theta = cfg.theta_init.flat();

  RolloutLog log = rollout_with_sensitivity(MpcTheta::from_flat(theta), cfg,
                                            actuation);
  result.loss_history.push_back(log.loss);
  result.terms_history.push_back(log.loss_terms);
  result.theta_history.push_back(theta);
  result.fall_flags.push_back(log.traj.fell);
  result.theta_best = MpcTheta::from_flat(theta);
  result.best_iteration = 0;
  double best_loss = log.loss;
  if (log.traj.fell) {
    result.aborted = true;  // cannot even evaluate the initial parameters
    return result;
  }

  int consecutive_fall_iterations = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    const ThetaVec grad = log.gradient;
    ThetaVec candidate = project_theta(
        gradient_step(theta, grad, cfg.beta_q, cfg.beta_r, cfg.step_mode),
        cfg.bounds);
    RolloutLog cand_log =
        rollout_with_sensitivity(MpcTheta::from_flat(candidate), cfg, actuation);
    if (cand_log.traj.fell) {
      candidate = project_theta(
          gradient_step(theta, grad, cfg.beta_q / 2, cfg.beta_r / 2,
                        cfg.step_mode),
          cfg.bounds);
      cand_log = rollout_with_sensitivity(MpcTheta::from_flat(candidate), cfg,
                                          actuation);
      if (cand_log.traj.fell) {
        ++consecutive_fall_iterations;
        result.loss_history.push_back(cand_log.loss);
        result.terms_history.push_back(cand_log.loss_terms);
        result.theta_history.push_back(candidate);
        result.fall_flags.push_back(true);
        if (consecutive_fall_iterations >= 2) {
          result.aborted = true;
          break;
        }
        continue;  // keep the previous iterate and gradient
      }
    }
    consecutive_fall_iterations = 0;

    theta = candidate;
    log = std::move(cand_log);
    result.loss_history.push_back(log.loss);
    result.terms_history.push_back(log.loss_terms);
    result.theta_history.push_back(theta);
    result.fall_flags.push_back(false);
    if (log.loss < best_loss) {
      best_loss = log.loss;
      result.theta_best = MpcTheta::from_flat(theta);
      result.best_iteration = it;
    }
  }
  return result;
}

}  // namespace mpctune
