#include "mpctune/rollout.hpp"

#include <cmath>

#include "mpctune/srbm.hpp"

namespace mpctune {

void FootTracker::init(const ClosedLoopSetup& setup) {
  const auto flags = contact_at(setup.gait.t0_s, setup.gait);
  const ReferencePoint ref = reference_point(setup.traj, 0.0);
  for (int i = 0; i < kNumFeet; ++i) {
    const double lateral =
        (i == 0 ? 0.5 : -0.5) * setup.robot.hip_width_m;
    Vec3 p = ref.pos + yaw_rotation(ref.yaw) * Vec3(0.0, lateral, 0.0);
    p.z() = 0.0;
    feet_.foot_pos[static_cast<std::size_t>(i)] = p;
    feet_.in_stance[static_cast<std::size_t>(i)] =
        flags[static_cast<std::size_t>(i)];
  }
}

Vec3 FootTracker::touchdown_target(int foot, double t_land,
                                   const ClosedLoopSetup& setup) const {
  const ReferencePoint ref = reference_point(setup.traj, t_land);
  const double lateral = (foot == 0 ? 0.5 : -0.5) * setup.robot.hip_width_m;
  return raibert_placement(ref.pos, ref.vel, setup.gait.step_duration_s,
                           lateral, ref.yaw);
}

void FootTracker::update(double t, const ClosedLoopSetup& setup) {
  const auto flags = contact_at(t, setup.gait);
  for (int i = 0; i < kNumFeet; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (!flags[iu]) {
      feet_.foot_pos[iu] =
          touchdown_target(i, next_stance_start(i, t, setup.gait), setup);
    }
    // A foot entering stance keeps the target it carried through swing.
    feet_.in_stance[iu] = flags[iu];
  }
}

ControllerStep run_mpc(const StateVec& x, double t, const FootConfig& feet,
                       const MpcTheta& theta, const ClosedLoopSetup& setup,
                       bool with_jacobians) {
  const int N = setup.mpc.horizon;
  const auto refs =
      generate_reference(setup.traj, t, N, setup.mpc.dt_s, setup.robot.gravity);
  std::vector<std::array<bool, kNumFeet>> contacts(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k)
    contacts[static_cast<std::size_t>(k)] =
        contact_at(t + k * setup.mpc.dt_s, setup.gait);

  ControllerStep step;
  step.qp_data =
      build_qp(x, refs, contacts, feet, theta, setup.mpc, setup.robot);
  step.sol = solve(step.qp_data, setup.mpc.qp);
  if (with_jacobians) step.jac = differentiate_policy(step.qp_data, step.sol);
  return step;
}

ControlVec Actuation::effect(const CommandWindow& window) const {
  switch (kind) {
    case Kind::Nominal:
    case Kind::Identity:
      return window.col(kHistoryLen - 1);
    case Kind::Nets: {
      ControlVec out;
      for (ChannelGroup g : {ChannelGroup::Force, ChannelGroup::Moment}) {
        const int off = group_channel_offset(g);
        Eigen::VectorXd input(kNetInput);
        for (int w = 0; w < kHistoryLen; ++w)
          input.segment<6>(6 * w) = window.col(w).segment<6>(off);
        const MlpParams& net =
            g == ChannelGroup::Force ? nets->force : nets->moment;
        out.segment<6>(off) = mlp_forward(net, input);
      }
      return out;
    }
  }
  return window.col(kHistoryLen - 1);
}

LossTerms rollout_loss(const Rollout& r) {
  LossTerms terms;
  const auto n_states = r.x.size();
  for (std::size_t j = 1; j < n_states; ++j) {
    terms.l_eul += (r.x[j].segment<3>(0) - r.x_ref[j].segment<3>(0)).squaredNorm();
    terms.l_pos += (r.x[j].segment<3>(3) - r.x_ref[j].segment<3>(3)).squaredNorm();
  }
  for (std::size_t j = 1; j < r.u_cmd.size(); ++j)
    terms.l_ctrl += (r.u_cmd[j] - r.u_cmd[j - 1]).squaredNorm();
  return terms;
}

namespace {

CommandWindow make_window(const std::vector<ControlVec>& history,
                          const ControlVec& current) {
  CommandWindow window;
  const auto have = static_cast<int>(history.size());
  for (int w = 0; w < kHistoryLen; ++w) {
    const int back = kHistoryLen - 1 - w;  // steps before current
    if (back == 0) {
      window.col(w) = current;
    } else if (back <= have) {
      window.col(w) = history[static_cast<std::size_t>(have - back)];
    } else {
      window.col(w) = current;  // pad with the step's own command
    }
  }
  return window;
}

void record_step(Rollout& r, double t_next, const StateVec& x_next,
                 const StateVec& ref_next, const ControlVec& u_cmd,
                 const ControlVec& u_eff,
                 const std::array<bool, kNumFeet>& stance,
                 const MpcSolution& sol, bool low_conf) {
  r.u_cmd.push_back(u_cmd);
  r.u_eff.push_back(u_eff);
  r.stance.push_back(stance);
  r.kkt_residual.push_back(sol.kkt_residual);
  r.active_sets.push_back(sol.active_set);
  r.low_confidence.push_back(low_conf);
  r.t.push_back(t_next);
  r.x.push_back(x_next);
  r.x_ref.push_back(ref_next);
}

}  // namespace

Rollout run_sim_rollout(const ClosedLoopSetup& setup, const MpcTheta& theta,
                        const Actuation& actuation, int steps) {
  const int T = steps > 0 ? steps : setup.default_steps();
  const double dt = setup.mpc.dt_s;
  Rollout r;
  StateVec x = reference_state(setup.traj, 0.0, setup.robot.gravity);
  r.t.push_back(0.0);
  r.x.push_back(x);
  r.x_ref.push_back(x);
  FootTracker tracker;
  tracker.init(setup);
  std::vector<ControlVec> history;

  for (int j = 0; j < T; ++j) {
    const double t = j * dt;
    tracker.update(t, setup);
    const ControllerStep step =
        run_mpc(x, t, tracker.feet(), theta, setup, false);
    const ControlVec u = step.sol.u0;
    const CommandWindow window = make_window(history, u);
    const ControlVec u_eff = actuation.effect(window);
    history.push_back(u);

    const SrbmState sj = SrbmState::from_vec(x);
    x += dt * srbm::continuous_dynamics(sj, ControlInput::from_vec(u_eff),
                                        tracker.feet(), setup.robot);
    const StateVec ref_next =
        reference_state(setup.traj, (j + 1) * dt, setup.robot.gravity);
    record_step(r, (j + 1) * dt, x, ref_next, u, u_eff,
                contact_at(t, setup.gait), step.sol, false);
    if (state_diverged(x, setup.robot)) {
      r.fell = true;
      r.fall_step = j;
      break;
    }
  }
  return r;
}

Rollout run_plant_rollout(const ClosedLoopSetup& setup, const MpcTheta& theta,
                          const ActuatorDistortion& distortion,
                          std::uint64_t seed, const std::string& stream,
                          int steps) {
  const int T = steps > 0 ? steps : setup.default_steps();
  const double dt = setup.mpc.dt_s;
  Rollout r;
  StateVec x = reference_state(setup.traj, 0.0, setup.robot.gravity);
  r.t.push_back(0.0);
  r.x.push_back(x);
  r.x_ref.push_back(x);
  FootTracker tracker;
  tracker.init(setup);
  DistortionState dstate = DistortionState::make(seed, stream);
  std::vector<ControlVec> history;

  for (int j = 0; j < T; ++j) {
    const double t = j * dt;
    tracker.update(t, setup);
    const ControllerStep step =
        run_mpc(x, t, tracker.feet(), theta, setup, false);
    const ControlVec u = step.sol.u0;
    const CommandWindow window = make_window(history, u);
    history.push_back(u);

    const PlantStepResult res =
        plant_step(x, window, tracker.feet(), distortion, dstate, setup.robot,
                   dt, setup.plant_substeps);
    x = res.x_next;
    const StateVec ref_next =
        reference_state(setup.traj, (j + 1) * dt, setup.robot.gravity);
    record_step(r, (j + 1) * dt, x, ref_next, u, res.effect,
                contact_at(t, setup.gait), step.sol, false);
    if (res.fallen) {
      r.fell = true;
      r.fall_step = j;
      break;
    }
  }
  return r;
}

GrfmDataset collect_dataset(const std::vector<TrajectorySpec>& specs,
                            const MpcTheta& theta,
                            const ActuatorDistortion& distortion,
                            const ClosedLoopSetup& base, int n_rollouts,
                            std::uint64_t seed, double perturb_v_mps,
                            double perturb_yaw_frac, double perturb_yaw_radps) {
  if (n_rollouts < 1)
    throw std::invalid_argument("collect_dataset: n_rollouts must be >= 1");
  if (specs.empty())
    throw std::invalid_argument("collect_dataset: no trajectories");

  GrfmDataset ds;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int k = 0; k < n_rollouts; ++k) {
      const std::string stream = "data-" + std::to_string(s) + "-" +
                                 std::to_string(k);
      Rng rng = Rng::substream(seed, stream + "-perturb");
      ClosedLoopSetup setup = base;
      setup.traj = specs[s];
      setup.traj.v_x_mps += rng.uniform(-perturb_v_mps, perturb_v_mps);
      for (auto& seg : setup.traj.yaw_segments)
        seg.rate_radps =
            seg.rate_radps *
                (1.0 + rng.uniform(-perturb_yaw_frac, perturb_yaw_frac)) +
            rng.uniform(-perturb_yaw_radps, perturb_yaw_radps);

      const Rollout r =
          run_plant_rollout(setup, theta, distortion, seed, stream + "-plant");
      if (r.fell) {
        ++ds.fallen_rollouts;
        continue;
      }
      for (int j = 0; j < r.steps(); ++j) {
        const double t = r.t[static_cast<std::size_t>(j)];
        if (t < setup.gait.settle_s) continue;
        if (j < kHistoryLen - 1) continue;
        GrfmRecord rec;
        rec.traj_id = static_cast<int>(s);
        rec.rollout = k;
        rec.step = j;
        rec.t_s = t;
        for (int w = 0; w < kHistoryLen; ++w)
          rec.u_hist.col(w) =
              r.u_cmd[static_cast<std::size_t>(j - (kHistoryLen - 1) + w)];
        rec.effect = r.u_eff[static_cast<std::size_t>(j)];
        ds.records.push_back(rec);
      }
    }
  }
  return ds;
}

FidelityReport fidelity_metrics(const Rollout& rollout, const NetPair& nets) {
  FidelityReport report;
  for (ChannelGroup g : {ChannelGroup::Force, ChannelGroup::Moment}) {
    const int off = group_channel_offset(g);
    const MlpParams& net =
        g == ChannelGroup::Force ? nets.force : nets.moment;
    double sum_cmd = 0.0, sum_net = 0.0;
    int count = 0;
    for (int j = kHistoryLen - 1; j < rollout.steps(); ++j) {
      const auto ju = static_cast<std::size_t>(j);
      Eigen::VectorXd input(kNetInput);
      for (int w = 0; w < kHistoryLen; ++w)
        input.segment<6>(6 * w) =
            rollout.u_cmd[static_cast<std::size_t>(j - (kHistoryLen - 1) + w)]
                .segment<6>(off);
      const Eigen::VectorXd pred = mlp_forward(net, input);
      for (int foot = 0; foot < kNumFeet; ++foot) {
        if (!rollout.stance[ju][static_cast<std::size_t>(foot)]) continue;
        for (int c = 0; c < 3; ++c) {
          const int ch = 3 * foot + c;
          const double eff = rollout.u_eff[ju](off + ch);
          const double cmd = rollout.u_cmd[ju](off + ch);
          sum_cmd += (cmd - eff) * (cmd - eff);
          sum_net += (pred(ch) - eff) * (pred(ch) - eff);
          ++count;
        }
      }
    }
    if (count == 0)
      throw std::runtime_error("fidelity_metrics: no stance samples");
    FidelityGroupReport& out =
        g == ChannelGroup::Force ? report.force : report.moment;
    out.mse_cmd = sum_cmd / count;
    out.mse_net = sum_net / count;
    out.net_better = out.mse_net < out.mse_cmd;
    out.samples = count;
  }
  return report;
}

}  // namespace mpctune
