// Acceptance suite. Usage: acceptance <criterion 1..9> [cli_path]
// Each criterion prints one PASS/FAIL line and sets the exit status.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "mpctune/pipeline.hpp"
#include "mpctune/srbm.hpp"
#include "mpctune/tuner.hpp"

#include "test_util.hpp"

using namespace mpctune;
using namespace mpctune::testing;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

struct Outcome {
  bool pass = false;
  std::string details;
};

// ---------------------------------------------------------------------------
// 1. Analytic df/dx, df/du vs central finite differences, rel < 1e-5 over 100
//    randomized samples, < 5 s.
Outcome criterion_1() {
  Timer timer;
  RobotParams params;
  Rng rng(1001);
  const double delta = 1e-6;
  double worst = 0.0;
  for (int sample = 0; sample < 100; ++sample) {
    const SrbmState state = random_state(rng, params);
    const ControlInput u = random_control(rng);
    const FootConfig feet = random_feet(rng, state);
    StateMat a_cont;
    InputMat b_cont;
    srbm::linearize(state, u, feet, params, a_cont, b_cont);
    StateMat a_fd;
    for (int i = 0; i < kStateDim; ++i) {
      StateVec xp = state.vec(), xm = state.vec();
      xp(i) += delta;
      xm(i) -= delta;
      a_fd.col(i) =
          (srbm::continuous_dynamics(SrbmState::from_vec(xp), u, feet, params) -
           srbm::continuous_dynamics(SrbmState::from_vec(xm), u, feet, params)) /
          (2 * delta);
    }
    InputMat b_fd;
    for (int i = 0; i < kControlDim; ++i) {
      ControlVec up = u.vec(), um = u.vec();
      up(i) += delta;
      um(i) -= delta;
      b_fd.col(i) = (srbm::continuous_dynamics(state, ControlInput::from_vec(up),
                                               feet, params) -
                     srbm::continuous_dynamics(state, ControlInput::from_vec(um),
                                               feet, params)) /
                    (2 * delta);
    }
    worst = std::max(worst, max_rel_error(a_cont, a_fd, 1e-8));
    worst = std::max(worst, max_rel_error(b_cont, b_fd, 1e-8));
  }
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = worst < 1e-5 && elapsed < 5.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max rel error %.3g (tol 1e-5), %.2f s",
                worst, elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 2. Symmetric standing QP: per-foot Fz = 58.86 +- 0.001 N (m = 12 kg), < 1 s.
Outcome criterion_2() {
  Timer timer;
  RobotParams params;
  MpcConfig cfg;
  StateVec x0 = StateVec::Zero();
  x0(5) = params.com_height_m;
  x0.segment<3>(12) = params.gravity;
  FootConfig feet;
  feet.foot_pos[0] = Vec3(0.047, 0, 0);
  feet.foot_pos[1] = Vec3(-0.047, 0, 0);
  const std::vector<StateVec> refs(static_cast<std::size_t>(cfg.horizon), x0);
  const std::vector<std::array<bool, 2>> contacts(
      static_cast<std::size_t>(cfg.horizon), {true, true});
  // Small force weights keep the R-regularization bias far below 1e-3 N; the
  // analytic static optimum is then mg/2 per foot.
  MpcTheta theta = MpcTheta::nominal();
  theta.r_diag.setConstant(1e-7);
  const auto sol =
      solve(build_qp(x0, refs, contacts, feet, theta, cfg, params));
  const double expected = 0.5 * params.mass_kg * 9.81;
  const double err =
      std::max(std::abs(sol.u0(2) - expected), std::abs(sol.u0(5) - expected));
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = sol.status == QpStatus::Optimal && err < 1e-3 && elapsed < 1.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "Fz = (%.5f, %.5f) N vs %.2f N, err %.2e (tol 1e-3), %.2f s",
                sol.u0(2), sol.u0(5), expected, err, elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 3. KKT residual < 1e-8 on every solve of a 4 s straight-line rollout, and
//    the objective matches an exhaustive active-set oracle on 20 random small
//    QPs to rel 1e-6, < 30 s.
Outcome criterion_3() {
  Timer timer;
  ClosedLoopSetup setup;
  setup.traj = TrajectorySpec::preset("straight");
  const Rollout r =
      run_sim_rollout(setup, MpcTheta::nominal(), Actuation::nominal());
  double worst_kkt = 0.0;
  for (double res : r.kkt_residual) worst_kkt = std::max(worst_kkt, res);

  Rng rng(1003);
  double worst_obj = 0.0;
  int solved = 0;
  for (int trial = 0; trial < 20; ++trial) {
    QpProblem qp;
    const int n = 20, m = 15;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1, 1);
    qp.H = a.transpose() * a + Eigen::MatrixXd::Identity(n, n);
    qp.f.resize(n);
    for (int i = 0; i < n; ++i) qp.f(i) = rng.uniform(-2, 2);
    qp.G.resize(m, n);
    qp.h.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) qp.G(i, j) = rng.uniform(-1, 1);
      qp.h(i) = rng.uniform(0.05, 1.0);
    }
    const QpSolution sol = solve_qp(qp);
    const auto oracle = brute_force_qp(qp);
    if (!oracle || sol.status != QpStatus::Optimal) continue;
    ++solved;
    worst_obj = std::max(
        worst_obj, rel_error(qp.objective(sol.u), qp.objective(*oracle), 1e-12));
  }
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = !r.fell && worst_kkt < 1e-8 && solved == 20 &&
             worst_obj < 1e-6 && elapsed < 30.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%d solves, max KKT residual %.2e (tol 1e-8); oracle rel err "
                "%.2e on %d/20 QPs (tol 1e-6); %.1f s",
                r.steps(), worst_kkt, worst_obj, solved, elapsed);
  out.details = buf;
  return out;
}

// Instance harvesting for criterion 4: states and feet part-way through
// closed-loop runs on two presets.
struct MpcInstance {
  StateVec x0;
  FootConfig feet;
  std::vector<StateVec> refs;
  std::vector<std::array<bool, 2>> contacts;
};

std::vector<MpcInstance> harvest_instances(int want) {
  std::vector<MpcInstance> instances;
  RobotParams params;
  for (const std::string preset : {"straight", "c_shape"}) {
    ClosedLoopSetup setup;
    setup.traj = TrajectorySpec::preset(preset);
    const double dt = setup.mpc.dt_s;
    StateVec x = reference_state(setup.traj, 0.0, params.gravity);
    FootTracker tracker;
    tracker.init(setup);
    for (int j = 0; j < 60; ++j) {
      const double t = j * dt;
      tracker.update(t, setup);
      const ControllerStep step =
          run_mpc(x, t, tracker.feet(), MpcTheta::nominal(), setup, false);
      if (j >= 4 && j % 2 == 0 &&
          static_cast<int>(instances.size()) < want) {
        MpcInstance inst;
        inst.x0 = x;
        inst.feet = tracker.feet();
        inst.refs = generate_reference(setup.traj, t, setup.mpc.horizon, dt,
                                       params.gravity);
        for (int k = 0; k < setup.mpc.horizon; ++k)
          inst.contacts.push_back(contact_at(t + k * dt, setup.gait));
        instances.push_back(std::move(inst));
      }
      const SrbmState sj = SrbmState::from_vec(x);
      x += dt * srbm::continuous_dynamics(
                    sj, ControlInput::from_vec(step.sol.u0), tracker.feet(),
                    setup.robot);
    }
  }
  return instances;
}

// ---------------------------------------------------------------------------
// 4. du_dtheta and du_dx vs finite differences of the full QP solve, rel
//    < 1e-3 on 50 active-set-stable instances, < 60 s.
Outcome criterion_4() {
  Timer timer;
  RobotParams params;
  MpcConfig cfg;
  const MpcTheta theta = MpcTheta::nominal();
  const std::vector<MpcInstance> instances = harvest_instances(50);

  int stable_instances = 0;
  double worst = 0.0;
  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    const MpcInstance& inst = instances[idx];
    const auto data = build_qp(inst.x0, inst.refs, inst.contacts, inst.feet,
                               theta, cfg, params);
    const auto sol = solve(data);
    if (sol.status != QpStatus::Optimal) continue;
    const auto jac = differentiate_policy(data, sol);
    if (jac.degenerate) continue;

    bool instance_stable = true;
    double inst_worst = 0.0;
    // Rotate the probed directions across instances to cover all of theta
    // and the state.
    for (int pick = 0; pick < 4; ++pick) {
      const int i = (static_cast<int>(idx) * 4 + pick * 7) % kThetaDim;
      ThetaVec tp = theta.flat(), tm = theta.flat();
      const double delta = 1e-5 * std::max(1.0, std::abs(tp(i)));
      tp(i) += delta;
      tm(i) -= delta;
      const auto solp = solve(build_qp(inst.x0, inst.refs, inst.contacts,
                                       inst.feet, MpcTheta::from_flat(tp), cfg,
                                       params));
      const auto solm = solve(build_qp(inst.x0, inst.refs, inst.contacts,
                                       inst.feet, MpcTheta::from_flat(tm), cfg,
                                       params));
      if (solp.active_set != sol.active_set ||
          solm.active_set != sol.active_set) {
        instance_stable = false;
        continue;
      }
      const ControlVec fd = (solp.u0 - solm.u0) / (2 * delta);
      for (int row = 0; row < kControlDim; ++row)
        inst_worst = std::max(
            inst_worst, rel_error(jac.du_dtheta(row, i), fd(row), 1e-7));
    }
    for (int pick = 0; pick < 3; ++pick) {
      const int i = (static_cast<int>(idx) * 3 + pick * 5) % kStateDim;
      StateVec xp = inst.x0, xm = inst.x0;
      const double delta = 1e-4;  // u* is affine in x0; large delta beats solver noise
      xp(i) += delta;
      xm(i) -= delta;
      const auto solp = solve(build_qp(xp, inst.refs, inst.contacts, inst.feet,
                                       theta, cfg, params, &inst.x0));
      const auto solm = solve(build_qp(xm, inst.refs, inst.contacts, inst.feet,
                                       theta, cfg, params, &inst.x0));
      if (solp.active_set != sol.active_set ||
          solm.active_set != sol.active_set) {
        instance_stable = false;
        continue;
      }
      const ControlVec fd = (solp.u0 - solm.u0) / (2 * delta);
      for (int row = 0; row < kControlDim; ++row)
        inst_worst =
            std::max(inst_worst, rel_error(jac.du_dx(row, i), fd(row), 1e-7));
    }
    if (instance_stable) {
      ++stable_instances;
      worst = std::max(worst, inst_worst);
    }
  }
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = stable_instances >= 50 && worst < 1e-3 && elapsed < 60.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%d stable instances, max rel error %.3g (tol 1e-3), %.1f s",
                stable_instances, worst, elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 5. Sensitivity-propagated gradient vs finite differences of a 0.5 s rollout,
//    rel < 5e-2 on unflagged entries, flags cover all exceptions, < 5 min.
Outcome criterion_5() {
  Timer timer;
  TuneConfig cfg;
  cfg.loop.traj = TrajectorySpec::preset("straight");
  cfg.horizon_steps = 13;  // 0.52 s at 25 Hz
  const MpcTheta theta = MpcTheta::nominal();
  const RolloutLog base =
      rollout_with_sensitivity(theta, cfg, Actuation::nominal());

  bool any_low_confidence = false;
  for (bool f : base.traj.low_confidence) any_low_confidence |= f;

  int unflagged = 0, mismatched_unflagged = 0;
  double worst_unflagged = 0.0;
  for (int i = 0; i < kThetaDim; ++i) {
    ThetaVec tp = theta.flat(), tm = theta.flat();
    const double delta = 1e-4 * std::max(1e-3, std::abs(tp(i)));
    tp(i) += delta;
    tm(i) -= delta;
    const RolloutLog lp = rollout_with_sensitivity(MpcTheta::from_flat(tp), cfg,
                                                   Actuation::nominal());
    const RolloutLog lm = rollout_with_sensitivity(MpcTheta::from_flat(tm), cfg,
                                                   Actuation::nominal());
    bool flagged = any_low_confidence;
    for (int j = 0; j < base.traj.steps() && !flagged; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      flagged = lp.traj.active_sets[ju] != base.traj.active_sets[ju] ||
                lm.traj.active_sets[ju] != base.traj.active_sets[ju];
    }
    const double fd = (lp.loss - lm.loss) / (2 * delta);
    const double err = rel_error(base.gradient(i), fd, 1e-9);
    if (!flagged) {
      ++unflagged;
      worst_unflagged = std::max(worst_unflagged, err);
      if (err >= 5e-2) ++mismatched_unflagged;
    }
  }
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = mismatched_unflagged == 0 && unflagged >= kThetaDim / 2 &&
             elapsed < 300.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%d/%d entries unflagged, max rel error %.3g (tol 5e-2), "
                "%d uncovered mismatches, %.1f s",
                unflagged, kThetaDim, worst_unflagged, mismatched_unflagged,
                elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 6. Training gradient check rel < 1e-4; on the default surrogate dataset the
//    validation MSE plateaus within 200 epochs (final within 5% of the best),
//    < 5 min.
Outcome criterion_6() {
  Timer timer;
  // Backprop vs finite differences on a 3-sample batch of the full-size net.
  MlpParams p = init_mlp(MlpSpec{}, ChannelGroup::Force, 1006);
  Rng rng(1007);
  Eigen::MatrixXd xb(kNetInput, 3), yb(kNetOutput, 3);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < kNetInput; ++i) xb(i, c) = rng.uniform(-2, 2);
    for (int i = 0; i < kNetOutput; ++i) yb(i, c) = rng.uniform(-2, 2);
  }
  std::vector<Eigen::MatrixXd> gw;
  std::vector<Eigen::VectorXd> gb, gg, go;
  train_loss_and_gradient(p, xb, yb, 1e-3, gw, gb, gg, go);
  auto loss_at = [&](MlpParams& q) {
    std::vector<Eigen::MatrixXd> tw;
    std::vector<Eigen::VectorXd> tb, tg, to;
    return train_loss_and_gradient(q, xb, yb, 1e-3, tw, tb, tg, to);
  };
  double worst_grad = 0.0;
  const double delta = 1e-6;
  for (int probe = 0; probe < 120; ++probe) {
    const int layer = static_cast<int>(rng.index(p.weights.size()));
    const auto lu = static_cast<std::size_t>(layer);
    const int r =
        static_cast<int>(rng.index(static_cast<std::size_t>(p.weights[lu].rows())));
    const int c =
        static_cast<int>(rng.index(static_cast<std::size_t>(p.weights[lu].cols())));
    MlpParams q = p;
    q.weights[lu](r, c) += delta;
    const double up = loss_at(q);
    q.weights[lu](r, c) -= 2 * delta;
    const double dn = loss_at(q);
    worst_grad = std::max(
        worst_grad, rel_error((up - dn) / (2 * delta), gw[lu](r, c), 1e-10));
  }

  // Default surrogate dataset and the full 200-epoch recipe.
  ExperimentConfig config;
  const GrfmDataset ds = collect_dataset(
      {TrajectorySpec::preset("straight"), TrajectorySpec::preset("c_shape"),
       TrajectorySpec::preset("s_shape")},
      MpcTheta::nominal(), config.distortion(), config.loop(),
      config.data_rollouts_per_trajectory, config.seed);
  Eigen::MatrixXd X, Y;
  ds.to_matrices(ChannelGroup::Force, X, Y);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  const TrainResult force = train_mlp(X, Y, ChannelGroup::Force, tc);
  ds.to_matrices(ChannelGroup::Moment, X, Y);
  const TrainResult moment = train_mlp(X, Y, ChannelGroup::Moment, tc);

  const double force_best =
      force.val_mse[static_cast<std::size_t>(force.best_epoch)];
  const double moment_best =
      moment.val_mse[static_cast<std::size_t>(moment.best_epoch)];
  const bool plateau = force.val_mse.back() <= 1.05 * force_best &&
                       moment.val_mse.back() <= 1.05 * moment_best;
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = worst_grad < 1e-4 && plateau && elapsed < 300.0;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "grad check %.3g (tol 1e-4); %zu records; force val %.4g "
                "(best %.4g), moment val %.4g (best %.4g); %.1f s",
                worst_grad, ds.records.size(), force.val_mse.back(), force_best,
                moment.val_mse.back(), moment_best, elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 7. Fidelity: on a held-out plant rollout, MSE(net, effect) < MSE(command,
//    effect) for both groups, < 1 min end to end.
Outcome criterion_7() {
  Timer timer;
  ExperimentConfig config;
  config.data_rollouts_per_trajectory = 4;  // sized to fit the time budget
  config.train.epochs = 100;
  const GrfmDataset ds = collect_dataset(
      {TrajectorySpec::preset("straight"), TrajectorySpec::preset("c_shape"),
       TrajectorySpec::preset("s_shape")},
      MpcTheta::nominal(), config.distortion(), config.loop(),
      config.data_rollouts_per_trajectory, config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  Eigen::MatrixXd X, Y;
  ds.to_matrices(ChannelGroup::Force, X, Y);
  const TrainResult force = train_mlp(X, Y, ChannelGroup::Force, tc);
  ds.to_matrices(ChannelGroup::Moment, X, Y);
  const TrainResult moment = train_mlp(X, Y, ChannelGroup::Moment, tc);
  const NetPair nets{force.params, moment.params};

  // Held out: a stream name never used during collection.
  const Rollout holdout =
      run_plant_rollout(config.loop(), MpcTheta::nominal(),
                        config.distortion(), config.seed, "fidelity-holdout");
  const FidelityReport report = fidelity_metrics(holdout, nets);
  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = report.force.net_better && report.moment.net_better &&
             !holdout.fell && elapsed < 60.0;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "force MSE net %.4g < cmd %.4g : %s; moment MSE net %.4g < "
                "cmd %.4g : %s; %.1f s",
                report.force.mse_net, report.force.mse_cmd,
                report.force.net_better ? "yes" : "NO", report.moment.mse_net,
                report.moment.mse_cmd, report.moment.net_better ? "yes" : "NO",
                elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 8. Tuning efficacy: 10 iterations with the net on the straight preset cut
//    the plant-evaluated loss by >= 20% vs nominal; on c_shape and s_shape the
//    with-net theta beats the without-net theta on the plant, < 20 min.
Outcome criterion_8() {
  Timer timer;
  ExperimentConfig config;
  const ActuatorDistortion distortion = config.distortion();

  const GrfmDataset ds = collect_dataset(
      {TrajectorySpec::preset("straight"), TrajectorySpec::preset("c_shape"),
       TrajectorySpec::preset("s_shape")},
      MpcTheta::nominal(), distortion, config.loop(),
      config.data_rollouts_per_trajectory, config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  Eigen::MatrixXd X, Y;
  ds.to_matrices(ChannelGroup::Force, X, Y);
  const TrainResult force = train_mlp(X, Y, ChannelGroup::Force, tc);
  ds.to_matrices(ChannelGroup::Moment, X, Y);
  const TrainResult moment = train_mlp(X, Y, ChannelGroup::Moment, tc);
  const NetPair nets{force.params, moment.params};

  auto plant_loss = [&](const std::string& preset, const MpcTheta& theta) {
    ExperimentConfig eval = config;
    eval.trajectory_preset = preset;
    const Rollout r = run_plant_rollout(eval.loop(), theta, distortion,
                                        config.seed, "compare-" + preset);
    return rollout_loss(r).total(config.tune_alpha1, config.tune_alpha2) *
           (r.fell ? 10.0 : 1.0);  // a fall is a decisive loss
  };

  auto tune_on = [&](const std::string& preset, bool with_net) {
    ExperimentConfig run = config;
    run.trajectory_preset = preset;
    TuneConfig cfg = run.tune_config();
    return tune(cfg, with_net ? Actuation::with_nets(nets)
                              : Actuation::nominal())
        .theta_best;
  };

  const MpcTheta nominal = MpcTheta::nominal();
  const MpcTheta straight_net = tune_on("straight", true);
  const double straight_nominal = plant_loss("straight", nominal);
  const double straight_tuned = plant_loss("straight", straight_net);
  const double reduction =
      100.0 * (straight_nominal - straight_tuned) / straight_nominal;

  const MpcTheta c_with = tune_on("c_shape", true);
  const MpcTheta c_without = tune_on("c_shape", false);
  const double c_with_loss = plant_loss("c_shape", c_with);
  const double c_without_loss = plant_loss("c_shape", c_without);

  const MpcTheta s_with = tune_on("s_shape", true);
  const MpcTheta s_without = tune_on("s_shape", false);
  const double s_with_loss = plant_loss("s_shape", s_with);
  const double s_without_loss = plant_loss("s_shape", s_without);

  const double elapsed = timer.seconds();
  Outcome out;
  out.pass = reduction >= 20.0 && c_with_loss < c_without_loss &&
             s_with_loss < s_without_loss && elapsed < 1200.0;
  char buf[300];
  std::snprintf(
      buf, sizeof(buf),
      "straight: %.4g -> %.4g (%.1f%% reduction, need >= 20%%); c_shape "
      "with %.4g vs without %.4g; s_shape with %.4g vs without %.4g; %.0f s",
      straight_nominal, straight_tuned, reduction, c_with_loss, c_without_loss,
      s_with_loss, s_without_loss, elapsed);
  out.details = buf;
  return out;
}

// ---------------------------------------------------------------------------
// 9. Determinism: every pipeline command re-run with the same config produces
//    bit-identical CSV outputs.
Outcome criterion_9(const std::string& cli) {
  Timer timer;
  Outcome out;
  if (cli.empty()) {
    out.details = "no CLI path provided";
    return out;
  }
  const fs::path root = "acceptance9_work";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string config_path = (root / "config.txt").string();
  {
    ExperimentConfig config;
    config.duration_s = 1.2;
    config.tune_duration_s = 1.2;
    config.tune_iterations = 2;
    config.train.epochs = 3;
    config.train.batch_size = 64;
    config.data_rollouts_per_trajectory = 1;
    config.seed = 99;
    config.save(config_path);
  }

  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  auto same = [&](const std::string& a, const std::string& b,
                  const std::string& file) {
    return hash_file((root / a / file).string()) ==
           hash_file((root / b / file).string());
  };

  std::vector<std::string> problems;
  for (const char* rep : {"a", "b"}) {
    const std::string dir = (root / (std::string("sim_") + rep)).string();
    if (run("simulate --nominal --config " + config_path + " --out " + dir))
      problems.push_back("simulate exit");
    const std::string pdir = (root / (std::string("plant_") + rep)).string();
    if (run("simulate --plant --config " + config_path + " --out " + pdir))
      problems.push_back("simulate --plant exit");
    const std::string ddir = (root / (std::string("data_") + rep)).string();
    if (run("collect-data --config " + config_path + " --out " + ddir))
      problems.push_back("collect-data exit");
    const std::string tdir = (root / (std::string("train_") + rep)).string();
    if (run("train-grfm --config " + config_path + " --dataset " +
            (root / ("data_" + std::string(rep)) / "dataset.csv").string() +
            " --out " + tdir))
      problems.push_back("train-grfm exit");
    const std::string udir = (root / (std::string("tune_") + rep)).string();
    if (run("tune --without-net --config " + config_path + " --out " + udir))
      problems.push_back("tune exit");
    const std::string wdir = (root / (std::string("tunew_") + rep)).string();
    if (run("tune --with-net --models " + tdir + " --config " + config_path +
            " --out " + wdir))
      problems.push_back("tune --with-net exit");
    const std::string cdir = (root / (std::string("cmp_") + rep)).string();
    if (run("compare --config " + config_path + " --theta tuned=" +
            (root / ("tune_" + std::string(rep)) /
             "theta_tuned_without_net.txt")
                .string() +
            " --out " + cdir))
      problems.push_back("compare exit");
  }
  if (problems.empty()) {
    if (!same("sim_a", "sim_b", "rollout.csv")) problems.push_back("simulate");
    if (!same("plant_a", "plant_b", "rollout.csv"))
      problems.push_back("simulate --plant");
    if (!same("data_a", "data_b", "dataset.csv"))
      problems.push_back("collect-data");
    if (!same("train_a", "train_b", "train_curves.csv"))
      problems.push_back("train-grfm curves");
    if (!same("train_a", "train_b", "grfm_force.json"))
      problems.push_back("train-grfm force model");
    if (!same("tune_a", "tune_b", "tune_history_without_net.csv"))
      problems.push_back("tune history");
    if (!same("tune_a", "tune_b", "theta_tuned_without_net.txt"))
      problems.push_back("tune theta");
    if (!same("tunew_a", "tunew_b", "tune_history_with_net.csv"))
      problems.push_back("tune --with-net history");
    if (!same("cmp_a", "cmp_b", "comparison.csv")) problems.push_back("compare");
  }
  out.pass = problems.empty();
  std::string detail = problems.empty()
                           ? "all commands re-ran bit-identically"
                           : "mismatches: ";
  for (const auto& p : problems) detail += p + ", ";
  char buf[64];
  std::snprintf(buf, sizeof(buf), " (%.0f s)", timer.seconds());
  out.details = detail + buf;
  if (out.pass) fs::remove_all(root);
  return out;
}

const char* kDescriptions[10] = {
    "",
    "dynamics Jacobians vs finite differences",
    "static-equilibrium vertical forces",
    "QP KKT residuals and active-set oracle",
    "policy Jacobian fidelity",
    "rollout gradient fidelity",
    "net training gradients and plateau",
    "actuation-gap fidelity on held-out rollout",
    "tuning efficacy on the surrogate plant",
    "pipeline determinism",
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..9> [cli_path]\n");
    return 2;
  }
  const int criterion = std::atoi(argv[1]);
  const std::string cli = argc > 2 ? argv[2] : "";
  Outcome out;
  try {
    switch (criterion) {
      case 1: out = criterion_1(); break;
      case 2: out = criterion_2(); break;
      case 3: out = criterion_3(); break;
      case 4: out = criterion_4(); break;
      case 5: out = criterion_5(); break;
      case 6: out = criterion_6(); break;
      case 7: out = criterion_7(); break;
      case 8: out = criterion_8(); break;
      case 9: out = criterion_9(cli); break;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", criterion);
        return 2;
    }
  } catch (const std::exception& e) {
    out.pass = false;
    out.details = std::string("exception: ") + e.what();
  }
  std::printf("[%s] criterion %d: %s (%s)\n", out.pass ? "PASS" : "FAIL",
              criterion, kDescriptions[criterion], out.details.c_str());
  return out.pass ? 0 : 1;
}
