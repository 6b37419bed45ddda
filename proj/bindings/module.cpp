#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mpctune/pipeline.hpp"
#include "mpctune/srbm.hpp"

namespace py = pybind11;
using namespace mpctune;

namespace {

FootConfig make_feet(const Eigen::Matrix<double, 3, 2>& positions,
                     const std::array<bool, 2>& stance) {
  FootConfig feet;
  feet.foot_pos[0] = positions.col(0);
  feet.foot_pos[1] = positions.col(1);
  feet.in_stance = stance;
  return feet;
}

py::dict rollout_to_dict(const Rollout& r) {
  const int T = r.steps();
  Eigen::MatrixXd x(T + 1, kStateDim), x_ref(T + 1, kStateDim);
  Eigen::MatrixXd u_cmd(T, kControlDim), u_eff(T, kControlDim);
  Eigen::VectorXd t(T + 1);
  for (int j = 0; j <= T; ++j) {
    t(j) = r.t[static_cast<std::size_t>(j)];
    x.row(j) = r.x[static_cast<std::size_t>(j)].transpose();
    x_ref.row(j) = r.x_ref[static_cast<std::size_t>(j)].transpose();
  }
  for (int j = 0; j < T; ++j) {
    u_cmd.row(j) = r.u_cmd[static_cast<std::size_t>(j)].transpose();
    u_eff.row(j) = r.u_eff[static_cast<std::size_t>(j)].transpose();
  }
  py::dict out;
  out["t"] = t;
  out["x"] = x;
  out["x_ref"] = x_ref;
  out["u_cmd"] = u_cmd;
  out["u_eff"] = u_eff;
  out["fell"] = r.fell;
  const LossTerms loss = rollout_loss(r);
  out["l_eul"] = loss.l_eul;
  out["l_pos"] = loss.l_pos;
  out["l_ctrl"] = loss.l_ctrl;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differentiable locomotion-MPC autotuning toolkit";

  py::class_<RobotParams>(m, "RobotParams")
      .def(py::init<>())
      .def_readwrite("mass_kg", &RobotParams::mass_kg)
      .def_readwrite("toe_length_m", &RobotParams::toe_length_m)
      .def_readwrite("heel_length_m", &RobotParams::heel_length_m)
      .def_readwrite("friction_mu", &RobotParams::friction_mu)
      .def_readwrite("torsional_mu_m", &RobotParams::torsional_mu_m)
      .def_readwrite("f_max_n", &RobotParams::f_max_n)
      .def_readwrite("hip_width_m", &RobotParams::hip_width_m)
      .def_readwrite("com_height_m", &RobotParams::com_height_m)
      .def_property(
          "body_inertia", [](const RobotParams& p) { return p.body_inertia; },
          [](RobotParams& p, const Mat3& i) { p.body_inertia = i; })
      .def_property(
          "gravity", [](const RobotParams& p) { return p.gravity; },
          [](RobotParams& p, const Vec3& g) { p.gravity = g; });

  py::class_<MpcTheta>(m, "MpcTheta")
      .def(py::init<>())
      .def_static("nominal", &MpcTheta::nominal)
      .def_property(
          "q_diag",
          [](const MpcTheta& t) { return Eigen::VectorXd(t.q_diag); },
          [](MpcTheta& t, const Eigen::VectorXd& v) { t.q_diag = v; })
      .def_property(
          "r_diag",
          [](const MpcTheta& t) { return Eigen::VectorXd(t.r_diag); },
          [](MpcTheta& t, const Eigen::VectorXd& v) { t.r_diag = v; })
      .def("flat", [](const MpcTheta& t) { return Eigen::VectorXd(t.flat()); });

  m.def(
      "continuous_dynamics",
      [](const StateVec& x, const ControlVec& u,
         const Eigen::Matrix<double, 3, 2>& foot_pos,
         const std::array<bool, 2>& stance, const RobotParams& params) {
        return srbm::continuous_dynamics(
            SrbmState::from_vec(x), ControlInput::from_vec(u),
            make_feet(foot_pos, stance), params);
      },
      py::arg("x"), py::arg("u"), py::arg("foot_pos"), py::arg("stance"),
      py::arg("params") = RobotParams{},
      "15-dim state derivative of the single-rigid-body model");

  m.def(
      "linearize",
      [](const StateVec& x, const ControlVec& u,
         const Eigen::Matrix<double, 3, 2>& foot_pos,
         const std::array<bool, 2>& stance, const RobotParams& params) {
        StateMat a;
        InputMat b;
        srbm::linearize(SrbmState::from_vec(x), ControlInput::from_vec(u),
                        make_feet(foot_pos, stance), params, a, b);
        return py::make_tuple(Eigen::MatrixXd(a), Eigen::MatrixXd(b));
      },
      py::arg("x"), py::arg("u"), py::arg("foot_pos"), py::arg("stance"),
      py::arg("params") = RobotParams{},
      "Exact analytic Jacobians (df/dx, df/du) at (x, u)");

  m.def(
      "reference_states",
      [](const std::string& preset, double t, int n, double dt,
         double duration, double com_height) {
        const auto spec = TrajectorySpec::preset(preset, duration, com_height);
        const auto refs =
            generate_reference(spec, t, n, dt, RobotParams{}.gravity);
        Eigen::MatrixXd out(n, kStateDim);
        for (int k = 0; k < n; ++k) out.row(k) = refs[static_cast<std::size_t>(k)];
        return out;
      },
      py::arg("preset"), py::arg("t"), py::arg("n"), py::arg("dt"),
      py::arg("duration") = 4.0, py::arg("com_height") = 0.55,
      "Reference state horizon for a named trajectory preset");

  m.def(
      "contact_at",
      [](double t, double step_duration, double settle) {
        GaitSchedule g;
        g.step_duration_s = step_duration;
        g.settle_s = settle;
        return contact_at(t, g);
      },
      py::arg("t"), py::arg("step_duration") = 0.3, py::arg("settle") = 0.3);

  m.def("raibert_placement", &raibert_placement, py::arg("com_pos"),
        py::arg("com_vel"), py::arg("step_duration"),
        py::arg("lateral_offset") = 0.0, py::arg("yaw") = 0.0);

  m.def(
      "solve_standing_mpc",
      [](const MpcTheta& theta, const RobotParams& params) {
        MpcConfig cfg;
        StateVec x0 = StateVec::Zero();
        x0(5) = params.com_height_m;
        x0.segment<3>(12) = params.gravity;
        std::vector<StateVec> refs(static_cast<std::size_t>(cfg.horizon), x0);
        std::vector<std::array<bool, 2>> contacts(
            static_cast<std::size_t>(cfg.horizon), {true, true});
        FootConfig feet;
        feet.foot_pos[0] = Vec3(0.5 * params.hip_width_m, 0.0, 0.0);
        feet.foot_pos[1] = Vec3(-0.5 * params.hip_width_m, 0.0, 0.0);
        const auto data =
            build_qp(x0, refs, contacts, feet, theta, cfg, params);
        const auto sol = solve(data);
        return py::make_tuple(Eigen::VectorXd(sol.u0), sol.kkt_residual);
      },
      py::arg("theta"), py::arg("params") = RobotParams{},
      "First control action of the symmetric standing MPC");

  m.def(
      "simulate",
      [](const std::string& preset, const MpcTheta& theta, bool on_plant,
         std::uint64_t seed, double duration) {
        ExperimentConfig config;
        config.trajectory_preset = preset;
        config.duration_s = duration;
        config.tune_duration_s = duration;
        config.seed = seed;
        if (on_plant) {
          return rollout_to_dict(run_plant_rollout(
              config.loop(), theta, config.distortion(), seed, "simulate-plant"));
        }
        return rollout_to_dict(
            run_sim_rollout(config.loop(), theta, Actuation::nominal()));
      },
      py::arg("preset"), py::arg("theta"), py::arg("on_plant") = false,
      py::arg("seed") = 0, py::arg("duration") = 4.0,
      "Closed-loop rollout; returns a dict of time series");

  m.def(
      "mlp_forward_file",
      [](const std::string& path, const Eigen::VectorXd& input) {
        return mlp_forward(load_mlp(path), input);
      },
      py::arg("path"), py::arg("input"),
      "Evaluate a saved force/moment net on an 18-dim history");

  m.attr("__version__") = "0.1.0";
}
