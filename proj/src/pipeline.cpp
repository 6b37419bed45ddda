#include "mpctune/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpctune/csv.hpp"
#include <json.hpp>

namespace mpctune {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory: " + dir);
}

const char* kStateNames[kStateDim] = {"roll", "pitch", "yaw", "px", "py",
                                      "pz",   "wx",    "wy",  "wz", "vx",
                                      "vy",   "vz",    "gx",  "gy", "gz"};
const char* kControlNames[kControlDim] = {"f0x", "f0y", "f0z", "f1x",
                                          "f1y", "f1z", "m0x", "m0y",
                                          "m0z", "m1x", "m1y", "m1z"};

void write_rollout_csv(const std::string& path, const Rollout& r) {
  std::vector<std::string> header{"t_s"};
  for (const auto* n : kStateNames) header.push_back(std::string("x_") + n);
  for (const auto* n : kStateNames) header.push_back(std::string("ref_") + n);
  for (const auto* n : kControlNames) header.push_back(std::string("cmd_") + n);
  for (const auto* n : kControlNames) header.push_back(std::string("eff_") + n);
  header.insert(header.end(), {"stance0", "stance1", "kkt_residual"});
  CsvWriter out(path, header);
  std::vector<double> row(header.size());
  for (int j = 0; j < r.steps(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    std::size_t i = 0;
    row[i++] = r.t[ju];
    for (int k = 0; k < kStateDim; ++k) row[i++] = r.x[ju](k);
    for (int k = 0; k < kStateDim; ++k) row[i++] = r.x_ref[ju](k);
    for (int k = 0; k < kControlDim; ++k) row[i++] = r.u_cmd[ju](k);
    for (int k = 0; k < kControlDim; ++k) row[i++] = r.u_eff[ju](k);
    row[i++] = r.stance[ju][0] ? 1.0 : 0.0;
    row[i++] = r.stance[ju][1] ? 1.0 : 0.0;
    row[i++] = r.kkt_residual[ju];
    out.row(row);
  }
}

void write_plot_script(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plot script: " + path);
  out << R"(#!/usr/bin/env python3
"""Render CoM position and Euler angle tracking panels from rollout.csv."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(os.path.abspath(__file__)), "rollout.csv")
with open(path, newline="") as f:
    rows = list(csv.DictReader(f))

t = [float(r["t_s"]) for r in rows]
fig, axes = plt.subplots(2, 3, figsize=(13, 6), sharex=True)
panels = [
    ("x_px", "ref_px", "CoM x [m]"), ("x_py", "ref_py", "CoM y [m]"),
    ("x_pz", "ref_pz", "CoM z [m]"), ("x_roll", "ref_roll", "roll [rad]"),
    ("x_pitch", "ref_pitch", "pitch [rad]"), ("x_yaw", "ref_yaw", "yaw [rad]"),
]
for ax, (actual, ref, label) in zip(axes.flat, panels):
    ax.plot(t, [float(r[actual]) for r in rows], label="actual")
    ax.plot(t, [float(r[ref]) for r in rows], "--", label="reference")
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
for ax in axes[1]:
    ax.set_xlabel("t [s]")
axes[0][0].legend()
fig.tight_layout()
out = os.path.splitext(path)[0] + ".png"
fig.savefig(out, dpi=130)
print(out)
)";
}

}  // namespace

void save_theta(const std::string& path, const ThetaCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write theta checkpoint: " + path);
  out << "# mpctune theta checkpoint\n";
  out << "version = 1\n";
  out << "config_hash = " << ckpt.config_hash << "\n";
  out << "iteration = " << ckpt.iteration << "\n";
  out << "used_net = " << (ckpt.used_net ? "true" : "false") << "\n";
  out << "q =";
  for (int i = 0; i < 12; ++i) out << ' ' << format_double(ckpt.theta.q_diag(i));
  out << "\nr =";
  for (int i = 0; i < 12; ++i) out << ' ' << format_double(ckpt.theta.r_diag(i));
  out << "\n";
}

ThetaCheckpoint load_theta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open theta checkpoint: " + path);
  ThetaCheckpoint ckpt;
  std::string line;
  bool have_q = false, have_r = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string key, eq;
    ls >> key >> eq;
    if (eq != "=") throw std::runtime_error("malformed theta checkpoint line: " + line);
    if (key == "version") {
      int v = 0;
      ls >> v;
      if (v != 1) throw std::runtime_error("unsupported theta checkpoint version");
    } else if (key == "config_hash") {
      ls >> ckpt.config_hash;
    } else if (key == "iteration") {
      ls >> ckpt.iteration;
    } else if (key == "used_net") {
      std::string b;
      ls >> b;
      ckpt.used_net = b == "true";
    } else if (key == "q") {
      for (int i = 0; i < 12; ++i) ls >> ckpt.theta.q_diag(i);
      have_q = !ls.fail();
    } else if (key == "r") {
      for (int i = 0; i < 12; ++i) ls >> ckpt.theta.r_diag(i);
      have_r = !ls.fail();
    } else {
      throw std::runtime_error("unknown theta checkpoint key: " + key);
    }
  }
  if (!have_q || !have_r)
    throw std::runtime_error("theta checkpoint missing q/r: " + path);
  return ckpt;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_hash,
                    const std::vector<std::string>& files) {
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  std::ofstream out(join(out_dir, command + ".manifest.txt"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << "config_hash " << config_hash << "\n";
  for (const auto& f : sorted)
    out << f << ' ' << hash_hex(hash_file(join(out_dir, f))) << "\n";
}

bool verify_manifest(const std::string& out_dir, const std::string& command) {
  std::ifstream in(join(out_dir, command + ".manifest.txt"), std::ios::binary);
  if (!in) throw std::runtime_error("no manifest for " + command + " in " + out_dir);
  std::string name, digest;
  bool first = true;
  while (in >> name >> digest) {
    if (first) {
      first = false;  // config_hash line
      continue;
    }
    if (hash_hex(hash_file(join(out_dir, name))) != digest) return false;
  }
  return !first;
}

SimulateResult cmd_simulate(const ExperimentConfig& config,
                            const MpcTheta& theta, bool on_plant,
                            const std::optional<NetPair>& nets,
                            const std::string& out_dir) {
  ensure_dir(out_dir);
  SimulateResult res;
  if (on_plant) {
    res.rollout = run_plant_rollout(config.loop(), theta, config.distortion(),
                                    config.seed, "simulate-plant");
  } else {
    const Actuation act =
        nets ? Actuation::with_nets(*nets) : Actuation::nominal();
    res.rollout = run_sim_rollout(config.loop(), theta, act);
  }
  res.fell = res.rollout.fell;
  res.loss = rollout_loss(res.rollout);
  res.total_loss = res.loss.total(config.tune_alpha1, config.tune_alpha2);
  res.csv_path = join(out_dir, "rollout.csv");
  write_rollout_csv(res.csv_path, res.rollout);
  write_plot_script(join(out_dir, "plot_rollout.py"));
  config.save(join(out_dir, "config_used.txt"));
  write_manifest(out_dir, "simulate", config.hash_hex(),
                 {"rollout.csv", "plot_rollout.py", "config_used.txt"});
  return res;
}

CollectDataResult cmd_collect_data(const ExperimentConfig& config,
                                   const std::string& out_dir) {
  ensure_dir(out_dir);
  if (config.data_rollouts_per_trajectory < 1)
    throw std::invalid_argument("collect-data: rollouts_per_trajectory >= 1");
  const std::vector<TrajectorySpec> specs{
      TrajectorySpec::preset("straight", config.duration_s,
                             config.robot.com_height_m),
      TrajectorySpec::preset("c_shape", config.duration_s,
                             config.robot.com_height_m),
      TrajectorySpec::preset("s_shape", config.duration_s,
                             config.robot.com_height_m)};
  const GrfmDataset ds = collect_dataset(
      specs, MpcTheta::nominal(), config.distortion(), config.loop(),
      config.data_rollouts_per_trajectory, config.seed,
      config.data_perturb_v_mps, config.data_perturb_yaw_frac,
      config.data_perturb_yaw_radps);

  CollectDataResult res;
  res.csv_path = join(out_dir, kDatasetFile);
  res.records = static_cast<int>(ds.records.size());
  res.fallen_rollouts = ds.fallen_rollouts;
  ds.save_csv(res.csv_path);

  // Sidecar metadata: seed, distortion parameters, config hash.
  nlohmann::json meta;
  meta["config_hash"] = config.hash_hex();
  meta["seed"] = config.seed;
  meta["records"] = res.records;
  meta["fallen_rollouts"] = res.fallen_rollouts;
  const ActuatorDistortion dist = config.distortion();
  auto arr = [](const auto& a) {
    std::vector<double> v(a.data(), a.data() + a.size());
    return v;
  };
  meta["distortion"] = {
      {"lag_a", arr(dist.lag_a)},          {"gain", arr(dist.gain)},
      {"deadband", arr(dist.deadband)},    {"saturation", arr(dist.saturation)},
      {"noise_std", arr(dist.noise_std)}};
  std::ofstream meta_out(join(out_dir, "dataset.meta.json"), std::ios::binary);
  meta_out << meta.dump(1) << '\n';
  meta_out.close();

  write_manifest(out_dir, "collect-data", config.hash_hex(),
                 {kDatasetFile, "dataset.meta.json"});
  return res;
}

TrainGrfmResult cmd_train_grfm(const ExperimentConfig& config,
                               const std::string& dataset_csv,
                               const std::string& out_dir) {
  ensure_dir(out_dir);
  const GrfmDataset ds = GrfmDataset::load_csv(dataset_csv);
  if (ds.records.empty()) throw std::runtime_error("train-grfm: empty dataset");

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  TrainGrfmResult res;

  Eigen::MatrixXd X, Y;
  ds.to_matrices(ChannelGroup::Force, X, Y);
  const TrainResult force = train_mlp(X, Y, ChannelGroup::Force, tc);
  ds.to_matrices(ChannelGroup::Moment, X, Y);
  const TrainResult moment = train_mlp(X, Y, ChannelGroup::Moment, tc);

  res.force_model_path = join(out_dir, kForceModelFile);
  res.moment_model_path = join(out_dir, kMomentModelFile);
  save_mlp(force.params, res.force_model_path);
  save_mlp(moment.params, res.moment_model_path);
  res.force_final_val_mse = force.val_mse.back();
  res.moment_final_val_mse = moment.val_mse.back();
  res.force_best_epoch = force.best_epoch;
  res.moment_best_epoch = moment.best_epoch;

  res.curves_path = join(out_dir, "train_curves.csv");
  CsvWriter curves(res.curves_path,
                   {"epoch", "force_train_mse", "force_val_mse",
                    "moment_train_mse", "moment_val_mse"});
  for (std::size_t e = 0; e < force.train_mse.size(); ++e)
    curves.row({static_cast<double>(e), force.train_mse[e], force.val_mse[e],
                moment.train_mse[e], moment.val_mse[e]});
  curves.close();

  write_manifest(out_dir, "train-grfm", config.hash_hex(),
                 {kForceModelFile, kMomentModelFile, "train_curves.csv"});
  return res;
}

NetPair load_net_pair(const std::string& models_dir) {
  NetPair nets{
      load_mlp_expecting(join(models_dir, kForceModelFile), ChannelGroup::Force),
      load_mlp_expecting(join(models_dir, kMomentModelFile),
                         ChannelGroup::Moment)};
  return nets;
}

TuneCmdResult cmd_tune(const ExperimentConfig& config, bool with_net,
                       const std::string& models_dir,
                       const std::string& out_dir) {
  ensure_dir(out_dir);
  TuneConfig cfg = config.tune_config();
  Actuation act = Actuation::nominal();
  if (with_net) act = Actuation::with_nets(load_net_pair(models_dir));

  TuneCmdResult res;
  res.tune = tune(cfg, act);

  const std::string suffix = with_net ? "with_net" : "without_net";
  res.theta_path = join(out_dir, "theta_tuned_" + suffix + ".txt");
  ThetaCheckpoint ckpt;
  ckpt.theta = res.tune.theta_best;
  ckpt.config_hash = config.hash_hex();
  ckpt.iteration = res.tune.best_iteration;
  ckpt.used_net = with_net;
  save_theta(res.theta_path, ckpt);

  res.history_path = join(out_dir, "tune_history_" + suffix + ".csv");
  std::vector<std::string> header{"iteration", "loss", "l_eul",
                                  "l_pos",     "l_ctrl", "fell"};
  for (int i = 0; i < 12; ++i) header.push_back("q" + std::to_string(i));
  for (int i = 0; i < 12; ++i) header.push_back("r" + std::to_string(i));
  CsvWriter hist(res.history_path, header);
  for (std::size_t it = 0; it < res.tune.loss_history.size(); ++it) {
    std::vector<double> row;
    row.push_back(static_cast<double>(it));
    row.push_back(res.tune.loss_history[it]);
    row.push_back(res.tune.terms_history[it].l_eul);
    row.push_back(res.tune.terms_history[it].l_pos);
    row.push_back(res.tune.terms_history[it].l_ctrl);
    row.push_back(res.tune.fall_flags[it] ? 1.0 : 0.0);
    for (int i = 0; i < kThetaDim; ++i)
      row.push_back(res.tune.theta_history[it](i));
    hist.row(row);
  }
  hist.close();

  write_manifest(out_dir, with_net ? "tune-with-net" : "tune-without-net",
                 config.hash_hex(),
                 {"theta_tuned_" + suffix + ".txt",
                  "tune_history_" + suffix + ".csv"});
  return res;
}

CompareResult cmd_compare(
    const ExperimentConfig& config,
    const std::vector<std::pair<std::string, MpcTheta>>& theta_sets,
    const std::string& out_dir) {
  ensure_dir(out_dir);
  if (theta_sets.empty()) throw std::invalid_argument("compare: no theta sets");

  CompareResult res;
  const std::vector<std::string> trajectories{"straight", "c_shape", "s_shape"};
  for (const auto& traj : trajectories) {
    double nominal_total = 0.0;
    for (std::size_t s = 0; s < theta_sets.size(); ++s) {
      ExperimentConfig eval_cfg = config;
      eval_cfg.trajectory_preset = traj;
      // Same plant noise realization for every theta on a trajectory.
      const Rollout r =
          run_plant_rollout(eval_cfg.loop(), theta_sets[s].second,
                            config.distortion(), config.seed,
                            "compare-" + traj);
      CompareRow row;
      row.trajectory = traj;
      row.label = theta_sets[s].first;
      row.terms = rollout_loss(r);
      row.total = row.terms.total(config.tune_alpha1, config.tune_alpha2);
      row.fell = r.fell;
      if (s == 0) nominal_total = row.total;
      row.pct_reduction_vs_nominal =
          nominal_total != 0.0
              ? 100.0 * (nominal_total - row.total) / nominal_total
              : 0.0;
      res.rows.push_back(row);
    }
  }

  res.csv_path = join(out_dir, "comparison.csv");
  CsvWriter out(res.csv_path,
                {"trajectory", "label", "l_eul", "l_pos", "l_ctrl", "loss",
                 "pct_reduction_vs_" + theta_sets[0].first, "fell"});
  for (const auto& row : res.rows) {
    out.raw_row({row.trajectory, row.label, format_double(row.terms.l_eul),
                 format_double(row.terms.l_pos),
                 format_double(row.terms.l_ctrl), format_double(row.total),
                 format_double(row.pct_reduction_vs_nominal),
                 row.fell ? "1" : "0"});
  }
  out.close();

  // Aligned text table.
  res.table_path = join(out_dir, "comparison.txt");
  std::ofstream table(res.table_path, std::ios::binary);
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-16s %12s %12s %12s %14s %8s\n",
                "trajectory", "label", "L_eul", "L_pos", "L_ctrl", "L",
                "red_%");
  table << line;
  for (const auto& row : res.rows) {
    std::snprintf(line, sizeof(line),
                  "%-10s %-16s %12.5g %12.5g %12.5g %14.6g %8.2f\n",
                  row.trajectory.c_str(), row.label.c_str(), row.terms.l_eul,
                  row.terms.l_pos, row.terms.l_ctrl, row.total,
                  row.pct_reduction_vs_nominal);
    table << line;
  }
  table.close();

  write_manifest(out_dir, "compare", config.hash_hex(),
                 {"comparison.csv", "comparison.txt"});
  return res;
}

}  // namespace mpctune
