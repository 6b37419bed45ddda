#pragma once

#include <optional>

#include "mpctune/config.hpp"

namespace mpctune {

// Theta checkpoint: structured text with the config hash and the iteration
// the parameters came from.
struct ThetaCheckpoint {
  MpcTheta theta;
  std::string config_hash;
  int iteration = 0;
  bool used_net = false;
};

void save_theta(const std::string& path, const ThetaCheckpoint& ckpt);
ThetaCheckpoint load_theta(const std::string& path);

// Manifest: "<filename> <fnv64>" per output plus the config hash. Written by
// every pipeline command; verify_manifest re-reads the outputs and checks.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_hash,
                    const std::vector<std::string>& files);
bool verify_manifest(const std::string& out_dir, const std::string& command);

struct SimulateResult {
  Rollout rollout;
  LossTerms loss;
  double total_loss = 0.0;
  std::string csv_path;
  bool fell = false;
};

// Closed-loop run on the surrogate plant (on_plant) or the differentiable
// simulator, written as rollout.csv plus an emitted plot script.
SimulateResult cmd_simulate(const ExperimentConfig& config,
                            const MpcTheta& theta, bool on_plant,
                            const std::optional<NetPair>& nets,
                            const std::string& out_dir);

struct CollectDataResult {
  std::string csv_path;
  int records = 0;
  int fallen_rollouts = 0;
};

// Closed-loop plant rollouts over perturbed variants of the three presets.
CollectDataResult cmd_collect_data(const ExperimentConfig& config,
                                   const std::string& out_dir);

struct TrainGrfmResult {
  std::string force_model_path;
  std::string moment_model_path;
  std::string curves_path;
  double force_final_val_mse = 0.0;
  double moment_final_val_mse = 0.0;
  int force_best_epoch = 0;
  int moment_best_epoch = 0;
};

TrainGrfmResult cmd_train_grfm(const ExperimentConfig& config,
                               const std::string& dataset_csv,
                               const std::string& out_dir);

struct TuneCmdResult {
  TuneResult tune;
  std::string theta_path;
  std::string history_path;
};

// Tunes on the differentiable simulator, augmented by the trained nets when
// with_net is set (models_dir must then hold grfm_force.json /
// grfm_moment.json; they are ignored otherwise and that is recorded).
TuneCmdResult cmd_tune(const ExperimentConfig& config, bool with_net,
                       const std::string& models_dir,
                       const std::string& out_dir);

struct CompareRow {
  std::string trajectory;
  std::string label;
  LossTerms terms;
  double total = 0.0;
  double pct_reduction_vs_nominal = 0.0;
  bool fell = false;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::string csv_path;
  std::string table_path;
};

// Evaluates every labeled theta on the surrogate plant over the three
// presets; the first label is the baseline for the percentage columns.
CompareResult cmd_compare(
    const ExperimentConfig& config,
    const std::vector<std::pair<std::string, MpcTheta>>& theta_sets,
    const std::string& out_dir);

// Filenames shared across commands.
inline constexpr const char* kForceModelFile = "grfm_force.json";
inline constexpr const char* kMomentModelFile = "grfm_moment.json";
inline constexpr const char* kDatasetFile = "dataset.csv";

NetPair load_net_pair(const std::string& models_dir);

}  // namespace mpctune
