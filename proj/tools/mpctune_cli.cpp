// Command-line pipeline: simulate, collect-data, train-grfm, tune, compare.
// Exit codes: 0 success, 2 usage/config error, 3 infeasible or fall,
// 4 I/O or internal error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mpctune/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFall = 3;
constexpr int kExitIo = 4;

mpctune::ExperimentConfig load_config(const std::string& path) {
  return mpctune::ExperimentConfig::from_file(path);
}

mpctune::MpcTheta resolve_theta(const std::string& spec) {
  if (spec.empty() || spec == "nominal") return mpctune::MpcTheta::nominal();
  return mpctune::load_theta(spec).theta;
}

int run_verify(const std::string& out_dir, const std::string& command) {
  if (!mpctune::verify_manifest(out_dir, command)) {
    std::cerr << "verify: output hashes do not match the manifest\n";
    return kExitIo;
  }
  std::cout << "verify: ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locomotion-MPC weight autotuning pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", theta_spec = "nominal";
  std::string models_dir, dataset_path;
  bool on_plant = false, on_nominal = false, verify = false;
  bool with_net = false, without_net = false;
  std::vector<std::string> theta_args;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")
        ->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_flag("--verify", verify, "re-read outputs and check hashes");
  };

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop rollout to CSV");
  add_common(sim);
  sim->add_option("--theta", theta_spec, "theta checkpoint path or 'nominal'");
  sim->add_flag("--plant", on_plant, "run on the distorted surrogate plant");
  sim->add_flag("--nominal", on_nominal, "run on the differentiable simulator");
  sim->add_option("--models", models_dir,
                  "model directory to augment the nominal simulator");

  CLI::App* collect =
      app.add_subcommand("collect-data", "plant rollouts to a dataset CSV");
  add_common(collect);

  CLI::App* train =
      app.add_subcommand("train-grfm", "train the force/moment nets");
  add_common(train);
  train->add_option("--dataset", dataset_path, "dataset CSV path")->required();

  CLI::App* tune_cmd =
      app.add_subcommand("tune", "projected-gradient weight tuning");
  add_common(tune_cmd);
  tune_cmd->add_flag("--with-net", with_net, "augment the simulator with nets");
  tune_cmd->add_flag("--without-net", without_net, "tune on the nominal model");
  tune_cmd->add_option("--models", models_dir, "model directory for --with-net");

  CLI::App* compare =
      app.add_subcommand("compare", "evaluate theta sets on the plant");
  add_common(compare);
  compare->add_option("--theta", theta_args,
                      "labeled checkpoint name=path ('nominal' built in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    const mpctune::ExperimentConfig config = load_config(config_path);

    if (sim->parsed()) {
      if (on_plant == on_nominal)
        throw std::invalid_argument("simulate: pass exactly one of --plant/--nominal");
      std::optional<mpctune::NetPair> nets;
      if (!models_dir.empty() && !on_plant)
        nets = mpctune::load_net_pair(models_dir);
      const auto res = mpctune::cmd_simulate(config, resolve_theta(theta_spec),
                                             on_plant, nets, out_dir);
      std::printf("simulate: %d steps, L_eul=%.6g L_pos=%.6g L_ctrl=%.6g L=%.6g -> %s\n",
                  res.rollout.steps(), res.loss.l_eul, res.loss.l_pos,
                  res.loss.l_ctrl, res.total_loss, res.csv_path.c_str());
      if (verify && run_verify(out_dir, "simulate") != 0) return kExitIo;
      if (res.fell) {
        std::cerr << "simulate: rollout fell at step " << res.rollout.fall_step
                  << "\n";
        return kExitFall;
      }
      return 0;
    }

    if (collect->parsed()) {
      const auto res = mpctune::cmd_collect_data(config, out_dir);
      std::printf("collect-data: %d records (%d fallen rollouts) -> %s\n",
                  res.records, res.fallen_rollouts, res.csv_path.c_str());
      if (verify && run_verify(out_dir, "collect-data") != 0) return kExitIo;
      return 0;
    }

    if (train->parsed()) {
      const auto res = mpctune::cmd_train_grfm(config, dataset_path, out_dir);
      std::printf("train-grfm: force val MSE %.6g (best epoch %d), "
                  "moment val MSE %.6g (best epoch %d)\n",
                  res.force_final_val_mse, res.force_best_epoch,
                  res.moment_final_val_mse, res.moment_best_epoch);
      if (verify && run_verify(out_dir, "train-grfm") != 0) return kExitIo;
      return 0;
    }

    if (tune_cmd->parsed()) {
      if (with_net == without_net)
        throw std::invalid_argument("tune: pass exactly one of --with-net/--without-net");
      if (with_net && models_dir.empty())
        throw std::invalid_argument("tune: --with-net requires --models");
      const auto res = mpctune::cmd_tune(config, with_net, models_dir, out_dir);
      std::printf("tune: best loss %.6g at iteration %d (%zu evaluations)%s -> %s\n",
                  *std::min_element(res.tune.loss_history.begin(),
                                    res.tune.loss_history.end()),
                  res.tune.best_iteration, res.tune.loss_history.size(),
                  res.tune.aborted ? " [aborted]" : "", res.theta_path.c_str());
      if (verify &&
          run_verify(out_dir, with_net ? "tune-with-net" : "tune-without-net") != 0)
        return kExitIo;
      return res.tune.aborted ? kExitFall : 0;
    }

    if (compare->parsed()) {
      std::vector<std::pair<std::string, mpctune::MpcTheta>> sets;
      sets.emplace_back("nominal", mpctune::MpcTheta::nominal());
      for (const auto& arg : theta_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("compare: --theta expects name=path");
        sets.emplace_back(arg.substr(0, eq), resolve_theta(arg.substr(eq + 1)));
      }
      const auto res = mpctune::cmd_compare(config, sets, out_dir);
      std::ifstream table(res.table_path);
      std::cout << table.rdbuf();
      if (verify && run_verify(out_dir, "compare") != 0) return kExitIo;
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
