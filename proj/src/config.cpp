#include "mpctune/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mpctune/csv.hpp"

namespace mpctune {

namespace {

// Flat "section.key" -> raw value view of a config file.
struct KvMap {
  std::map<std::string, std::string> kv;
  mutable std::map<std::string, bool> seen;

  static KvMap parse(const std::string& text) {
    KvMap map;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::runtime_error("config line " + std::to_string(lineno) +
                                   ": malformed section header");
        section = line.substr(1, line.size() - 2);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || section.empty())
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": key outside a section");
      map.kv[section + "." + key] = value;
    }
    return map;
  }

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  double num(const std::string& key, double fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    seen[key] = true;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw std::runtime_error("config: bad numeric value for " + key);
    }
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    seen[key] = true;
    return std::stoull(it->second);
  }

  bool flag(const std::string& key, bool fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    seen[key] = true;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw std::runtime_error("config: bad boolean for " + key);
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    seen[key] = true;
    return it->second;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv) {
      (void)value;
      if (!seen.count(key))
        throw std::runtime_error("config: unknown key " + key);
    }
  }
};

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  const KvMap kv = KvMap::parse(text);
  ExperimentConfig c;
  c.robot.mass_kg = kv.num("robot.mass_kg", c.robot.mass_kg);
  Vec3 inertia(c.robot.body_inertia(0, 0), c.robot.body_inertia(1, 1),
               c.robot.body_inertia(2, 2));
  inertia.x() = kv.num("robot.inertia_xx_kgm2", inertia.x());
  inertia.y() = kv.num("robot.inertia_yy_kgm2", inertia.y());
  inertia.z() = kv.num("robot.inertia_zz_kgm2", inertia.z());
  c.robot.body_inertia = inertia.asDiagonal();
  c.robot.toe_length_m = kv.num("robot.toe_length_m", c.robot.toe_length_m);
  c.robot.heel_length_m = kv.num("robot.heel_length_m", c.robot.heel_length_m);
  c.robot.friction_mu = kv.num("robot.friction_mu", c.robot.friction_mu);
  c.robot.torsional_mu_m =
      kv.num("robot.torsional_mu_m", c.robot.torsional_mu_m);
  c.robot.f_max_n = kv.num("robot.f_max_n", c.robot.f_max_n);
  c.robot.hip_width_m = kv.num("robot.hip_width_m", c.robot.hip_width_m);
  c.robot.com_height_m = kv.num("robot.com_height_m", c.robot.com_height_m);
  c.robot.validate();

  c.gait.step_duration_s =
      kv.num("gait.step_duration_s", c.gait.step_duration_s);
  c.gait.settle_s = kv.num("gait.settle_s", c.gait.settle_s);
  c.gait.validate();

  c.trajectory_preset = kv.str("trajectory.preset", c.trajectory_preset);
  c.duration_s = kv.num("trajectory.duration_s", c.duration_s);

  c.mpc.horizon = static_cast<int>(kv.num("mpc.horizon", c.mpc.horizon));
  c.mpc.dt_s = kv.num("mpc.dt_s", c.mpc.dt_s);
  c.mpc.yaw_varying = kv.flag("mpc.yaw_varying", c.mpc.yaw_varying);
  c.mpc.validate();

  c.distortion_lag = kv.num("distortion.lag", c.distortion_lag);
  c.distortion_gain_lo = kv.num("distortion.gain_lo", c.distortion_gain_lo);
  c.distortion_gain_hi = kv.num("distortion.gain_hi", c.distortion_gain_hi);
  c.distortion_deadband_force_n =
      kv.num("distortion.deadband_force_n", c.distortion_deadband_force_n);
  c.distortion_deadband_moment_nm =
      kv.num("distortion.deadband_moment_nm", c.distortion_deadband_moment_nm);
  c.distortion_sat_moment_nm =
      kv.num("distortion.sat_moment_nm", c.distortion_sat_moment_nm);
  c.distortion_noise_force_n =
      kv.num("distortion.noise_force_n", c.distortion_noise_force_n);
  c.distortion_noise_moment_nm =
      kv.num("distortion.noise_moment_nm", c.distortion_noise_moment_nm);

  c.train.lr = kv.num("train.lr", c.train.lr);
  c.train.l2_weight = kv.num("train.l2_weight", c.train.l2_weight);
  c.train.epochs = static_cast<int>(kv.num("train.epochs", c.train.epochs));
  c.train.batch_size =
      static_cast<int>(kv.num("train.batch_size", c.train.batch_size));
  c.train.val_fraction = kv.num("train.val_fraction", c.train.val_fraction);
  c.train.validate();

  c.tune_alpha1 = kv.num("tune.alpha1", c.tune_alpha1);
  c.tune_alpha2 = kv.num("tune.alpha2", c.tune_alpha2);
  c.tune_beta_q = kv.num("tune.beta_q", c.tune_beta_q);
  c.tune_beta_r = kv.num("tune.beta_r", c.tune_beta_r);
  c.tune_iterations =
      static_cast<int>(kv.num("tune.iterations", c.tune_iterations));
  c.tune_duration_s = kv.num("tune.duration_s", c.tune_duration_s);
  c.tune_step_mode = step_mode_from_string(
      kv.str("tune.step_mode", to_string(c.tune_step_mode)));

  c.data_rollouts_per_trajectory = static_cast<int>(
      kv.num("data.rollouts_per_trajectory", c.data_rollouts_per_trajectory));
  c.data_perturb_v_mps = kv.num("data.perturb_v_mps", c.data_perturb_v_mps);
  c.data_perturb_yaw_frac =
      kv.num("data.perturb_yaw_frac", c.data_perturb_yaw_frac);
  c.data_perturb_yaw_radps =
      kv.num("data.perturb_yaw_radps", c.data_perturb_yaw_radps);

  c.seed = kv.integer("run.seed", c.seed);
  kv.reject_unknown();
  return c;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  auto d = [](double v) { return format_double(v); };
  out << "[robot]\n";
  out << "mass_kg = " << d(robot.mass_kg) << "\n";
  out << "inertia_xx_kgm2 = " << d(robot.body_inertia(0, 0)) << "\n";
  out << "inertia_yy_kgm2 = " << d(robot.body_inertia(1, 1)) << "\n";
  out << "inertia_zz_kgm2 = " << d(robot.body_inertia(2, 2)) << "\n";
  out << "toe_length_m = " << d(robot.toe_length_m) << "\n";
  out << "heel_length_m = " << d(robot.heel_length_m) << "\n";
  out << "friction_mu = " << d(robot.friction_mu) << "\n";
  out << "torsional_mu_m = " << d(robot.torsional_mu_m) << "\n";
  out << "f_max_n = " << d(robot.f_max_n) << "\n";
  out << "hip_width_m = " << d(robot.hip_width_m) << "\n";
  out << "com_height_m = " << d(robot.com_height_m) << "\n";
  out << "[gait]\n";
  out << "step_duration_s = " << d(gait.step_duration_s) << "\n";
  out << "settle_s = " << d(gait.settle_s) << "\n";
  out << "[trajectory]\n";
  out << "preset = " << trajectory_preset << "\n";
  out << "duration_s = " << d(duration_s) << "\n";
  out << "[mpc]\n";
  out << "horizon = " << mpc.horizon << "\n";
  out << "dt_s = " << d(mpc.dt_s) << "\n";
  out << "yaw_varying = " << (mpc.yaw_varying ? "true" : "false") << "\n";
  out << "[distortion]\n";
  out << "lag = " << d(distortion_lag) << "\n";
  out << "gain_lo = " << d(distortion_gain_lo) << "\n";
  out << "gain_hi = " << d(distortion_gain_hi) << "\n";
  out << "deadband_force_n = " << d(distortion_deadband_force_n) << "\n";
  out << "deadband_moment_nm = " << d(distortion_deadband_moment_nm) << "\n";
  out << "sat_moment_nm = " << d(distortion_sat_moment_nm) << "\n";
  out << "noise_force_n = " << d(distortion_noise_force_n) << "\n";
  out << "noise_moment_nm = " << d(distortion_noise_moment_nm) << "\n";
  out << "[train]\n";
  out << "lr = " << d(train.lr) << "\n";
  out << "l2_weight = " << d(train.l2_weight) << "\n";
  out << "epochs = " << train.epochs << "\n";
  out << "batch_size = " << train.batch_size << "\n";
  out << "val_fraction = " << d(train.val_fraction) << "\n";
  out << "[tune]\n";
  out << "alpha1 = " << d(tune_alpha1) << "\n";
  out << "alpha2 = " << d(tune_alpha2) << "\n";
  out << "beta_q = " << d(tune_beta_q) << "\n";
  out << "beta_r = " << d(tune_beta_r) << "\n";
  out << "iterations = " << tune_iterations << "\n";
  out << "duration_s = " << d(tune_duration_s) << "\n";
  out << "step_mode = " << to_string(tune_step_mode) << "\n";
  out << "[data]\n";
  out << "rollouts_per_trajectory = " << data_rollouts_per_trajectory << "\n";
  out << "perturb_v_mps = " << d(data_perturb_v_mps) << "\n";
  out << "perturb_yaw_frac = " << d(data_perturb_yaw_frac) << "\n";
  out << "perturb_yaw_radps = " << d(data_perturb_yaw_radps) << "\n";
  out << "[run]\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << serialize();
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string s = serialize();
  return fnv1a64(s.data(), s.size());
}

std::string ExperimentConfig::hash_hex() const { return mpctune::hash_hex(hash()); }

TrajectorySpec ExperimentConfig::trajectory() const {
  return TrajectorySpec::preset(trajectory_preset, duration_s,
                                robot.com_height_m);
}

ClosedLoopSetup ExperimentConfig::loop() const {
  ClosedLoopSetup setup;
  setup.robot = robot;
  setup.gait = gait;
  setup.traj = trajectory();
  setup.mpc = mpc;
  return setup;
}

ActuatorDistortion ExperimentConfig::distortion() const {
  return ActuatorDistortion::defaults(
      seed, robot, distortion_lag, distortion_gain_lo, distortion_gain_hi,
      distortion_deadband_force_n, distortion_deadband_moment_nm,
      distortion_sat_moment_nm, distortion_noise_force_n,
      distortion_noise_moment_nm);
}

TuneConfig ExperimentConfig::tune_config() const {
  TuneConfig cfg;
  cfg.alpha1 = tune_alpha1;
  cfg.alpha2 = tune_alpha2;
  cfg.beta_q = tune_beta_q;
  cfg.beta_r = tune_beta_r;
  cfg.iterations = tune_iterations;
  cfg.loop = loop();
  cfg.horizon_steps =
      static_cast<int>(std::llround(tune_duration_s / mpc.dt_s));
  cfg.step_mode = tune_step_mode;
  return cfg;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  return fnv1a64(s.data(), s.size());
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mpctune
