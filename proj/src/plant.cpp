#include "mpctune/plant.hpp"

#include <cmath>

#include "mpctune/csv.hpp"
#include "mpctune/srbm.hpp"

namespace mpctune {

ActuatorDistortion ActuatorDistortion::identity() {
  ActuatorDistortion d;
  d.lag_a.setZero();
  d.gain.setOnes();
  d.deadband.setZero();
  d.saturation.setConstant(std::numeric_limits<double>::infinity());
  d.noise_std.setZero();
  return d;
}

ActuatorDistortion ActuatorDistortion::defaults(std::uint64_t seed,
                                                const RobotParams& params,
                                                double lag, double gain_lo,
                                                double gain_hi,
                                                double deadband_f,
                                                double deadband_m, double sat_m,
                                                double noise_f,
                                                double noise_m) {
  ActuatorDistortion d;
  d.lag_a.setConstant(lag);
  Rng rng = Rng::substream(seed, "distortion-gains");
  for (int i = 0; i < kControlDim; ++i) d.gain(i) = rng.uniform(gain_lo, gain_hi);
  d.deadband.head<6>().setConstant(deadband_f);
  d.deadband.tail<6>().setConstant(deadband_m);
  d.saturation.head<6>().setConstant(params.f_max_n);
  d.saturation.tail<6>().setConstant(sat_m);
  d.noise_std.head<6>().setConstant(noise_f);
  d.noise_std.tail<6>().setConstant(noise_m);
  return d;
}

ControlVec distort(const CommandWindow& u_hist, const ActuatorDistortion& model,
                   DistortionState& state) {
  const Eigen::Array<double, kControlDim, 1> u =
      u_hist.col(kHistoryLen - 1).array();
  if (!state.primed) {
    state.lag = u;
    state.primed = true;
  } else {
    state.lag = model.lag_a * state.lag + (1.0 - model.lag_a) * u;
  }
  Eigen::Array<double, kControlDim, 1> v = model.gain * state.lag;
  v = v.sign() * (v.abs() - model.deadband).max(0.0);
  v = v.min(model.saturation).max(-model.saturation);
  ControlVec effect;
  for (int i = 0; i < kControlDim; ++i)
    effect(i) = v(i) + state.rng.gaussian(0.0, model.noise_std(i));
  return effect;
}

bool state_diverged(const StateVec& x, const RobotParams& params) {
  if (!x.allFinite()) return true;
  if (std::abs(x(0)) > kFallRollRad || std::abs(x(1)) > kFallPitchRad)
    return true;
  if (std::abs(x(5) - params.com_height_m) > kFallHeightM) return true;
  if (x.segment<3>(9).norm() > kFallSpeedMps) return true;
  return false;
}

PlantStepResult plant_step(const StateVec& x, const CommandWindow& u_hist,
                           const FootConfig& feet,
                           const ActuatorDistortion& model,
                           DistortionState& state, const RobotParams& params,
                           double dt, int substeps) {
  if (substeps < 1) throw std::invalid_argument("plant_step: substeps >= 1");
  PlantStepResult res;
  res.effect = distort(u_hist, model, state);
  const ControlInput eff = ControlInput::from_vec(res.effect);
  StateVec xk = x;
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) {
    const SrbmState sk = SrbmState::from_vec(xk);
    xk += h * srbm::continuous_dynamics(sk, eff, feet, params);
  }
  res.x_next = xk;
  res.fallen = state_diverged(xk, params);
  return res;
}

void GrfmDataset::to_matrices(ChannelGroup group, Eigen::MatrixXd& X,
                              Eigen::MatrixXd& Y) const {
  const int off = group_channel_offset(group);
  const auto n = static_cast<Eigen::Index>(records.size());
  X.resize(n, kNetInput);
  Y.resize(n, kNetOutput);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r)];
    for (int w = 0; w < kHistoryLen; ++w)
      X.block<1, 6>(r, 6 * w) = rec.u_hist.col(w).segment<6>(off).transpose();
    Y.row(r) = rec.effect.segment<6>(off).transpose();
  }
}

namespace {

const char* kChannelNames[kControlDim] = {"f0x", "f0y", "f0z", "f1x",
                                          "f1y", "f1z", "m0x", "m0y",
                                          "m0z", "m1x", "m1y", "m1z"};
const char* kLagNames[kHistoryLen] = {"tm2", "tm1", "t0"};

}  // namespace

void GrfmDataset::save_csv(const std::string& path) const {
  std::vector<std::string> header{"traj_id", "rollout", "step", "t_s"};
  for (int w = 0; w < kHistoryLen; ++w)
    for (int c = 0; c < kControlDim; ++c)
      header.push_back(std::string("cmd_") + kChannelNames[c] + "_" +
                       kLagNames[w]);
  for (int c = 0; c < kControlDim; ++c)
    header.push_back(std::string("eff_") + kChannelNames[c]);
  CsvWriter out(path, header);
  std::vector<double> row(header.size());
  for (const auto& rec : records) {
    std::size_t i = 0;
    row[i++] = rec.traj_id;
    row[i++] = rec.rollout;
    row[i++] = rec.step;
    row[i++] = rec.t_s;
    for (int w = 0; w < kHistoryLen; ++w)
      for (int c = 0; c < kControlDim; ++c) row[i++] = rec.u_hist(c, w);
    for (int c = 0; c < kControlDim; ++c) row[i++] = rec.effect(c);
    out.row(row);
  }
}

GrfmDataset GrfmDataset::load_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  GrfmDataset ds;
  ds.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    GrfmRecord rec;
    rec.traj_id = static_cast<int>(table.num(r, "traj_id"));
    rec.rollout = static_cast<int>(table.num(r, "rollout"));
    rec.step = static_cast<int>(table.num(r, "step"));
    rec.t_s = table.num(r, "t_s");
    for (int w = 0; w < kHistoryLen; ++w)
      for (int c = 0; c < kControlDim; ++c)
        rec.u_hist(c, w) = table.num(r, std::string("cmd_") + kChannelNames[c] +
                                            "_" + kLagNames[w]);
    for (int c = 0; c < kControlDim; ++c)
      rec.effect(c) = table.num(r, std::string("eff_") + kChannelNames[c]);
    ds.records.push_back(rec);
  }
  return ds;
}

}  // namespace mpctune
