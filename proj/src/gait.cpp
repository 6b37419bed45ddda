#include "mpctune/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace mpctune {

std::array<bool, kNumFeet> contact_at(double t, const GaitSchedule& gait) {
  gait.validate();
  if (t < gait.t0_s) throw std::invalid_argument("contact_at: t before t0");
  const double tau = t - gait.t0_s - gait.settle_s;
  if (tau < 0) return {true, true};
  const double cycle = 2.0 * gait.step_duration_s;
  const double phase = tau - cycle * std::floor(tau / cycle);
  const bool first_half = phase < gait.step_duration_s;
  return {first_half, !first_half};
}

double next_stance_start(int foot, double t, const GaitSchedule& gait) {
  if (contact_at(t, gait)[static_cast<std::size_t>(foot)]) return t;
  const double tau = t - gait.t0_s - gait.settle_s;
  const double cycle = 2.0 * gait.step_duration_s;
  const double base = gait.t0_s + gait.settle_s;
  // Foot 0 stance phases start at multiples of the cycle, foot 1 at odd
  // multiples of the step duration.
  const double offset = foot == 0 ? 0.0 : gait.step_duration_s;
  const double k = std::ceil((tau - offset) / cycle);
  return base + offset + k * cycle;
}

Vec3 raibert_placement(const Vec3& com_pos, const Vec3& com_vel,
                       double step_duration_s, double lateral_offset_m,
                       double yaw) {
  if (!(step_duration_s > 0))
    throw std::invalid_argument("raibert: step duration must be positive");
  Vec3 p = com_pos + com_vel * (step_duration_s / 2.0);
  p += yaw_rotation(yaw) * Vec3(0.0, lateral_offset_m, 0.0);
  p.z() = 0.0;
  return p;
}

double TrajectorySpec::yaw_rate_at(double t) const {
  if (yaw_segments.empty()) return 0.0;
  for (const auto& seg : yaw_segments) {
    if (t <= seg.t_end_s) return seg.rate_radps;
  }
  return yaw_segments.back().rate_radps;  // hold past the end (horizon slack)
}

TrajectorySpec TrajectorySpec::preset(const std::string& name,
                                      double duration_s, double com_height_m) {
  TrajectorySpec spec;
  spec.duration_s = duration_s;
  spec.com_height_m = com_height_m;
  if (name == "straight") {
    spec.kind = TrajectoryKind::Straight;
    spec.v_x_mps = 0.5;
    spec.yaw_segments = {{duration_s, 0.0}};
  } else if (name == "c_shape") {
    spec.kind = TrajectoryKind::CShape;
    spec.v_x_mps = 0.25;
    spec.yaw_segments = {{duration_s, 0.25 * M_PI}};
  } else if (name == "s_shape") {
    spec.kind = TrajectoryKind::SShape;
    spec.v_x_mps = 0.5;
    spec.yaw_segments = {{2.0, 0.5 * M_PI}, {duration_s, -0.5 * M_PI}};
  } else {
    throw std::invalid_argument("unknown trajectory preset: " + name);
  }
  return spec;
}

std::string TrajectorySpec::preset_name(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Straight: return "straight";
    case TrajectoryKind::CShape: return "c_shape";
    case TrajectoryKind::SShape: return "s_shape";
    default: return "custom";
  }
}

ReferencePoint reference_point(const TrajectorySpec& spec, double t) {
  if (t < 0) throw std::invalid_argument("reference_point: negative time");
  ReferencePoint ref;
  ref.pos = Vec3(0.0, 0.0, spec.com_height_m);
  double yaw = 0.0;
  double t_done = 0.0;
  const double v = spec.v_x_mps;

  auto advance = [&](double rate, double span) {
    if (span <= 0) return;
    if (std::abs(rate) < 1e-12) {
      ref.pos.x() += v * span * std::cos(yaw);
      ref.pos.y() += v * span * std::sin(yaw);
    } else {
      // Exact arc of radius v/rate.
      const double yaw_next = yaw + rate * span;
      ref.pos.x() += (v / rate) * (std::sin(yaw_next) - std::sin(yaw));
      ref.pos.y() -= (v / rate) * (std::cos(yaw_next) - std::cos(yaw));
      yaw = yaw_next;
    }
  };

  for (std::size_t i = 0; i < spec.yaw_segments.size() && t_done < t; ++i) {
    const double seg_end = std::min(spec.yaw_segments[i].t_end_s, t);
    advance(spec.yaw_segments[i].rate_radps, seg_end - t_done);
    t_done = std::max(t_done, seg_end);
  }
  if (t_done < t) advance(spec.yaw_rate_at(t), t - t_done);  // horizon slack

  ref.yaw = yaw;
  ref.yaw_rate = spec.yaw_rate_at(t);
  ref.vel = Vec3(v * std::cos(yaw), v * std::sin(yaw), 0.0);
  return ref;
}

StateVec reference_state(const TrajectorySpec& spec, double t,
                         const Vec3& gravity) {
  const ReferencePoint ref = reference_point(spec, t);
  StateVec x;
  x.segment<3>(0) = Vec3(0.0, 0.0, ref.yaw);
  x.segment<3>(3) = ref.pos;
  x.segment<3>(6) = Vec3(0.0, 0.0, ref.yaw_rate);
  x.segment<3>(9) = ref.vel;
  x.segment<3>(12) = gravity;
  return x;
}

std::vector<StateVec> generate_reference(const TrajectorySpec& spec, double t,
                                         int n_steps, double dt,
                                         const Vec3& gravity) {
  if (n_steps < 0 || !(dt > 0))
    throw std::invalid_argument("generate_reference: bad horizon");
  std::vector<StateVec> refs;
  refs.reserve(static_cast<std::size_t>(n_steps));
  for (int k = 0; k < n_steps; ++k)
    refs.push_back(reference_state(spec, t + k * dt, gravity));
  return refs;
}

}  // namespace mpctune
