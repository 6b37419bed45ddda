#pragma once

#include <string>
#include <vector>

#include "mpctune/state.hpp"

namespace mpctune {

// Alternating single support with a double-stance settle window at the start.
// Foot 0 takes the first single-stance phase.
struct GaitSchedule {
  double step_duration_s = 0.3;  // swing duration, one phase per foot
  double settle_s = 0.3;         // initial double stance
  double t0_s = 0.0;

  void validate() const {
    if (!(step_duration_s > 0) || settle_s < 0)
      throw std::invalid_argument("gait: bad timing");
  }
};

std::array<bool, kNumFeet> contact_at(double t, const GaitSchedule& gait);

// Start time of the next stance phase of `foot` strictly after time t
// (returns t if the foot is already in stance).
double next_stance_start(int foot, double t, const GaitSchedule& gait);

// Touchdown heuristic p_c + v*dt/2, projected to the ground plane, with a
// signed lateral hip offset applied in the heading frame.
Vec3 raibert_placement(const Vec3& com_pos, const Vec3& com_vel,
                       double step_duration_s, double lateral_offset_m = 0.0,
                       double yaw = 0.0);

struct YawSegment {
  double t_end_s = 0.0;
  double rate_radps = 0.0;
};

enum class TrajectoryKind { Straight, CShape, SShape, Custom };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Straight;
  double v_x_mps = 0.5;
  std::vector<YawSegment> yaw_segments{{4.0, 0.0}};  // piecewise-constant rate
  double duration_s = 4.0;
  double com_height_m = 0.55;

  double yaw_rate_at(double t) const;

  static TrajectorySpec preset(const std::string& name, double duration_s = 4.0,
                               double com_height_m = 0.55);
  static std::string preset_name(TrajectoryKind kind);
};

// Closed-form reference pose at time t: yaw integrates the piecewise-constant
// rate; position follows exact circular arcs (straight lines for zero rate).
struct ReferencePoint {
  double yaw = 0.0;
  double yaw_rate = 0.0;
  Vec3 pos = Vec3::Zero();  // z = com_height
  Vec3 vel = Vec3::Zero();
};

ReferencePoint reference_point(const TrajectorySpec& spec, double t);

StateVec reference_state(const TrajectorySpec& spec, double t,
                         const Vec3& gravity);

std::vector<StateVec> generate_reference(const TrajectorySpec& spec, double t,
                                         int n_steps, double dt,
                                         const Vec3& gravity);

}  // namespace mpctune
