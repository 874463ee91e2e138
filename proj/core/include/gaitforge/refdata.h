#ifndef GAITFORGE_REFDATA_H_
#define GAITFORGE_REFDATA_H_

#include <string>
#include <vector>

#include "gaitforge/dynamics.h"
#include "gaitforge/model.h"

namespace gaitforge {

// Task-space quantities for one pose. Landmark positions and velocities are
// relative to the pelvis origin, in world-aligned axes; COM is world-frame.
struct TaskSpace {
  std::vector<Vec2> landmark_pos;
  std::vector<Vec2> landmark_vel;
  Vec2 com = Vec2::Zero();
  Vec2 com_vel = Vec2::Zero();
};

TaskSpace ComputeTaskSpace(const Dynamics& dynamics, const Vec9& q,
                           const Vec9& qdot);

// A uniformly sampled reference trajectory of generalized coordinates with
// derived velocities and task-space targets per frame.
struct GaitClip {
  double dt = 0.0;
  std::vector<Vec9> frames;
  std::vector<Vec9> qdot;
  std::vector<TaskSpace> task;
  std::vector<std::string> landmark_names;
  double duration = 0.0;             // (frames - 1) * dt
  double stride_displacement = 0.0;  // pelvis_tx[last] - pelvis_tx[first]
  // Largest joint-coordinate mismatch between the last and first frame
  // (pelvis_tx excluded), i.e. how far the clip is from periodic.
  double periodicity_residual = 0.0;

  size_t size() const { return frames.size(); }
};

struct ReferenceTargets {
  Vec9 q = Vec9::Zero();
  Vec9 qdot = Vec9::Zero();
  TaskSpace task;
};

inline constexpr double kClipTimeTolerance = 1e-6;  // s
inline constexpr double kClipRangeMargin = 0.05;    // fraction of range

// Builds the derived arrays for a clip whose frames and dt are set.
// Throws LoadError when a frame leaves the joint ranges (plus margin).
GaitClip MakeClip(const Dynamics& dynamics, double dt, std::vector<Vec9> frames);

// Reads the CSV reference format:
//   time,pelvis_tx,pelvis_ty,pelvis_tilt,hip_r,knee_r,ankle_r,hip_l,knee_l,ankle_l
GaitClip LoadClip(const std::string& path, const Dynamics& dynamics);
GaitClip ParseClip(std::string_view csv_text, const std::string& origin,
                   const Dynamics& dynamics);

void WriteClipCsv(std::ostream& out, const GaitClip& clip);

// Linear interpolation at t = phase * duration; pelvis_tx advanced by
// wraps * stride_displacement. Task-space targets come from forward
// kinematics of the interpolated pose.
ReferenceTargets Sample(const GaitClip& clip, const Dynamics& dynamics,
                        double phase, long wraps);

// Periodic two-step walk built from sinusoidal joint trajectories. The
// pelvis height keeps the lowest contact point at ground level and the
// pelvis advances so the lower foot does not slide. `seed` perturbs the
// amplitudes deterministically (seed 0 is the nominal gait).
GaitClip MakeSyntheticClip(const Dynamics& dynamics, int frames = 130,
                           double dt = 0.01, unsigned long seed = 0);

// Pose that keeps all joints at zero, repeated for `frames` frames.
GaitClip MakeConstantClip(const Dynamics& dynamics, const Vec9& pose,
                          int frames, double dt);

struct ClipSummary {
  double duration = 0.0;
  double stride_displacement = 0.0;
  double periodicity_residual = 0.0;
  Vec9 min = Vec9::Zero();
  Vec9 max = Vec9::Zero();
  int frames = 0;
  double dt = 0.0;
};

ClipSummary Summarize(const GaitClip& clip);

}  // namespace gaitforge

#endif  // GAITFORGE_REFDATA_H_
