#include "gaitforge/refdata.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gaitforge/csv.h"

namespace gaitforge {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string RangeError(int frame, int coord, double value) {
  std::ostringstream msg;
  msg.precision(10);
  msg << "row " << frame + 1 << ", column '" << kCoordNames[coord]
      << "': value " << value << " outside joint range";
  return msg.str();
}

}  // namespace

TaskSpace ComputeTaskSpace(const Dynamics& dynamics, const Vec9& q,
                           const Vec9& qdot) {
  const KinematicState kin = dynamics.Kinematics(q, qdot);
  const Vec2 pelvis = kin.origin(0);
  const Vec2 pelvis_vel = kin.origin_velocity(0);
  TaskSpace out;
  for (const auto& lm : CollectLandmarks(dynamics.spec())) {
    out.landmark_pos.push_back(kin.PointPosition(lm.segment, lm.local) - pelvis);
    out.landmark_vel.push_back(kin.PointVelocity(lm.segment, lm.local) -
                               pelvis_vel);
  }
  out.com = kin.CenterOfMass();
  out.com_vel = kin.CenterOfMassVelocity();
  return out;
}

GaitClip MakeClip(const Dynamics& dynamics, double dt, std::vector<Vec9> frames) {
  if (frames.size() < 2) throw LoadError("reference clip needs >= 2 frames");
  if (!(dt > 0.0)) throw LoadError("reference clip needs dt > 0");
  const ModelSpec& spec = dynamics.spec();
  for (size_t i = 0; i < frames.size(); ++i) {
    for (int j = 0; j < kNumJoints; ++j) {
      const auto& joint = spec.joints[j];
      const double margin = kClipRangeMargin * (joint.range_max - joint.range_min);
      const double v = frames[i][JointCoord(j)];
      if (!std::isfinite(v) || v < joint.range_min - margin ||
          v > joint.range_max + margin) {
        throw LoadError(RangeError(static_cast<int>(i), JointCoord(j), v));
      }
    }
  }
  GaitClip clip;
  clip.dt = dt;
  clip.frames = std::move(frames);
  const size_t n = clip.frames.size();
  clip.duration = static_cast<double>(n - 1) * dt;
  clip.stride_displacement =
      clip.frames.back()[kPelvisTx] - clip.frames.front()[kPelvisTx];
  for (int c = kPelvisTy; c < kNumCoords; ++c) {
    clip.periodicity_residual =
        std::max(clip.periodicity_residual,
                 std::abs(clip.frames.back()[c] - clip.frames.front()[c]));
  }
  clip.qdot.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (i == 0) {
      clip.qdot[i] = (clip.frames[1] - clip.frames[0]) / dt;
    } else if (i + 1 == n) {
      clip.qdot[i] = (clip.frames[i] - clip.frames[i - 1]) / dt;
    } else {
      clip.qdot[i] = (clip.frames[i + 1] - clip.frames[i - 1]) / (2.0 * dt);
    }
  }
  for (const auto& lm : CollectLandmarks(spec)) clip.landmark_names.push_back(lm.name);
  clip.task.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    clip.task.push_back(ComputeTaskSpace(dynamics, clip.frames[i], clip.qdot[i]));
  }
  return clip;
}

GaitClip ParseClip(std::string_view csv_text, const std::string& origin,
                   const Dynamics& dynamics) {
  const CsvTable table = ParseCsv(csv_text, origin);
  const int time_col = table.Column("time");
  if (time_col < 0) throw LoadError(origin + ": missing column 'time'");
  std::array<int, kNumCoords> cols{};
  for (int c = 0; c < kNumCoords; ++c) {
    cols[c] = table.Column(kCoordNames[c]);
    if (cols[c] < 0) {
      throw LoadError(origin + ": missing column '" +
                      std::string(kCoordNames[c]) + "'");
    }
  }
  if (table.rows.size() < 2) {
    throw LoadError(origin + ": reference clip needs >= 2 frames");
  }
  std::vector<double> times(table.rows.size());
  std::vector<Vec9> frames(table.rows.size());
  try {
    for (size_t r = 0; r < table.rows.size(); ++r) {
      times[r] = table.Number(r, time_col);
      for (int c = 0; c < kNumCoords; ++c) frames[r][c] = table.Number(r, cols[c]);
    }
  } catch (const LoadError& e) {
    throw LoadError(origin + ": " + e.what());
  }
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw LoadError(origin + ": time must increase");
  for (size_t r = 1; r < times.size(); ++r) {
    const double step = times[r] - times[r - 1];
    if (std::abs(step - dt) > kClipTimeTolerance) {
      throw LoadError(origin + ": row " + std::to_string(r + 1) +
                      ", column 'time': non-uniform spacing");
    }
  }
  try {
    return MakeClip(dynamics, dt, std::move(frames));
  } catch (const LoadError& e) {
    throw LoadError(origin + ": " + e.what());
  }
}

GaitClip LoadClip(const std::string& path, const Dynamics& dynamics) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return ParseClip(text.str(), path, dynamics);
}

void WriteClipCsv(std::ostream& out, const GaitClip& clip) {
  std::vector<std::string> header{"time"};
  for (auto name : kCoordNames) header.emplace_back(name);
  CsvWriter writer(out, header);
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    writer.Add(static_cast<double>(i) * clip.dt);
    for (int c = 0; c < kNumCoords; ++c) writer.Add(clip.frames[i][c]);
    writer.EndRow();
  }
}

ReferenceTargets Sample(const GaitClip& clip, const Dynamics& dynamics,
                        double phase, long wraps) {
  const size_t n = clip.frames.size();
  const double pos = std::clamp(phase, 0.0, 1.0) * static_cast<double>(n - 1);
  size_t i0 = static_cast<size_t>(std::floor(pos));
  if (i0 >= n - 1) i0 = n - 2;
  const double w = pos - static_cast<double>(i0);
  ReferenceTargets out;
  out.q = (1.0 - w) * clip.frames[i0] + w * clip.frames[i0 + 1];
  out.qdot = (1.0 - w) * clip.qdot[i0] + w * clip.qdot[i0 + 1];
  if (w == 0.0) {
    out.q = clip.frames[i0];
    out.qdot = clip.qdot[i0];
  }
  out.q[kPelvisTx] += static_cast<double>(wraps) * clip.stride_displacement;
  out.task = ComputeTaskSpace(dynamics, out.q, out.qdot);
  return out;
}

GaitClip MakeSyntheticClip(const Dynamics& dynamics, int frames, double dt,
                           unsigned long seed) {
  if (frames < 3) throw ConfigError("synthetic clip needs >= 3 frames");
  std::array<double, 4> gain;
  gain.fill(1.0);
  if (seed != 0) {
    Rng rng(seed);
    for (double& g : gain) g = 1.0 + 0.05 * Uniform(rng, -1.0, 1.0);
  }
  const ModelSpec& spec = dynamics.spec();
  const double period = static_cast<double>(frames - 1) * dt;

  // Typical sagittal joint angles (degrees) at 10 % gait-cycle intervals
  // from heel strike, in flexion / dorsiflexion positive convention.
  static constexpr std::array<double, 10> kHipFlexion = {
      30, 25, 18, 8, 0, -8, -5, 10, 25, 32};
  static constexpr std::array<double, 10> kKneeFlexion = {
      5, 18, 15, 8, 5, 10, 35, 60, 55, 25};
  static constexpr std::array<double, 10> kAnkleDorsiflexion = {
      0, -5, 3, 8, 10, 5, -15, -10, -2, 0};
  // Periodic Catmull-Rom interpolation of a 10-knot table at cycle
  // fraction u.
  auto curve = [](const std::array<double, 10>& knots, double u) {
    u -= std::floor(u);
    const double pos = u * 10.0;
    const int i = static_cast<int>(std::floor(pos)) % 10;
    const double t = pos - std::floor(pos);
    const double p0 = knots[(i + 9) % 10];
    const double p1 = knots[i];
    const double p2 = knots[(i + 1) % 10];
    const double p3 = knots[(i + 2) % 10];
    const double v = 0.5 * ((2.0 * p1) + (-p0 + p2) * t +
                            (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                            (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
    return v * std::numbers::pi / 180.0;
  };
  // Joint coordinates here are extension / plantarflexion positive.
  auto leg = [&](double u, double* hip, double* knee, double* ankle) {
    *hip = -gain[0] * curve(kHipFlexion, u);
    *knee = -gain[1] * curve(kKneeFlexion, u);
    *ankle = -gain[2] * curve(kAnkleDorsiflexion, u);
  };

  std::vector<Vec9> poses(frames);
  for (int i = 0; i < frames; ++i) {
    const double u = static_cast<double>(i) * dt / period;
    Vec9 q = Vec9::Zero();
    q[kPelvisTilt] = 0.03 * gain[3] * std::sin(2.0 * kTwoPi * u);
    leg(u, &q[kHipR], &q[kKneeR], &q[kAnkleR]);
    leg(u + 0.5, &q[kHipL], &q[kKneeL], &q[kAnkleL]);
    poses[i] = q;
  }
  // Exact periodicity: the last frame repeats the first pose.
  poses[frames - 1] = poses[0];

  // Contact points relative to the pelvis origin. The pelvis sits so the
  // lowest point is just below the ground and advances so that point does
  // not slide between consecutive frames.
  constexpr double kGroundPenetration = 0.0015;
  std::vector<std::vector<Vec2>> points(frames);
  for (int i = 0; i < frames; ++i) {
    const KinematicState kin = dynamics.Kinematics(poses[i], Vec9::Zero());
    for (const auto& sphere : spec.contact_spheres) {
      const int seg = spec.SegmentIndex(sphere.segment);
      points[i].push_back(kin.PointPosition(seg, sphere.center) -
                          Vec2(0.0, sphere.radius));
    }
  }
  double x = 0.0;
  for (int i = 0; i < frames; ++i) {
    size_t lowest = 0;
    for (size_t k = 1; k < points[i].size(); ++k) {
      if (points[i][k].y() < points[i][lowest].y()) lowest = k;
    }
    if (i > 0) x -= points[i][lowest].x() - points[i - 1][lowest].x();
    poses[i][kPelvisTx] = x;
    poses[i][kPelvisTy] = -points[i][lowest].y() - kGroundPenetration;
  }
  return MakeClip(dynamics, dt, std::move(poses));
}

GaitClip MakeConstantClip(const Dynamics& dynamics, const Vec9& pose,
                          int frames, double dt) {
  return MakeClip(dynamics, dt, std::vector<Vec9>(frames, pose));
}

ClipSummary Summarize(const GaitClip& clip) {
  ClipSummary s;
  s.duration = clip.duration;
  s.stride_displacement = clip.stride_displacement;
  s.periodicity_residual = clip.periodicity_residual;
  s.frames = static_cast<int>(clip.frames.size());
  s.dt = clip.dt;
  s.min = clip.frames.front();
  s.max = clip.frames.front();
  for (const auto& f : clip.frames) {
    s.min = s.min.cwiseMin(f);
    s.max = s.max.cwiseMax(f);
  }
  return s;
}

}  // namespace gaitforge
