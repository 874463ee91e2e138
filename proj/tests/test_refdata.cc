#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "gaitforge/csv.h"
#include "gaitforge/refdata.h"

namespace gaitforge {
namespace {

class RefData : public ::testing::Test {
 protected:
  Dynamics dyn{BuildDefaultModel(ActuationMode::kTorque)};
};

std::string ClipCsv(const GaitClip& clip) {
  std::ostringstream out;
  WriteClipCsv(out, clip);
  return out.str();
}

// Planar forward kinematics written out segment by segment.
Vec2 ComOracle(const ModelSpec& spec, const Vec9& q) {
  std::map<std::string, std::pair<Vec2, double>> frame;  // origin, angle
  frame["pelvis"] = {Vec2(q[kPelvisTx], q[kPelvisTy]), q[kPelvisTilt]};
  for (int j = 1; j < kNumJoints; ++j) {
    const auto& joint = spec.joints[j];
    const auto& [po, pa] = frame.at(joint.parent);
    const double c = std::cos(pa), s = std::sin(pa);
    const Vec2 loc(c * joint.location.x() - s * joint.location.y(),
                   s * joint.location.x() + c * joint.location.y());
    frame[joint.child] = {po + loc, pa + joint.axis * q[JointCoord(j)]};
  }
  Vec2 sum = Vec2::Zero();
  double mass = 0.0;
  for (const auto& seg : spec.segments) {
    const auto& [o, a] = frame.at(seg.name);
    const double c = std::cos(a), s = std::sin(a);
    sum += seg.mass * (o + Vec2(c * seg.com_offset.x() - s * seg.com_offset.y(),
                                s * seg.com_offset.x() + c * seg.com_offset.y()));
    mass += seg.mass;
  }
  return sum / mass;
}

TEST_F(RefData, SyntheticClipShape) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  EXPECT_EQ(clip.size(), 130u);
  EXPECT_NEAR(clip.duration, 1.29, 1e-12);
  EXPECT_EQ(clip.qdot.size(), 130u);
  EXPECT_EQ(clip.task.size(), 130u);
  EXPECT_EQ(clip.task[0].landmark_pos.size(), 10u);
  EXPECT_GT(clip.stride_displacement, 0.0);
  EXPECT_LT(clip.periodicity_residual, 1e-9);
}

TEST_F(RefData, SyntheticClipIsDeterministicPerSeed) {
  EXPECT_EQ(ClipCsv(MakeSyntheticClip(dyn, 130, 0.01, 7)),
            ClipCsv(MakeSyntheticClip(dyn, 130, 0.01, 7)));
  EXPECT_NE(ClipCsv(MakeSyntheticClip(dyn, 130, 0.01, 7)),
            ClipCsv(MakeSyntheticClip(dyn, 130, 0.01, 8)));
}

TEST_F(RefData, CsvRoundTrip) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  const GaitClip back = ParseClip(ClipCsv(clip), "mem", dyn);
  ASSERT_EQ(back.size(), clip.size());
  for (size_t i = 0; i < clip.size(); ++i) EXPECT_EQ(back.frames[i], clip.frames[i]);
  EXPECT_NEAR(back.dt, clip.dt, 1e-15);
}

TEST_F(RefData, ConstantClipHasZeroVelocity) {
  Vec9 pose = Vec9::Zero();
  pose[kPelvisTy] = 0.95;
  pose[kKneeR] = -0.3;
  const GaitClip clip = MakeConstantClip(dyn, pose, 20, 0.01);
  for (const auto& v : clip.qdot) EXPECT_EQ(v, Vec9::Zero());
  EXPECT_EQ(clip.periodicity_residual, 0.0);
  EXPECT_EQ(clip.stride_displacement, 0.0);
}

TEST_F(RefData, OutOfRangeKneeRejected) {
  Vec9 pose = Vec9::Zero();
  pose[kKneeR] = 1.0;
  std::vector<Vec9> frames(5, pose);
  try {
    MakeClip(dyn, 0.01, frames);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("knee_r"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST_F(RefData, ParseErrors) {
  const std::string header = "time,pelvis_tx,pelvis_ty,pelvis_tilt,hip_r,knee_r,ankle_r,hip_l,knee_l,ankle_l\n";
  EXPECT_THROW(ParseClip("time,pelvis_tx\n0,0\n0.01,0\n", "a.csv", dyn), LoadError);
  const std::string uneven = header + "0,0,1,0,0,0,0,0,0,0\n0.01,0,1,0,0,0,0,0,0,0\n0.03,0,1,0,0,0,0,0,0,0\n";
  try {
    ParseClip(uneven, "b.csv", dyn);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  const std::string garbage = header + "0,0,1,0,0,x,0,0,0,0\n0.01,0,1,0,0,0,0,0,0,0\n";
  try {
    ParseClip(garbage, "c.csv", dyn);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("knee_r"), std::string::npos) << e.what();
  }
  const std::string crlf = header + "0,0,1,0,0,0,0,0,0,0\r\n0.01,0,1,0,0,0,0,0,0,0\r\n";
  EXPECT_EQ(ParseClip(crlf, "d.csv", dyn).size(), 2u);
}

TEST_F(RefData, SampleEndpointsAndMidpoints) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  EXPECT_EQ(Sample(clip, dyn, 0.0, 0).q, clip.frames[0]);
  const double mid = 10.5 / 129.0;
  const Vec9 expected = 0.5 * (clip.frames[10] + clip.frames[11]);
  EXPECT_LT((Sample(clip, dyn, mid, 0).q - expected).cwiseAbs().maxCoeff(), 1e-12);
  const ReferenceTargets w2 = Sample(clip, dyn, 0.0, 2);
  EXPECT_NEAR(w2.q[kPelvisTx], clip.frames[0][kPelvisTx] + 2 * clip.stride_displacement,
              1e-12);
}

TEST_F(RefData, SampleContinuousAcrossWrap) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  const double almost = std::nextafter(1.0, 0.0);
  const ReferenceTargets end = Sample(clip, dyn, almost, 1);
  const ReferenceTargets start = Sample(clip, dyn, 0.0, 2);
  EXPECT_LT((end.q - start.q).cwiseAbs().maxCoeff(), 1e-9);
}

TEST_F(RefData, TaskSpaceComMatchesIndependentOracle) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  for (size_t i = 0; i < clip.size(); i += 7) {
    const Vec2 com = ComOracle(dyn.spec(), clip.frames[i]);
    EXPECT_LT((clip.task[i].com - com).cwiseAbs().maxCoeff(), 1e-12) << "frame " << i;
  }
}

TEST_F(RefData, LandmarksArePelvisRelative) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  Vec9 shifted = clip.frames[3];
  shifted[kPelvisTx] += 5.0;
  shifted[kPelvisTy] += 0.1;
  const TaskSpace a = ComputeTaskSpace(dyn, clip.frames[3], Vec9::Zero());
  const TaskSpace b = ComputeTaskSpace(dyn, shifted, Vec9::Zero());
  for (size_t k = 0; k < a.landmark_pos.size(); ++k) {
    EXPECT_LT((a.landmark_pos[k] - b.landmark_pos[k]).norm(), 1e-12);
  }
  EXPECT_EQ(clip.landmark_names.front(), "femur_r");
  EXPECT_EQ(clip.landmark_names.back(), "toes_l");
}

TEST_F(RefData, SyntheticFootDoesNotPenetrateDeeply) {
  const GaitClip clip = MakeSyntheticClip(dyn);
  const auto& spec = dyn.spec();
  for (const auto& q : clip.frames) {
    const KinematicState kin = dyn.Kinematics(q, Vec9::Zero());
    double lowest = 1e9;
    for (const auto& sp : spec.contact_spheres) {
      lowest = std::min(lowest, kin.PointPosition(spec.SegmentIndex(sp.segment), sp.center).y() -
                                    sp.radius);
    }
    EXPECT_NEAR(lowest, 0.0, 2e-3);
  }
}

TEST_F(RefData, Summary) {
  const ClipSummary s = Summarize(MakeSyntheticClip(dyn));
  EXPECT_EQ(s.frames, 130);
  EXPECT_NEAR(s.duration, 1.29, 1e-12);
  EXPECT_GT(s.stride_displacement, 0.0);
  for (int c = 0; c < kNumCoords; ++c) EXPECT_LE(s.min[c], s.max[c]);
}

}  // namespace
}  // namespace gaitforge
