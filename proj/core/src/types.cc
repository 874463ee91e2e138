#include "gaitforge/types.h"

namespace gaitforge {

int JointIndex(std::string_view name) {
  for (int j = 0; j < kNumJoints; ++j) {
    if (kJointNames[j] == name) return j;
  }
  return -1;
}

double StandardNormal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double Uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace gaitforge
