#ifndef GAITFORGE_SIM_STATE_H_
#define GAITFORGE_SIM_STATE_H_

#include <vector>

#include "gaitforge/types.h"

namespace gaitforge {

// Ground reaction on one contact sphere.
struct ContactWrench {
  int sphere = -1;
  double normal_force = 0.0;    // N, >= 0
  double friction_force = 0.0;  // N, along world x
  Vec2 cop = Vec2::Zero();      // world application point
  double penetration = 0.0;     // m
  double penetration_rate = 0.0;  // m/s
};

struct SimState {
  Vec9 q = Vec9::Zero();
  Vec9 qdot = Vec9::Zero();
  Vec9 qddot = Vec9::Zero();  // from the last dynamics solve
  Eigen::VectorXd activations;  // one per muscle, in [0, 1]
  double time = 0.0;
  double limit_force_max_abs = 0.0;
  std::vector<ContactWrench> grf;
};

}  // namespace gaitforge

#endif  // GAITFORGE_SIM_STATE_H_
