#ifndef GAITFORGE_TYPES_H_
#define GAITFORGE_TYPES_H_

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace gaitforge {

// Generalized coordinates: floating-base translation, base tilt, six leg
// joints. Index 2..8 are the seven rotational joint coordinates.
inline constexpr int kNumCoords = 9;
inline constexpr int kNumJoints = 7;
inline constexpr int kNumMuscles = 14;
inline constexpr int kFirstJointCoord = 2;

enum Coord : int {
  kPelvisTx = 0,
  kPelvisTy = 1,
  kPelvisTilt = 2,
  kHipR = 3,
  kKneeR = 4,
  kAnkleR = 5,
  kHipL = 6,
  kKneeL = 7,
  kAnkleL = 8,
};

inline constexpr std::array<std::string_view, kNumCoords> kCoordNames = {
    "pelvis_tx", "pelvis_ty", "pelvis_tilt", "hip_r", "knee_r",
    "ankle_r",   "hip_l",     "knee_l",      "ankle_l"};

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "pelvis_tilt", "hip_r", "knee_r", "ankle_r", "hip_l", "knee_l", "ankle_l"};

// Muscle order: right leg then left leg.
inline constexpr std::array<std::string_view, 7> kMuscleKinds = {
    "HAM", "GLU", "ILI", "VAS", "GAS", "SOL", "TIA"};

using Vec2 = Eigen::Vector2d;
using Vec9 = Eigen::Matrix<double, kNumCoords, 1>;
using Vec7 = Eigen::Matrix<double, kNumJoints, 1>;
using Mat9 = Eigen::Matrix<double, kNumCoords, kNumCoords>;
using Jac2x9 = Eigen::Matrix<double, 2, kNumCoords>;

using Rng = std::mt19937_64;

// Returns the joint index (0..6) for a joint name, or -1.
int JointIndex(std::string_view name);

// Coordinate index of joint j.
constexpr int JointCoord(int joint) { return kFirstJointCoord + joint; }

// Bad model/environment/training configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation invoked in the wrong actuation mode.
class ModeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// API misuse (stepping a finished episode, bad shapes).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite value produced by the integrator.
class SimulationFault : public std::runtime_error {
 public:
  SimulationFault(const std::string& what, int coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}
  int coordinate() const { return coordinate_; }

 private:
  int coordinate_;
};

// File parse/validation failure, with location when available.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Standard normal draw that carries no state outside the engine, so the
// engine state alone determines the stream (needed for bit-exact resume).
double StandardNormal(Rng& rng);
double Uniform(Rng& rng, double lo, double hi);

}  // namespace gaitforge

#endif  // GAITFORGE_TYPES_H_
