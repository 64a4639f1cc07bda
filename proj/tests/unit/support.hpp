#pragma once

#include "vistrack/kinematics.hpp"

#include <random>

namespace vistrack::testing {

inline JointConfig random_q(const KinematicChain& chain, std::mt19937_64& rng) {
  JointConfig q;
  for (int i = 0; i < kNumJoints; ++i)
    q[i] = std::uniform_real_distribution<double>(chain.limits[i].min, chain.limits[i].max)(rng);
  return q;
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

}  // namespace vistrack::testing
