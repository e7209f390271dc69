#pragma once

#include <Eigen/Core>

#include "f3/game.hpp"

namespace f3 {

// Per-step encoder inputs. Joint steps are [onehot(learner) | onehot(opponent)
// | start flag]; single-player steps are [onehot(action) | start flag]. The
// start token (all-zero one-hot blocks, flag set) opens every sequence, so an
// empty history is a one-step sequence.
inline Eigen::MatrixXd joint_step(Action learner, Action opponent, int s) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2 * s + 1, 1);
  x(learner.index, 0) = 1.0;
  x(s + opponent.index, 0) = 1.0;
  return x;
}

inline Eigen::MatrixXd single_step(Action a, int s) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(s + 1, 1);
  x(a.index, 0) = 1.0;
  return x;
}

inline Eigen::MatrixXd start_token(Eigen::Index dim) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, 1);
  x(dim - 1, 0) = 1.0;
  return x;
}

// Fusion-net input: a bare one-hot, no start flag (suffixes are never empty).
inline Eigen::MatrixXd action_one_hot(Action a, int s) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(s, 1);
  x(a.index, 0) = 1.0;
  return x;
}

}  // namespace f3
