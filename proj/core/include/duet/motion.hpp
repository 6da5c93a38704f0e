#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

/// Width of one pose feature row: positions (3J), velocities (3J),
/// 6D local rotations (6J) and four foot-contact flags.
int feature_dim(int joint_count);

/// Column offsets of the four blocks inside a pose feature row.
struct FeatureLayout {
  explicit FeatureLayout(int joint_count);

  int joints;
  int positions;   // 3J columns
  int velocities;  // 3J columns
  int rotations;   // 6J columns
  int contacts;    // 4 columns
  int width;
};

/// Frames are stored in single precision so that file round-trips are exact.
using FrameMatrix = Eigen::MatrixXf;

struct MotionSequence {
  FrameMatrix frames;  // S x feature_dim(joint_count)
  int joint_count = 0;
  float fps = 20.0F;

  int frame_count() const { return static_cast<int>(frames.rows()); }
  /// Throws std::invalid_argument when S < 1 or the row width is wrong.
  void validate() const;

  bool operator==(const MotionSequence& other) const;
};

struct DualMotion {
  MotionSequence person1;
  MotionSequence person2;
  std::string id;

  int frame_count() const { return person1.frame_count(); }
  int joint_count() const { return person1.joint_count; }
  /// Both persons must share S, joint count and fps.
  void validate() const;

  bool operator==(const DualMotion& other) const = default;
};

/// Global joint positions of one person, S x 3J laid out as x0 y0 z0 x1 ...
struct JointPositions {
  Matrix xyz;
  int joints = 0;

  int frames() const { return static_cast<int>(xyz.rows()); }
  Eigen::Vector3d at(int frame, int joint) const {
    return xyz.block<1, 3>(frame, 3 * joint).transpose();
  }
};

JointPositions joint_positions(const MotionSequence& motion);

/// K half-open frame intervals that partition [0, S).
struct SegmentLayout {
  std::vector<std::pair<int, int>> bounds;
  int frames = 0;

  int segments() const { return static_cast<int>(bounds.size()); }
  int segment_of(int frame) const;
  /// S x K one-hot assignment matrix.
  Matrix assignment() const;
};

/// Segment i spans [floor(i*S/K), floor((i+1)*S/K)).
SegmentLayout segment_bounds(int frames, int segments);

// 6D rotation encoding: the first two columns of the rotation matrix,
// stored column after column.
Eigen::Matrix<double, 6, 1> rotation_to_6d(const Eigen::Matrix3d& r);
/// Gram-Schmidt orthonormalization of a 6D encoding.
Eigen::Matrix3d rotation_from_6d(const Eigen::Matrix<double, 6, 1>& v);

/// Checks the per-frame pose invariants (contact flags binary, rotation blocks
/// orthonormalize to det +1, finite values). Returns a description of the
/// first violation, or nothing.
std::optional<std::string> check_pose_invariants(const MotionSequence& motion,
                                                 double rotation_tol = 1e-5);

}  // namespace duet
