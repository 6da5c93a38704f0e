#include "duet/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace duet {

int feature_dim(int joint_count) {
  if (joint_count < 1) {
    throw std::invalid_argument("joint_count must be positive, got " + std::to_string(joint_count));
  }
  return 12 * joint_count + 4;
}

FeatureLayout::FeatureLayout(int joint_count)
    : joints(joint_count),
      positions(0),
      velocities(3 * joint_count),
      rotations(6 * joint_count),
      contacts(12 * joint_count),
      width(feature_dim(joint_count)) {}

void MotionSequence::validate() const {
  if (frames.rows() < 1) throw std::invalid_argument("motion needs at least one frame");
  if (frames.cols() != feature_dim(joint_count)) {
    throw std::invalid_argument("row width " + std::to_string(frames.cols()) +
                                " does not match joint count " + std::to_string(joint_count));
  }
  if (!(fps > 0.0F)) throw std::invalid_argument("fps must be positive");
}

bool MotionSequence::operator==(const MotionSequence& other) const {
  return joint_count == other.joint_count && fps == other.fps &&
         frames.rows() == other.frames.rows() && frames.cols() == other.frames.cols() &&
         frames == other.frames;
}

void DualMotion::validate() const {
  person1.validate();
  person2.validate();
  if (person1.frame_count() != person2.frame_count() ||
      person1.joint_count != person2.joint_count || person1.fps != person2.fps) {
    throw std::invalid_argument("both persons must share frame count, joint count and fps");
  }
}

JointPositions joint_positions(const MotionSequence& motion) {
  motion.validate();
  JointPositions out;
  out.joints = motion.joint_count;
  out.xyz = motion.frames.leftCols(3 * motion.joint_count).cast<double>();
  return out;
}

int SegmentLayout::segment_of(int frame) const {
  for (int i = 0; i < segments(); ++i) {
    if (frame >= bounds[i].first && frame < bounds[i].second) return i;
  }
  throw std::out_of_range("frame outside segment layout");
}

Matrix SegmentLayout::assignment() const {
  Matrix p = Matrix::Zero(frames, segments());
  for (int k = 0; k < segments(); ++k) {
    for (int f = bounds[k].first; f < bounds[k].second; ++f) p(f, k) = 1.0;
  }
  return p;
}

SegmentLayout segment_bounds(int frames, int segments) {
  if (segments < 1) throw std::invalid_argument("segment count must be at least 1");
  if (segments > frames) {
    throw std::invalid_argument("segment count " + std::to_string(segments) +
                                " exceeds frame count " + std::to_string(frames));
  }
  SegmentLayout layout;
  layout.frames = frames;
  layout.bounds.reserve(segments);
  const long s = frames;
  const long k = segments;
  for (long i = 0; i < k; ++i) {
    layout.bounds.emplace_back(static_cast<int>(i * s / k), static_cast<int>((i + 1) * s / k));
  }
  return layout;
}

Eigen::Matrix<double, 6, 1> rotation_to_6d(const Eigen::Matrix3d& r) {
  Eigen::Matrix<double, 6, 1> v;
  v << r.col(0), r.col(1);
  return v;
}

Eigen::Matrix3d rotation_from_6d(const Eigen::Matrix<double, 6, 1>& v) {
  const Eigen::Vector3d a = v.head<3>();
  const Eigen::Vector3d b = v.tail<3>();
  const Eigen::Vector3d c0 = a.normalized();
  const Eigen::Vector3d c1 = (b - c0.dot(b) * c0).normalized();
  Eigen::Matrix3d r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return r;
}

std::optional<std::string> check_pose_invariants(const MotionSequence& motion,
                                                 double rotation_tol) {
  try {
    motion.validate();
  } catch (const std::invalid_argument& e) {
    return std::string(e.what());
  }
  const FeatureLayout layout(motion.joint_count);
  for (int f = 0; f < motion.frame_count(); ++f) {
    const auto row = motion.frames.row(f);
    if (!row.allFinite()) return "non-finite value in frame " + std::to_string(f);
    for (int c = 0; c < 4; ++c) {
      const float flag = row(layout.contacts + c);
      if (flag != 0.0F && flag != 1.0F) {
        return "contact flag not binary in frame " + std::to_string(f);
      }
    }
    for (int j = 0; j < motion.joint_count; ++j) {
      Eigen::Matrix<double, 6, 1> v = row.segment<6>(layout.rotations + 6 * j).cast<double>();
      if (v.head<3>().norm() < 1e-12) {
        return "degenerate rotation in frame " + std::to_string(f);
      }
      const double det = rotation_from_6d(v).determinant();
      if (!(std::abs(det - 1.0) <= rotation_tol)) {
        return "rotation determinant " + std::to_string(det) + " in frame " + std::to_string(f);
      }
    }
  }
  return std::nullopt;
}

}  // namespace duet
