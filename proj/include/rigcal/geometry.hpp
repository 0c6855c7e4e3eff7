#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "rigcal/errors.hpp"

namespace rigcal {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& v);

/// 3D rotation stored as a unit quaternion with canonical sign (w >= 0,
/// ties broken toward a non-negative leading vector component). The
/// canonical form makes equality and serialization deterministic.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}

  /// Normalizes and canonicalizes. Throws InvalidArgument on a near-zero
  /// or non-finite quaternion.
  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_matrix(const Mat3& m);

  /// Exponential map: rotation by |omega| radians about omega / |omega|.
  static Rotation exp(const Vec3& omega);

  /// Inverse of exp. Valid for rotation angles < pi.
  Vec3 log() const;

  static Rotation identity() { return Rotation(); }

  Rotation inverse() const;
  Rotation operator*(const Rotation& rhs) const;
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  /// Angular distance to another rotation in radians, in [0, pi].
  double angle_to(const Rotation& other) const;
  double angle() const { return angle_to(Rotation()); }

  bool isApprox(const Rotation& other, double tol = 1e-12) const;

 private:
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) { canonicalize(); }
  void canonicalize();

  Eigen::Quaterniond q_;  // unit norm, canonical sign
};

/// Rigid transform. Applying a pose maps points expressed in its source
/// frame into its destination frame: p_dst = R * p_src + t.
class Pose {
 public:
  Pose() = default;
  Pose(const Rotation& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t) { return Pose(Rotation(), t); }
  static Pose from_rotation(const Rotation& r) { return Pose(r, Vec3::Zero()); }

  /// SE(3) exponential map. Tangent layout: [rotation omega, translation rho].
  static Pose exp(const Vec6& tangent);

  /// Inverse of exp; valid while the rotation angle is < pi.
  Vec6 log() const;

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  /// Composition: (a * b) applies b first, then a.
  Pose operator*(const Pose& rhs) const;

  /// Applies the transform to a point.
  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  Pose inverse() const;

  bool isApprox(const Pose& other, double tol = 1e-12) const;

 private:
  Rotation rotation_;
  Vec3 translation_ = Vec3::Zero();
};

/// Oriented plane {p : normal . p + offset = 0} with |normal| = 1 and the
/// canonical sign offset <= 0 (tie at zero offset: the largest-magnitude
/// normal component is made positive, earliest axis winning further ties).
class Plane {
 public:
  /// Normalizes and canonicalizes. Throws InvalidArgument on a near-zero
  /// normal.
  Plane(const Vec3& normal, double offset);

  static Plane from_point_normal(const Vec3& point, const Vec3& normal);

  const Vec3& normal() const { return normal_; }
  double offset() const { return offset_; }

  double signed_distance(const Vec3& p) const { return normal_.dot(p) + offset_; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }

  /// The same plane expressed in the destination frame of `t` when the
  /// current representation lives in its source frame.
  Plane transformed(const Pose& t) const;

  /// Copy with the normal pointing toward `p` (positive signed distance).
  /// Throws DegenerateGeometry if `p` lies on the plane within `tol`.
  Plane oriented_toward(const Vec3& p, double tol = 1e-9) const;

  bool isApprox(const Plane& other, double tol = 1e-12) const;

 private:
  Vec3 normal_;
  double offset_;
};

/// Coordinate-frame identity used to tag poses at module boundaries.
enum class FrameKind { Board, Camera, Vehicle };

struct FrameId {
  FrameKind kind = FrameKind::Vehicle;
  std::string name;  // camera id; empty for board and vehicle frames

  static FrameId board() { return {FrameKind::Board, ""}; }
  static FrameId camera(std::string id) { return {FrameKind::Camera, std::move(id)}; }
  static FrameId vehicle() { return {FrameKind::Vehicle, ""}; }

  bool operator==(const FrameId& o) const { return kind == o.kind && name == o.name; }
  bool operator!=(const FrameId& o) const { return !(*this == o); }

  std::string to_string() const;
};

/// A pose tagged with the frames it maps between; composition and point
/// application refuse incompatible frames.
struct FramedPose {
  Pose pose;
  FrameId from;
  FrameId to;

  /// (a * b) requires a.from == b.to and yields b.from -> a.to.
  FramedPose operator*(const FramedPose& rhs) const;
  FramedPose inverse() const { return {pose.inverse(), to, from}; }
};

/// Least-squares proper rotation R minimizing sum |dst_i - R src_i|^2 over
/// unit direction pairs (orthogonal Procrustes with the determinant
/// constrained to +1). Requires >= 2 pairs spanning at least two
/// dimensions; throws DegenerateDirections when every source direction is
/// parallel within 1e-6 rad.
Rotation rotation_from_direction_pairs(const std::vector<Vec3>& src,
                                       const std::vector<Vec3>& dst);

struct PlaneFit {
  Plane plane;
  double rms = 0.0;  // root-mean-square point-plane distance, meters
};

/// Total-least-squares plane through >= 3 points (smallest singular
/// direction of the centered point matrix). Throws DegenerateGeometry when
/// the points are collinear (second singular value < 1e-9 x first).
PlaneFit fit_plane(const std::vector<Vec3>& points);

}  // namespace rigcal
