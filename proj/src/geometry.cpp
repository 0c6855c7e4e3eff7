#include "rigcal/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace rigcal {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

void Rotation::canonicalize() {
  q_.normalize();
  const double* c = q_.coeffs().data();  // x, y, z, w
  double sign = 0.0;
  for (int i = 3; i >= 0; --i) {
    if (c[i] != 0.0) {
      sign = c[i] > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  if (sign < 0.0) {
    q_.coeffs() = -q_.coeffs();
  }
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw_error(ErrorCode::InvalidArgument, "quaternion norm too small to normalize");
  }
  return Rotation(q);
}

Rotation Rotation::from_matrix(const Mat3& m) {
  return Rotation(Eigen::Quaterniond(m));
}

Rotation Rotation::exp(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double w, s;
  if (theta < 1e-8) {
    // sin(t/2)/t and cos(t/2) to fourth order
    w = 1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0;
    s = 0.5 - theta2 / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    s = std::sin(0.5 * theta) / theta;
  }
  return Rotation(Eigen::Quaterniond(w, s * omega.x(), s * omega.y(), s * omega.z()));
}

Vec3 Rotation::log() const {
  const Vec3 v = q_.vec();
  const double vnorm = v.norm();
  const double w = std::abs(q_.w());  // canonical form keeps w >= 0
  if (vnorm < 1e-10) {
    return 2.0 / w * v * (1.0 - vnorm * vnorm / (3.0 * w * w));
  }
  const double theta = 2.0 * std::atan2(vnorm, w);
  return (theta / vnorm) * v;
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

double Rotation::angle_to(const Rotation& other) const {
  const Eigen::Quaterniond d = q_.conjugate() * other.q_;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

bool Rotation::isApprox(const Rotation& other, double tol) const {
  return angle_to(other) <= tol;
}

namespace {

// Coefficients a = (1 - cos t)/t^2 and b = (t - sin t)/t^3 of the SE(3)
// left Jacobian V = I + a [w]x + b [w]x^2.
void se3_v_coeffs(double theta, double* a, double* b) {
  const double t2 = theta * theta;
  if (theta < 1e-5) {
    *a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    *b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    *a = (1.0 - std::cos(theta)) / t2;
    *b = (theta - std::sin(theta)) / (t2 * theta);
  }
}

}  // namespace

Pose Pose::exp(const Vec6& tangent) {
  const Vec3 omega = tangent.head<3>();
  const Vec3 rho = tangent.tail<3>();
  const double theta = omega.norm();
  double a, b;
  se3_v_coeffs(theta, &a, &b);
  const Mat3 k = skew(omega);
  const Mat3 v = Mat3::Identity() + a * k + b * (k * k);
  return Pose(Rotation::exp(omega), v * rho);
}

Vec6 Pose::log() const {
  const Vec3 omega = rotation_.log();
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  Mat3 vinv;
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    const double c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
    vinv = Mat3::Identity() - 0.5 * k + c * (k * k);
  } else {
    const double c =
        (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
    vinv = Mat3::Identity() - 0.5 * k + c * (k * k);
  }
  Vec6 tangent;
  tangent.head<3>() = omega;
  tangent.tail<3>() = vinv * translation_;
  return tangent;
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
}

Pose Pose::inverse() const {
  const Rotation rinv = rotation_.inverse();
  return Pose(rinv, -(rinv * translation_));
}

bool Pose::isApprox(const Pose& other, double tol) const {
  return rotation_.isApprox(other.rotation_, tol) &&
         (translation_ - other.translation_).norm() <= tol;
}

Plane::Plane(const Vec3& normal, double offset) : normal_(normal), offset_(offset) {
  const double n = normal_.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw_error(ErrorCode::InvalidArgument, "plane normal too small to normalize");
  }
  normal_ /= n;
  offset_ /= n;
  bool flip = offset_ > 0.0;
  if (offset_ == 0.0) {
    offset_ = 0.0;  // collapse -0.0
    int axis = 0;
    normal_.cwiseAbs().maxCoeff(&axis);
    flip = normal_[axis] < 0.0;
  }
  if (flip) {
    normal_ = -normal_;
    offset_ = -offset_;
  }
}

Plane Plane::from_point_normal(const Vec3& point, const Vec3& normal) {
  return Plane(normal, -normal.normalized().dot(point));
}

Plane Plane::transformed(const Pose& t) const {
  const Vec3 n = t.rotation() * normal_;
  return Plane(n, offset_ - n.dot(t.translation()));
}

Plane Plane::oriented_toward(const Vec3& p, double tol) const {
  const double d = signed_distance(p);
  if (std::abs(d) <= tol) {
    throw_error(ErrorCode::DegenerateGeometry,
                "cannot orient plane toward a point lying on it");
  }
  Plane out = *this;
  if (d < 0.0) {
    out.normal_ = -out.normal_;
    out.offset_ = -out.offset_;
  }
  return out;
}

bool Plane::isApprox(const Plane& other, double tol) const {
  return (normal_ - other.normal_).norm() <= tol && std::abs(offset_ - other.offset_) <= tol;
}

std::string FrameId::to_string() const {
  switch (kind) {
    case FrameKind::Board:
      return "board";
    case FrameKind::Camera:
      return "camera:" + name;
    case FrameKind::Vehicle:
      return "vehicle";
  }
  return "?";
}

FramedPose FramedPose::operator*(const FramedPose& rhs) const {
  if (from != rhs.to) {
    throw_error(ErrorCode::FrameMismatch,
                "cannot compose (" + from.to_string() + " -> " + to.to_string() +
                    ") with (" + rhs.from.to_string() + " -> " + rhs.to.to_string() + ")");
  }
  return {pose * rhs.pose, rhs.from, to};
}

Rotation rotation_from_direction_pairs(const std::vector<Vec3>& src,
                                       const std::vector<Vec3>& dst) {
  if (src.size() != dst.size()) {
    throw_error(ErrorCode::InvalidArgument, "direction lists differ in length");
  }
  if (src.size() < 2) {
    throw_error(ErrorCode::InvalidArgument, "need at least 2 direction pairs");
  }

  constexpr double kParallelTol = 1e-6;  // radians
  const Vec3 ref = src.front().normalized();
  bool all_parallel = true;
  for (const Vec3& s : src) {
    const double angle = std::atan2(ref.cross(s.normalized()).norm(), std::abs(ref.dot(s.normalized())));
    if (angle > kParallelTol) {
      all_parallel = false;
      break;
    }
  }
  if (all_parallel) {
    throw_error(ErrorCode::DegenerateDirections,
                "source directions are parallel; rotation about the common axis "
                "is unobservable");
  }

  Mat3 cross_cov = Mat3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    cross_cov += dst[i].normalized() * src[i].normalized().transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross_cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation::from_matrix(svd.matrixU() * d * svd.matrixV().transpose());
}

PlaneFit fit_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) {
    throw_error(ErrorCode::InvalidArgument, "plane fit needs at least 3 points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::MatrixXd centered(points.size(), 3);
  for (size_t i = 0; i < points.size(); ++i) {
    centered.row(i) = (points[i] - centroid).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) < 1e-9 * sv(0)) {
    throw_error(ErrorCode::DegenerateGeometry, "points are collinear; plane is unobservable");
  }
  const Vec3 normal = svd.matrixV().col(2);
  const Plane plane = Plane::from_point_normal(centroid, normal);

  double sum_sq = 0.0;
  for (const Vec3& p : points) {
    const double d = plane.signed_distance(p);
    sum_sq += d * d;
  }
  return PlaneFit{plane, std::sqrt(sum_sq / static_cast<double>(points.size()))};
}

}  // namespace rigcal
