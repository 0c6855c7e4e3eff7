#include "rigcal/lidar_camera.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace rigcal {

void PlanePairObservation::validate() const {
  if (lidar_points.size() < 3) {
    throw_error(ErrorCode::InvalidArgument,
                "plane pair needs at least 3 lidar points, capture " +
                    std::to_string(capture_index));
  }
  if (camera_corners.empty()) {
    throw_error(ErrorCode::InvalidArgument, "plane pair has no camera corners");
  }
  for (const Vec3& c : camera_corners) {
    if (camera_plane.distance(c) > 5e-3) {
      throw_error(ErrorCode::InvalidArgument,
                  "camera corners are not coplanar with the camera plane (capture " +
                      std::to_string(capture_index) + ")");
    }
  }
}

Plane camera_plane_from_board(const Pose& board_to_camera, const CheckerboardSpec& spec) {
  spec.validate();
  return Plane::from_point_normal(board_to_camera.translation(),
                                  board_to_camera.rotation() * Vec3(0, 0, 1));
}

RansacPlaneResult ransac_board_points(const std::vector<Vec3>& raw_scan, std::uint64_t seed) {
  const int n = static_cast<int>(raw_scan.size());
  if (n < 3) {
    throw_error(ErrorCode::InvalidArgument, "plane segmentation needs at least 3 points");
  }

  constexpr double kInlierThreshold = 0.02;  // meters
  constexpr int kIterations = 200;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  int best_count = -1;
  Vec3 best_normal = Vec3::Zero();
  double best_offset = 0.0;
  for (int iter = 0; iter < kIterations; ++iter) {
    const int a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const Vec3 normal = (raw_scan[b] - raw_scan[a]).cross(raw_scan[c] - raw_scan[a]);
    if (normal.norm() < 1e-12) continue;
    const Vec3 unit = normal.normalized();
    const double offset = -unit.dot(raw_scan[a]);
    int count = 0;
    for (const Vec3& p : raw_scan) {
      if (std::abs(unit.dot(p) + offset) <= kInlierThreshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_normal = unit;
      best_offset = offset;
    }
  }

  if (best_count < (n + 1) / 2) {
    throw_error(ErrorCode::NoConsensus,
                "plane consensus below 50%: " + std::to_string(std::max(best_count, 0)) +
                    " of " + std::to_string(n));
  }

  RansacPlaneResult result;
  std::vector<Vec3> inliers;
  for (int i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(raw_scan[i]) + best_offset) <= kInlierThreshold) {
      result.inlier_indices.push_back(i);
      inliers.push_back(raw_scan[i]);
    }
  }
  result.plane = fit_plane(inliers).plane;
  return result;
}

namespace {

Plane vehicle_plane(const PlanePairObservation& pair) {
  return fit_plane(pair.lidar_points).plane;
}

}  // namespace

Rotation solve_rotation(const std::vector<PlanePairObservation>& pairs) {
  if (pairs.size() < 2) {
    throw_error(ErrorCode::InvalidArgument, "rotation needs at least 2 plane pairs");
  }
  std::vector<Vec3> camera_normals;
  std::vector<Vec3> vehicle_normals;
  for (const PlanePairObservation& pair : pairs) {
    pair.validate();
    // orient both normals toward their sensor origins so the pairing has a
    // consistent sign
    camera_normals.push_back(pair.camera_plane.oriented_toward(Vec3::Zero()).normal());
    vehicle_normals.push_back(vehicle_plane(pair).oriented_toward(Vec3::Zero()).normal());
  }
  return rotation_from_direction_pairs(camera_normals, vehicle_normals);
}

Vec3 solve_translation(const std::vector<PlanePairObservation>& pairs,
                       const Rotation& rotation) {
  if (pairs.empty()) {
    throw_error(ErrorCode::InvalidArgument, "translation needs plane pairs");
  }
  std::vector<Plane> planes;
  Eigen::MatrixXd normals(pairs.size(), 3);
  for (size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].validate();
    planes.push_back(vehicle_plane(pairs[i]));
    normals.row(i) = planes.back().normal().transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normals);
  const auto& sv = svd.singularValues();
  if (pairs.size() < 3 || sv(2) <= 1e-3 * sv(0)) {
    throw_error(ErrorCode::RankDeficientNormals,
                "vehicle-frame board normals do not span 3D; translation is unobservable "
                "along the missing direction");
  }

  int rows = 0;
  for (const PlanePairObservation& pair : pairs) {
    rows += static_cast<int>(pair.camera_corners.size());
  }
  Eigen::MatrixXd a(rows, 3);
  Eigen::VectorXd b(rows);
  int row = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Vec3& n = planes[i].normal();
    const double d = planes[i].offset();
    for (const Vec3& corner : pairs[i].camera_corners) {
      a.row(row) = n.transpose();
      b(row) = -d - n.dot(rotation * corner);
      ++row;
    }
  }
  return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

namespace {

// Symmetric point-plane problem over the 6-DOF camera-to-vehicle pose.
class LidarCameraProblem : public LmProblem {
 public:
  LidarCameraProblem(const std::vector<PlanePairObservation>& pairs, Pose initial)
      : pairs_(pairs), pose_(std::move(initial)) {
    for (const PlanePairObservation& pair : pairs_) {
      vehicle_planes_.push_back(fit_plane(pair.lidar_points).plane);
      residual_count_ +=
          static_cast<int>(pair.camera_corners.size() + pair.lidar_points.size());
    }
  }

  int residual_size() const override { return residual_count_; }
  int tangent_size() const override { return 6; }

  bool eval(Eigen::VectorXd* residuals, Eigen::MatrixXd* jacobian) const override {
    const Pose inverse = pose_.inverse();
    const Mat3 r = pose_.rotation().matrix();
    int row = 0;
    for (size_t i = 0; i < pairs_.size(); ++i) {
      const Plane& vp = vehicle_planes_[i];
      for (const Vec3& corner : pairs_[i].camera_corners) {
        const Vec3 w = pose_ * corner;
        (*residuals)(row) = vp.signed_distance(w);
        if (jacobian) {
          jacobian->block<1, 3>(row, 0) = w.cross(vp.normal()).transpose();
          jacobian->block<1, 3>(row, 3) = vp.normal().transpose();
        }
        ++row;
      }
      const Plane& cp = pairs_[i].camera_plane;
      const Vec3 rotated_normal = r * cp.normal();
      for (const Vec3& point : pairs_[i].lidar_points) {
        (*residuals)(row) = cp.signed_distance(inverse * point);
        if (jacobian) {
          jacobian->block<1, 3>(row, 0) = -(point.cross(rotated_normal)).transpose();
          jacobian->block<1, 3>(row, 3) = -rotated_normal.transpose();
        }
        ++row;
      }
    }
    return true;
  }

  void apply_step(const Eigen::VectorXd& delta) override {
    pose_ = Pose::exp(delta) * pose_;
  }
  void save_state() override { saved_ = pose_; }
  void restore_state() override { pose_ = saved_; }

  const Pose& pose() const { return pose_; }
  const std::vector<Plane>& vehicle_planes() const { return vehicle_planes_; }

 private:
  const std::vector<PlanePairObservation>& pairs_;
  std::vector<Plane> vehicle_planes_;
  Pose pose_;
  Pose saved_;
  int residual_count_ = 0;
};

}  // namespace

double lidar_camera_objective(const std::vector<PlanePairObservation>& pairs,
                              const Pose& camera_to_vehicle) {
  double total = 0.0;
  const Pose inverse = camera_to_vehicle.inverse();
  for (const PlanePairObservation& pair : pairs) {
    const Plane vp = fit_plane(pair.lidar_points).plane;
    for (const Vec3& corner : pair.camera_corners) {
      const double d = vp.signed_distance(camera_to_vehicle * corner);
      total += d * d;
    }
    for (const Vec3& point : pair.lidar_points) {
      const double d = pair.camera_plane.signed_distance(inverse * point);
      total += d * d;
    }
  }
  return total;
}

LidarCameraExtrinsics refine(const std::vector<PlanePairObservation>& pairs,
                             const LidarCameraExtrinsics& init) {
  if (pairs.empty()) {
    throw_error(ErrorCode::InvalidArgument, "refine needs plane pairs");
  }
  for (const PlanePairObservation& pair : pairs) pair.validate();

  LidarCameraProblem problem(pairs, init.camera_to_vehicle);
  const LmSummary summary = lm_minimize(problem);
  if (!summary.converged) {
    throw_error(ErrorCode::NoConvergence, "lidar-camera refinement did not converge: " +
                                              std::string(lm_stop_name(summary.stop)));
  }

  LidarCameraExtrinsics result;
  result.camera_to_vehicle = problem.pose();
  const Pose inverse = result.camera_to_vehicle.inverse();
  for (size_t i = 0; i < pairs.size(); ++i) {
    double sum_sq = 0.0;
    int count = 0;
    const Plane& vp = problem.vehicle_planes()[i];
    for (const Vec3& corner : pairs[i].camera_corners) {
      const double d = vp.signed_distance(result.camera_to_vehicle * corner);
      sum_sq += d * d;
      ++count;
    }
    for (const Vec3& point : pairs[i].lidar_points) {
      const double d = pairs[i].camera_plane.signed_distance(inverse * point);
      sum_sq += d * d;
      ++count;
    }
    result.per_observation_rms.push_back(std::sqrt(sum_sq / count));
  }
  return result;
}

LidarCameraExtrinsics calibrate_lidar_camera(const std::vector<PlanePairObservation>& pairs) {
  const Rotation rotation = solve_rotation(pairs);
  const Vec3 translation = solve_translation(pairs, rotation);
  LidarCameraExtrinsics init;
  init.camera_to_vehicle = Pose(rotation, translation);
  return refine(pairs, init);
}

std::map<std::string, std::vector<ProjectedPoint>> project_cloud(
    const LidarCameraExtrinsics& extrinsics, const RigExtrinsics& rig,
    const std::map<std::string, CameraIntrinsics>& intrinsics,
    const std::vector<Vec3>& cloud_vehicle_frame) {
  const Pose vehicle_to_reference = extrinsics.camera_to_vehicle.inverse();
  std::map<std::string, std::vector<ProjectedPoint>> result;
  for (const auto& [id, camera_pose] : rig.camera_poses) {
    const auto intr = intrinsics.find(id);
    if (intr == intrinsics.end()) {
      throw_error(ErrorCode::InvalidArgument, "no intrinsics for camera '" + id + "'");
    }
    const Pose vehicle_to_camera = camera_pose.inverse() * vehicle_to_reference;
    std::vector<ProjectedPoint>& out = result[id];
    for (const Vec3& p : cloud_vehicle_frame) {
      const Vec3 q = vehicle_to_camera * p;
      if (!projectable(intr->second, q)) continue;
      out.push_back({project(intr->second, q), q.z()});
    }
  }
  return result;
}

}  // namespace rigcal
