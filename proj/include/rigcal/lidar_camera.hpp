#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/lm.hpp"
#include "rigcal/surround.hpp"

namespace rigcal {

/// One checkerboard placement seen by both sensor systems: the plane and
/// corners as recovered by the cameras (in the camera reference frame) and
/// the board returns measured by the LIDARs (vehicle frame).
struct PlanePairObservation {
  std::int64_t capture_index = 0;
  Plane camera_plane{Vec3(0, 0, 1), 0.0};
  std::vector<Vec3> camera_corners;
  std::vector<Vec3> lidar_points;

  /// Throws InvalidArgument unless there are >= 3 lidar points and every
  /// camera corner lies within 5 mm of the camera plane.
  void validate() const;
};

struct LidarCameraExtrinsics {
  Pose camera_to_vehicle;  // camera reference frame -> vehicle frame
  std::vector<double> per_observation_rms;  // point-plane rms per pair, meters
};

/// Plane of the board in the camera frame implied by an estimated board
/// pose: the rotated board z-axis through the transformed grid.
Plane camera_plane_from_board(const Pose& board_to_camera, const CheckerboardSpec& spec);

struct RansacPlaneResult {
  std::vector<int> inlier_indices;  // ascending
  Plane plane{Vec3(0, 0, 1), 0.0};
};

/// Seeded RANSAC plane segmentation of a raw scan: 200 iterations, 0.02 m
/// inlier threshold, least-squares refit on the winning consensus set.
/// Throws NoConsensus when fewer than half the points agree.
RansacPlaneResult ransac_board_points(const std::vector<Vec3>& raw_scan, std::uint64_t seed);

/// Rotation aligning camera-frame board normals with their vehicle-frame
/// counterparts (normals oriented toward the respective sensor origins
/// before the Procrustes fit).
Rotation solve_rotation(const std::vector<PlanePairObservation>& pairs);

/// With the rotation held fixed, the translation solving the stacked
/// coplanarity constraints n_i . (R c + t) + d_i = 0 in least squares.
/// Throws RankDeficientNormals unless the vehicle-frame normals span 3D
/// (singular value ratio > 1e-3 over >= 3 pairs).
Vec3 solve_translation(const std::vector<PlanePairObservation>& pairs,
                       const Rotation& rotation);

/// Levenberg-Marquardt refinement of the full 6-DOF transform minimizing
/// the symmetric point-plane objective (camera corners to LIDAR planes
/// plus LIDAR points to camera planes). Same schedule and stopping rules
/// as the surround bundle adjustment.
LidarCameraExtrinsics refine(const std::vector<PlanePairObservation>& pairs,
                             const LidarCameraExtrinsics& init);

/// solve_rotation -> solve_translation -> refine.
LidarCameraExtrinsics calibrate_lidar_camera(const std::vector<PlanePairObservation>& pairs);

/// Symmetric point-plane objective value, for audits and tests.
double lidar_camera_objective(const std::vector<PlanePairObservation>& pairs,
                              const Pose& camera_to_vehicle);

struct ProjectedPoint {
  Vec2 pixel;
  double depth = 0.0;  // camera-frame z, meters
};

/// Projects a vehicle-frame cloud into every calibrated camera. Points
/// behind a camera are omitted for that camera; pixels may fall outside
/// the image bounds.
std::map<std::string, std::vector<ProjectedPoint>> project_cloud(
    const LidarCameraExtrinsics& extrinsics, const RigExtrinsics& rig,
    const std::map<std::string, CameraIntrinsics>& intrinsics,
    const std::vector<Vec3>& cloud_vehicle_frame);

}  // namespace rigcal
