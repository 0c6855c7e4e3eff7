#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rigcal/geometry.hpp"

namespace rigcal {

using Vec2 = Eigen::Vector2d;

/// Unified catadioptric camera model: a 3D point is normalized onto the
/// unit sphere, shifted by `xi` along the optical axis, perspective
/// divided, passed through radial-tangential distortion, and scaled by the
/// focal lengths. `xi = 0` reduces exactly to the pinhole model.
struct CameraIntrinsics {
  double xi = 0.0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  int width = 1600;
  int height = 1200;

  static constexpr int kNumParams = 9;
  using ParamVector = Eigen::Matrix<double, kNumParams, 1>;

  /// Fixed serialization/Jacobian ordering: (xi, fx, fy, cx, cy, k1, k2, p1, p2).
  ParamVector params() const;
  static CameraIntrinsics from_params(const ParamVector& p, int width, int height);

  /// Throws InvalidArgument unless fx, fy > 0, xi >= 0 and all parameters
  /// are finite.
  void validate() const;

  bool in_image(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() < width && pixel.y() >= 0.0 && pixel.y() < height;
  }
};

/// Planar checkerboard target described by its inner-corner grid. Rows and
/// columns must differ so the board orientation is unambiguous.
struct CheckerboardSpec {
  int inner_rows = 6;
  int inner_cols = 9;
  double square_size = 0.08;  // meters

  int corner_count() const { return inner_rows * inner_cols; }
  void validate() const;
};

/// Inner corners in the board frame: row-major grid on z = 0 with the
/// origin at corner (0, 0) and columns along +x.
std::vector<Vec3> board_points(const CheckerboardSpec& spec);

struct CornerObservation {
  int corner_id = 0;  // row-major index into the board grid
  Vec2 pixel = Vec2::Zero();
};

/// All corners one camera detected at one capture instant.
struct ViewObservation {
  std::string camera_id;
  std::int64_t capture_index = 0;
  std::vector<CornerObservation> corners;
};

/// True when `point` satisfies the projection precondition: z > 0 for the
/// pinhole case, z + xi * |point| > 0 otherwise.
bool projectable(const CameraIntrinsics& intr, const Vec3& point);

/// Projects a camera-frame point to pixels. Throws BehindCamera when the
/// precondition fails.
Vec2 project(const CameraIntrinsics& intr, const Vec3& point);

/// Inverts the projection to a unit ray. Distortion is inverted by fixed
/// point iteration (at most 50 rounds, tolerance 1e-12 in normalized
/// coordinates); throws NoConvergence when the iteration fails or the
/// pixel lies outside the model's domain.
Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pixel);

struct ProjectionJacobians {
  Vec2 pixel;
  Eigen::Matrix<double, 2, 3> d_point;
  Eigen::Matrix<double, 2, CameraIntrinsics::kNumParams> d_intrinsics;
  /// Derivative with respect to a left perturbation exp(delta) * T of the
  /// pose T that produced `point`; columns ordered like the Pose tangent
  /// [rotation, translation].
  Eigen::Matrix<double, 2, 6> d_pose;
};

/// Analytic derivatives of the full projection chain.
ProjectionJacobians project_jacobians(const CameraIntrinsics& intr, const Vec3& point);

struct BoardPoseEstimate {
  Pose board_to_camera;
  double rms = 0.0;  // per-coordinate rms reprojection error, pixels
};

/// Board pose from a single view: homography initialization on
/// undistorted normalized coordinates, then local reprojection refinement.
BoardPoseEstimate estimate_board_pose(const CameraIntrinsics& intr,
                                      const ViewObservation& view,
                                      const CheckerboardSpec& spec);

struct IntrinsicsCalibration {
  CameraIntrinsics intrinsics;
  std::vector<Pose> view_poses;  // board -> camera, one per input view
  double rms = 0.0;
  double initial_rms = 0.0;  // at the closed-form initialization
  int iterations = 0;
  bool converged = false;
};

/// Calibrates one camera from planar views: closed-form pinhole
/// initialization from homographies, then joint nonlinear refinement of
/// all intrinsics and per-view poses. Needs >= 3 views with distinct
/// board orientations.
IntrinsicsCalibration calibrate_intrinsics(const std::vector<ViewObservation>& views,
                                           const CheckerboardSpec& spec,
                                           int width = 1600, int height = 1200);

}  // namespace rigcal
