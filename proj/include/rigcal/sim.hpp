#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"

namespace rigcal {

struct CameraGroundTruth {
  std::string id;
  CameraIntrinsics intrinsics;
  Pose pose;  // camera frame -> vehicle frame
};

struct LidarGroundTruth {
  std::string id;
  Pose pose;  // lidar frame -> vehicle frame (x forward, z up)
};

/// Synthetic rig in the vehicle frame: x forward, y left, z up, origin at
/// the rear-axle center.
struct RigGroundTruth {
  std::vector<CameraGroundTruth> cameras;
  std::vector<LidarGroundTruth> lidars;

  const CameraGroundTruth& camera(const std::string& id) const;
  std::map<std::string, CameraIntrinsics> intrinsics_map() const;
  std::map<std::string, Pose> camera_pose_map() const;
};

struct NoiseModel {
  double pixel_sigma = 0.0;   // px
  double lidar_sigma = 0.0;   // m, along the beam
  double dropout_rate = 0.0;  // per-corner drop probability
  std::uint64_t seed = 0;

  void validate() const;
  NoiseModel with_seed(std::uint64_t s) const {
    NoiseModel n = *this;
    n.seed = s;
    return n;
  }
};

/// Ordered board placements (board frame -> vehicle frame) sweeping the
/// target around the vehicle.
struct CapturePlan {
  std::vector<Pose> board_poses;
};

/// Eight cameras at 45-degree yaw increments on the roof line (side
/// cameras carry the wider-angle lenses) and six four-layer scanners,
/// three per bumper.
RigGroundTruth default_rig();

/// Two captures per 15-degree bearing around the rig, cycling board
/// heights and tilts so every camera sees well-spread orientations, every
/// adjacent camera pair shares boards, and low tilted boards cross the
/// scanner layers.
CapturePlan default_capture_plan();

struct SimulatedCaptures {
  std::vector<ViewObservation> views;
  std::vector<Pose> board_poses;  // ground truth per plan entry
};

/// Projects the board into every camera whose image fully contains it,
/// then applies pixel noise and corner dropout. Corners pushed outside
/// the image by noise are dropped; views left with fewer than 4 corners
/// are omitted. Identical seeds produce identical output.
SimulatedCaptures simulate_captures(const RigGroundTruth& rig, const CapturePlan& plan,
                                    const CheckerboardSpec& spec, const NoiseModel& noise);

struct LidarPoint {
  Vec3 point;  // vehicle frame
  int layer = 0;
};

/// Intersects each scanner's four elevation layers (110-degree fan,
/// 0.25-degree azimuth steps, 200 m range) with the physical board
/// rectangle. Range noise acts along the beam. Empty when no layer
/// crosses the board.
std::map<std::string, std::vector<LidarPoint>> simulate_lidar_board(
    const RigGroundTruth& rig, const Pose& board_pose_vehicle, const CheckerboardSpec& spec,
    const NoiseModel& noise);

struct ScenarioPaths {
  std::filesystem::path observations;
  std::filesystem::path cloud_dir;
  std::filesystem::path stream_index;
  std::filesystem::path ground_truth;
};

/// Writes a complete synthetic dataset: corner observations, one merged
/// point cloud per capture, a PTP-style stream index (cameras at 30 Hz,
/// scanners at 12.5 Hz, captures at 1 Hz), and a ground-truth sidecar for
/// test harnesses.
ScenarioPaths export_scenario(const RigGroundTruth& rig, const CapturePlan& plan,
                              const CheckerboardSpec& spec, const NoiseModel& noise,
                              const std::filesystem::path& out_dir);

}  // namespace rigcal
