#pragma once

// Internal structured bundle solver shared by the intrinsic and surround
// calibrations. Parameters split into a small dense "camera" part (poses +
// optional intrinsics) and per-board 6x6 blocks that are eliminated by a
// Schur complement, which keeps desk-scale problems in the millisecond
// range per iteration.

#include <array>
#include <vector>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/lm.hpp"

namespace rigcal::ba {

struct Camera {
  CameraIntrinsics intrinsics;
  Pose pose;  // camera frame -> reference frame
  bool pose_fixed = false;
};

struct Board {
  Pose pose;  // board frame -> reference frame
};

// One observed corner: board_point seen by `camera` while the board sat at
// `board`.
struct Observation {
  int camera = 0;
  int board = 0;
  Vec3 board_point = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
};

struct Config {
  bool refine_intrinsics = false;
  std::array<bool, CameraIntrinsics::kNumParams> intrinsics_mask{true, true, true, true, true,
                                                                 true, true, true, true};
  bool robust = false;
  double huber_scale = 1.0;  // pixels
  LmOptions lm;
};

struct Outcome {
  LmSummary summary;
};

/// Minimizes the total (optionally Huber-weighted) squared reprojection
/// error over all free camera poses, board poses and masked intrinsics.
/// Cameras and boards are updated in place. Throws NumericalFailure when
/// the initial state does not evaluate to finite residuals.
Outcome solve(std::vector<Camera>& cameras, std::vector<Board>& boards,
              const std::vector<Observation>& observations, const Config& config);

/// Total squared reprojection error of a state (robust cost when enabled),
/// used to audit solver bookkeeping.
double total_cost(const std::vector<Camera>& cameras, const std::vector<Board>& boards,
                  const std::vector<Observation>& observations, const Config& config);

}  // namespace rigcal::ba
