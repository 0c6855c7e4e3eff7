#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/lm.hpp"

namespace rigcal {

/// One usable observation edge: a camera saw the board at a capture
/// instant well enough to estimate its pose.
struct PoseGraphEdge {
  std::string camera_id;
  std::int64_t capture_index = 0;
  ViewObservation view;
  Pose board_to_camera;  // single-view pose estimate
  double weight = 0.0;   // reprojection rms of that estimate, pixels
};

/// A view that failed pose estimation and was left out of the graph.
struct DroppedEdge {
  std::string camera_id;
  std::int64_t capture_index = 0;
  std::string reason;
};

/// Bipartite graph of camera nodes and board (capture instant) nodes.
struct PoseGraph {
  std::map<std::string, CameraIntrinsics> intrinsics;  // camera nodes
  std::set<std::int64_t> captures;                     // board nodes
  CheckerboardSpec board;
  std::vector<PoseGraphEdge> edges;
  std::vector<DroppedEdge> dropped;
};

struct GraphComponent {
  std::vector<std::string> cameras;
  std::vector<std::int64_t> captures;
};

/// Connected components over cameras and captures; isolated cameras form
/// their own components.
std::vector<GraphComponent> connected_components(const PoseGraph& graph);

/// Builds the observation graph by estimating a board pose per view. Views
/// whose pose estimation fails are recorded in `dropped` with the reason.
/// Throws DisconnectedGraph (listing the components) when the usable edges
/// do not connect every camera.
PoseGraph build_pose_graph(const std::vector<ViewObservation>& views,
                           const std::map<std::string, CameraIntrinsics>& intrinsics,
                           const CheckerboardSpec& spec);

struct RigExtrinsics {
  std::string reference_camera_id;
  std::map<std::string, Pose> camera_poses;  // camera frame -> reference frame

  /// Throws InvalidArgument unless the reference camera is present with an
  /// exactly-identity pose.
  void validate() const;
};

struct BundleState {
  RigExtrinsics rig;
  std::map<std::int64_t, Pose> board_poses;  // board frame -> reference frame
  /// Present only when intrinsics were refined jointly with the poses.
  std::optional<std::map<std::string, CameraIntrinsics>> refined_intrinsics;
  double total_squared_error = 0.0;  // plain sum of squared residuals, px^2
};

/// Recomputes the plain squared reprojection error of a state against the
/// graph (using refined intrinsics when the state carries them).
double recompute_total_error(const BundleState& state, const PoseGraph& graph);

/// Initial camera and board poses by chaining single-view estimates along
/// the minimum spanning tree (edge weight = reprojection rms; ties broken
/// by smaller capture index, then camera id). The reference camera roots
/// the tree and is pinned to the identity. Deterministic.
BundleState spanning_tree_init(const PoseGraph& graph, const std::string& reference_camera_id);

struct BundleConfig {
  bool refine_intrinsics = false;
  bool robust = false;          // Huber loss on corner residuals
  double huber_scale_px = 1.0;
  LmOptions lm;                 // lambda 1e-3 x/÷10, 100 iterations, 1e-10/1e-8 stops
};

struct BundleResult {
  BundleState state;
  LmSummary summary;  // converged=false with stop=MaxIterations means NoConvergence
};

/// Joint Levenberg-Marquardt refinement of all non-reference camera poses
/// and all board poses (plus intrinsics when enabled) minimizing total
/// squared reprojection error. The reference camera stays at the identity
/// (gauge fixing). Returns the best state with a diagnostic summary rather
/// than throwing on slow convergence; throws NumericalFailure on
/// non-finite residuals.
BundleResult bundle_adjust(const BundleState& init, const PoseGraph& graph,
                           const BundleConfig& config = {});

/// Board pose in the rig reference frame from every camera that saw it at
/// one instant, holding the calibrated rig fixed. Multi-camera views
/// triangulate the board far more tightly than any single view. `views`
/// must share one capture index; throws InvalidArgument otherwise.
Pose board_pose_from_views(const std::vector<ViewObservation>& views,
                           const std::map<std::string, CameraIntrinsics>& intrinsics,
                           const RigExtrinsics& rig, const CheckerboardSpec& spec);

struct BaselineReport {
  std::vector<std::string> camera_ids;  // sorted
  Eigen::MatrixXd distances;            // pairwise camera-center distances, meters
};

/// Symmetric zero-diagonal matrix of camera-center distances, the rig
/// sanity check against tape-measured baselines.
BaselineReport baseline_report(const RigExtrinsics& rig);

}  // namespace rigcal
