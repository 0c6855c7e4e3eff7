#include "rigcal/surround.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ba_core.hpp"

namespace rigcal {

namespace {

// union-find over camera nodes [0, n_cam) and capture nodes [n_cam, ...)
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

struct NodeIndex {
  std::vector<std::string> cameras;        // sorted
  std::vector<std::int64_t> captures;      // sorted
  std::map<std::string, int> camera_index;
  std::map<std::int64_t, int> capture_index;

  explicit NodeIndex(const PoseGraph& graph) {
    for (const auto& [id, intr] : graph.intrinsics) {
      camera_index[id] = static_cast<int>(cameras.size());
      cameras.push_back(id);
    }
    for (std::int64_t c : graph.captures) {
      capture_index[c] = static_cast<int>(captures.size());
      captures.push_back(c);
    }
  }

  int total() const { return static_cast<int>(cameras.size() + captures.size()); }
  int camera_node(const std::string& id) const { return camera_index.at(id); }
  int capture_node(std::int64_t c) const {
    return static_cast<int>(cameras.size()) + capture_index.at(c);
  }
};

std::string describe_components(const std::vector<GraphComponent>& components) {
  std::ostringstream out;
  out << components.size() << " components:";
  for (size_t i = 0; i < components.size(); ++i) {
    out << " [" << i << ": cameras {";
    for (size_t k = 0; k < components[i].cameras.size(); ++k) {
      out << (k ? ", " : "") << components[i].cameras[k];
    }
    out << "}, " << components[i].captures.size() << " captures]";
  }
  return out.str();
}

}  // namespace

std::vector<GraphComponent> connected_components(const PoseGraph& graph) {
  const NodeIndex index(graph);
  DisjointSet sets(index.total());
  for (const PoseGraphEdge& e : graph.edges) {
    sets.unite(index.camera_node(e.camera_id), index.capture_node(e.capture_index));
  }

  std::map<int, GraphComponent> by_root;
  for (const std::string& id : index.cameras) {
    by_root[sets.find(index.camera_node(id))].cameras.push_back(id);
  }
  for (std::int64_t c : index.captures) {
    by_root[sets.find(index.capture_node(c))].captures.push_back(c);
  }
  std::vector<GraphComponent> components;
  for (auto& [root, component] : by_root) components.push_back(std::move(component));
  return components;
}

PoseGraph build_pose_graph(const std::vector<ViewObservation>& views,
                           const std::map<std::string, CameraIntrinsics>& intrinsics,
                           const CheckerboardSpec& spec) {
  spec.validate();
  PoseGraph graph;
  graph.intrinsics = intrinsics;
  graph.board = spec;

  for (const ViewObservation& view : views) {
    const auto intr = intrinsics.find(view.camera_id);
    if (intr == intrinsics.end()) {
      throw_error(ErrorCode::InvalidArgument,
                  "no intrinsics for camera '" + view.camera_id + "'");
    }
    try {
      const BoardPoseEstimate estimate = estimate_board_pose(intr->second, view, spec);
      graph.edges.push_back(
          {view.camera_id, view.capture_index, view, estimate.board_to_camera, estimate.rms});
      graph.captures.insert(view.capture_index);
    } catch (const CalibError& e) {
      graph.dropped.push_back({view.camera_id, view.capture_index, e.what()});
    }
  }

  const auto components = connected_components(graph);
  if (components.size() > 1) {
    throw_error(ErrorCode::DisconnectedGraph,
                "pose graph is disconnected into " + describe_components(components));
  }
  return graph;
}

void RigExtrinsics::validate() const {
  const auto ref = camera_poses.find(reference_camera_id);
  if (ref == camera_poses.end()) {
    throw_error(ErrorCode::InvalidArgument,
                "reference camera '" + reference_camera_id + "' has no pose");
  }
  if (!(ref->second.rotation().quaternion().w() == 1.0 &&
        ref->second.translation().isZero(0.0))) {
    throw_error(ErrorCode::InvalidArgument, "reference camera pose must be the identity");
  }
}

double recompute_total_error(const BundleState& state, const PoseGraph& graph) {
  const std::vector<Vec3> grid = board_points(graph.board);
  const auto& intrinsics =
      state.refined_intrinsics ? *state.refined_intrinsics : graph.intrinsics;
  double total = 0.0;
  for (const PoseGraphEdge& edge : graph.edges) {
    const Pose& cam = state.rig.camera_poses.at(edge.camera_id);
    const Pose& board = state.board_poses.at(edge.capture_index);
    const Pose board_in_camera = cam.inverse() * board;
    const CameraIntrinsics& intr = intrinsics.at(edge.camera_id);
    for (const CornerObservation& corner : edge.view.corners) {
      total += (project(intr, board_in_camera * grid[corner.corner_id]) - corner.pixel)
                   .squaredNorm();
    }
  }
  return total;
}

BundleState spanning_tree_init(const PoseGraph& graph,
                               const std::string& reference_camera_id) {
  if (!graph.intrinsics.count(reference_camera_id)) {
    throw_error(ErrorCode::InvalidArgument,
                "reference camera '" + reference_camera_id + "' is not in the graph");
  }
  const auto components = connected_components(graph);
  if (components.size() > 1) {
    throw_error(ErrorCode::DisconnectedGraph,
                "pose graph is disconnected into " + describe_components(components));
  }

  const NodeIndex index(graph);

  // Kruskal with a total order: weight, then capture index, then camera id.
  std::vector<const PoseGraphEdge*> sorted;
  for (const PoseGraphEdge& e : graph.edges) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const PoseGraphEdge* a, const PoseGraphEdge* b) {
    if (a->weight != b->weight) return a->weight < b->weight;
    if (a->capture_index != b->capture_index) return a->capture_index < b->capture_index;
    return a->camera_id < b->camera_id;
  });

  DisjointSet sets(index.total());
  std::vector<std::vector<const PoseGraphEdge*>> adjacency(index.total());
  for (const PoseGraphEdge* e : sorted) {
    const int cam = index.camera_node(e->camera_id);
    const int cap = index.capture_node(e->capture_index);
    if (sets.unite(cam, cap)) {
      adjacency[cam].push_back(e);
      adjacency[cap].push_back(e);
    }
  }

  // walk the tree from the reference, composing relative poses
  BundleState state;
  state.rig.reference_camera_id = reference_camera_id;
  state.rig.camera_poses[reference_camera_id] = Pose::identity();

  std::vector<bool> visited(index.total(), false);
  std::vector<int> queue{index.camera_node(reference_camera_id)};
  visited[queue.front()] = true;
  while (!queue.empty()) {
    const int node = queue.front();
    queue.erase(queue.begin());
    for (const PoseGraphEdge* e : adjacency[node]) {
      const int cam = index.camera_node(e->camera_id);
      const int cap = index.capture_node(e->capture_index);
      const int next = node == cam ? cap : cam;
      if (visited[next]) continue;
      visited[next] = true;
      if (next == cap) {
        // board pose from a known camera: T_ref_board = T_ref_cam * T_cam_board
        state.board_poses[e->capture_index] =
            state.rig.camera_poses.at(e->camera_id) * e->board_to_camera;
      } else {
        // camera pose from a known board: T_ref_cam = T_ref_board * T_cam_board^-1
        state.rig.camera_poses[e->camera_id] =
            state.board_poses.at(e->capture_index) * e->board_to_camera.inverse();
      }
      queue.push_back(next);
    }
  }

  state.total_squared_error = recompute_total_error(state, graph);
  return state;
}

BundleResult bundle_adjust(const BundleState& init, const PoseGraph& graph,
                           const BundleConfig& config) {
  init.rig.validate();

  const auto& initial_intrinsics =
      init.refined_intrinsics ? *init.refined_intrinsics : graph.intrinsics;

  // deterministic parameter ordering: cameras and boards by key
  std::map<std::string, int> camera_index;
  std::vector<ba::Camera> cameras;
  for (const auto& [id, pose] : init.rig.camera_poses) {
    camera_index[id] = static_cast<int>(cameras.size());
    cameras.push_back({initial_intrinsics.at(id), pose, id == init.rig.reference_camera_id});
  }
  std::map<std::int64_t, int> board_index;
  std::vector<ba::Board> boards;
  for (const auto& [capture, pose] : init.board_poses) {
    board_index[capture] = static_cast<int>(boards.size());
    boards.push_back({pose});
  }

  const std::vector<Vec3> grid = board_points(graph.board);
  std::vector<const PoseGraphEdge*> sorted_edges;
  for (const PoseGraphEdge& e : graph.edges) sorted_edges.push_back(&e);
  std::sort(sorted_edges.begin(), sorted_edges.end(),
            [](const PoseGraphEdge* a, const PoseGraphEdge* b) {
              if (a->capture_index != b->capture_index)
                return a->capture_index < b->capture_index;
              return a->camera_id < b->camera_id;
            });

  std::vector<ba::Observation> observations;
  for (const PoseGraphEdge* e : sorted_edges) {
    const auto cam = camera_index.find(e->camera_id);
    const auto board = board_index.find(e->capture_index);
    if (cam == camera_index.end() || board == board_index.end()) {
      throw_error(ErrorCode::InvalidArgument,
                  "initial state is missing a pose for an observed edge");
    }
    for (const CornerObservation& corner : e->view.corners) {
      observations.push_back(
          {cam->second, board->second, grid[corner.corner_id], corner.pixel});
    }
  }

  ba::Config ba_config;
  ba_config.refine_intrinsics = config.refine_intrinsics;
  ba_config.robust = config.robust;
  ba_config.huber_scale = config.huber_scale_px;
  ba_config.lm = config.lm;

  const ba::Outcome outcome = ba::solve(cameras, boards, observations, ba_config);

  BundleResult result;
  result.summary = outcome.summary;
  result.state.rig.reference_camera_id = init.rig.reference_camera_id;
  for (const auto& [id, idx] : camera_index) {
    result.state.rig.camera_poses[id] = cameras[idx].pose;
  }
  if (config.refine_intrinsics) {
    std::map<std::string, CameraIntrinsics> refined;
    for (const auto& [id, idx] : camera_index) refined[id] = cameras[idx].intrinsics;
    result.state.refined_intrinsics = std::move(refined);
  }
  for (const auto& [capture, idx] : board_index) {
    result.state.board_poses[capture] = boards[idx].pose;
  }
  result.state.total_squared_error = recompute_total_error(result.state, graph);
  return result;
}

Pose board_pose_from_views(const std::vector<ViewObservation>& views,
                           const std::map<std::string, CameraIntrinsics>& intrinsics,
                           const RigExtrinsics& rig, const CheckerboardSpec& spec) {
  if (views.empty()) {
    throw_error(ErrorCode::InvalidArgument, "no views of the board");
  }
  for (const ViewObservation& view : views) {
    if (view.capture_index != views.front().capture_index) {
      throw_error(ErrorCode::InvalidArgument, "views mix capture instants");
    }
  }

  // best single view initializes; every view constrains the refinement
  double best_rms = std::numeric_limits<double>::infinity();
  Pose init;
  for (const ViewObservation& view : views) {
    const Pose& camera_pose = rig.camera_poses.at(view.camera_id);
    try {
      const BoardPoseEstimate estimate =
          estimate_board_pose(intrinsics.at(view.camera_id), view, spec);
      if (estimate.rms < best_rms) {
        best_rms = estimate.rms;
        init = camera_pose * estimate.board_to_camera;
      }
    } catch (const CalibError&) {
      continue;
    }
  }
  if (!std::isfinite(best_rms)) {
    throw_error(ErrorCode::NoConvergence, "no view yields a usable board pose");
  }

  std::map<std::string, int> camera_index;
  std::vector<ba::Camera> cameras;
  std::vector<ba::Board> boards{{init}};
  std::vector<ba::Observation> observations;
  const std::vector<Vec3> grid = board_points(spec);
  for (const ViewObservation& view : views) {
    auto it = camera_index.find(view.camera_id);
    if (it == camera_index.end()) {
      it = camera_index.emplace(view.camera_id, static_cast<int>(cameras.size())).first;
      cameras.push_back(
          {intrinsics.at(view.camera_id), rig.camera_poses.at(view.camera_id), true});
    }
    for (const CornerObservation& corner : view.corners) {
      observations.push_back({it->second, 0, grid[corner.corner_id], corner.pixel});
    }
  }
  ba::solve(cameras, boards, observations, ba::Config{});
  return boards.front().pose;
}

BaselineReport baseline_report(const RigExtrinsics& rig) {
  BaselineReport report;
  for (const auto& [id, pose] : rig.camera_poses) report.camera_ids.push_back(id);
  const int n = static_cast<int>(report.camera_ids.size());
  report.distances.setZero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (rig.camera_poses.at(report.camera_ids[i]).translation() -
                        rig.camera_poses.at(report.camera_ids[j]).translation())
                           .norm();
      report.distances(i, j) = d;
      report.distances(j, i) = d;
    }
  }
  return report;
}

}  // namespace rigcal
