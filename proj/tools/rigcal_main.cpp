// rigcal: surround-rig calibration pipeline driver.
//
// Subcommands cover the full workflow: simulate a dataset, calibrate
// per-camera intrinsics, solve the surround extrinsics, register the
// scanner frame, project clouds, check stream synchronization, and render
// reports. Stages exchange data only through files; a shared calibration
// document under --out accumulates the results.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rigcal/camera.hpp"
#include "rigcal/io.hpp"
#include "rigcal/lidar_camera.hpp"
#include "rigcal/sim.hpp"
#include "rigcal/surround.hpp"
#include "rigcal/sync.hpp"

namespace {

using namespace rigcal;
namespace fs = std::filesystem;

constexpr const char* kDocumentName = "calibration.json";

std::string format_full(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string format_fixed(double v, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, v);
  return buffer;
}

struct BoardFlags {
  int rows = 6;
  int cols = 9;
  double square = 0.08;

  CheckerboardSpec spec() const {
    CheckerboardSpec s;
    s.inner_rows = rows;
    s.inner_cols = cols;
    s.square_size = square;
    return s;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--rows", rows, "inner corner rows of the checkerboard");
    cmd->add_option("--cols", cols, "inner corner columns of the checkerboard");
    cmd->add_option("--square", square, "checkerboard square size in meters");
  }
};

io::CalibrationDocument open_or_create_document(const fs::path& path) {
  if (fs::exists(path)) return io::CalibrationDocument::load(path);
  return io::CalibrationDocument::create();
}

int run_simulate(const fs::path& out, std::uint64_t seed, double pixel_noise,
                 double lidar_noise, double dropout, int captures, const BoardFlags& board) {
  const RigGroundTruth rig = default_rig();
  CapturePlan plan = default_capture_plan();
  if (captures > 0 && captures < static_cast<int>(plan.board_poses.size())) {
    // even stride keeps the whole sweep covered in reduced scenarios
    std::vector<Pose> kept;
    const double stride = static_cast<double>(plan.board_poses.size()) / captures;
    for (int k = 0; k < captures; ++k) {
      kept.push_back(plan.board_poses[static_cast<std::size_t>(k * stride)]);
    }
    plan.board_poses = std::move(kept);
  }
  NoiseModel noise;
  noise.pixel_sigma = pixel_noise;
  noise.lidar_sigma = lidar_noise;
  noise.dropout_rate = dropout;
  noise.seed = seed;
  noise.validate();

  const ScenarioPaths paths = export_scenario(rig, plan, board.spec(), noise, out);
  std::cout << "observations: " << paths.observations.string() << "\n"
            << "clouds:       " << paths.cloud_dir.string() << "\n"
            << "streams:      " << paths.stream_index.string() << "\n"
            << "ground truth: " << paths.ground_truth.string() << "\n";
  return 0;
}

int run_calib_intrinsics(const fs::path& observations, const fs::path& out,
                         const BoardFlags& board, int width, int height,
                         const std::vector<std::string>& only_cameras, int max_views) {
  const auto views = io::read_observations(observations);

  std::map<std::string, std::vector<ViewObservation>> by_camera;
  for (const ViewObservation& view : views) by_camera[view.camera_id].push_back(view);
  if (max_views > 0) {
    for (auto& [id, camera_views] : by_camera) {
      if (static_cast<int>(camera_views.size()) <= max_views) continue;
      // deterministic even stride across the sweep
      std::vector<ViewObservation> kept;
      const double stride = static_cast<double>(camera_views.size()) / max_views;
      for (int k = 0; k < max_views; ++k) {
        kept.push_back(camera_views[static_cast<std::size_t>(k * stride)]);
      }
      camera_views = std::move(kept);
    }
  }
  if (!only_cameras.empty()) {
    const std::set<std::string> keep(only_cameras.begin(), only_cameras.end());
    for (auto it = by_camera.begin(); it != by_camera.end();) {
      it = keep.count(it->first) ? std::next(it) : by_camera.erase(it);
    }
  }
  if (by_camera.empty()) {
    throw_error(ErrorCode::InvalidArgument, "no cameras to calibrate");
  }

  fs::create_directories(out);
  io::CalibrationDocument doc = open_or_create_document(out / kDocumentName);
  for (const auto& [camera_id, camera_views] : by_camera) {
    const IntrinsicsCalibration calib =
        calibrate_intrinsics(camera_views, board.spec(), width, height);
    doc.set_camera_intrinsics(camera_id, calib.intrinsics, calib.rms);
    std::cout << camera_id << ": " << camera_views.size() << " views, rms "
              << format_fixed(calib.rms, 4) << " px\n";
  }
  doc.add_provenance("calib-intrinsics", {observations},
                     io::json{{"board_rows", board.rows},
                              {"board_cols", board.cols},
                              {"square_size", board.square},
                              {"width", width},
                              {"height", height}});
  doc.save(out / kDocumentName);
  return 0;
}

int run_calib_extrinsics(const fs::path& observations, const fs::path& out,
                         const fs::path& calibration, const BoardFlags& board,
                         const std::string& reference, bool refine_intrinsics, bool robust) {
  const fs::path doc_path = calibration.empty() ? out / kDocumentName : calibration;
  io::CalibrationDocument doc = io::CalibrationDocument::load(doc_path);
  const auto intrinsics = doc.camera_intrinsics();

  const auto views = io::read_observations(observations);
  const PoseGraph graph = build_pose_graph(views, intrinsics, board.spec());
  for (const DroppedEdge& dropped : graph.dropped) {
    std::cerr << "warning: dropped view (camera " << dropped.camera_id << ", capture "
              << dropped.capture_index << "): " << dropped.reason << "\n";
  }

  const BundleState init = spanning_tree_init(graph, reference);
  BundleConfig config;
  config.refine_intrinsics = refine_intrinsics;
  config.robust = robust;
  const BundleResult result = bundle_adjust(init, graph, config);

  int corner_count = 0;
  for (const PoseGraphEdge& e : graph.edges) corner_count += e.view.corners.size();

  io::ExtrinsicMetrics metrics;
  metrics.final_rms = std::sqrt(result.state.total_squared_error / (2.0 * corner_count));
  metrics.initial_rms = std::sqrt(init.total_squared_error / (2.0 * corner_count));
  metrics.iterations = result.summary.iterations;
  metrics.converged = result.summary.converged;
  const std::vector<Vec3> grid = board_points(board.spec());
  for (const PoseGraphEdge& e : graph.edges) {
    const Pose board_in_camera = result.state.rig.camera_poses.at(e.camera_id).inverse() *
                                 result.state.board_poses.at(e.capture_index);
    double sum_sq = 0.0;
    const CameraIntrinsics& intr = result.state.refined_intrinsics
                                       ? result.state.refined_intrinsics->at(e.camera_id)
                                       : intrinsics.at(e.camera_id);
    for (const CornerObservation& c : e.view.corners) {
      sum_sq += (project(intr, board_in_camera * grid[c.corner_id]) - c.pixel).squaredNorm();
    }
    metrics.edges.push_back({e.capture_index, e.camera_id,
                             std::sqrt(sum_sq / (2.0 * e.view.corners.size())),
                             static_cast<int>(e.view.corners.size())});
  }

  fs::create_directories(out);
  doc.set_rig(result.state.rig);
  doc.set_extrinsic_metrics(metrics);
  if (result.state.refined_intrinsics) {
    for (const auto& [id, intr] : *result.state.refined_intrinsics) {
      doc.set_camera_intrinsics(id, intr, doc.intrinsic_rms(id));
    }
    doc.raw()["extrinsic"]["refined_intrinsics"] = true;
  }
  doc.add_provenance("calib-extrinsics", {observations, doc_path},
                     io::json{{"reference", reference},
                              {"refine_intrinsics", refine_intrinsics},
                              {"robust", robust},
                              {"board_rows", board.rows},
                              {"board_cols", board.cols},
                              {"square_size", board.square}});
  doc.save(out / kDocumentName);

  std::cout << "cameras: " << result.state.rig.camera_poses.size() << ", boards: "
            << result.state.board_poses.size() << ", edges: " << graph.edges.size() << "\n"
            << "rms: " << format_fixed(metrics.initial_rms, 4) << " -> "
            << format_fixed(metrics.final_rms, 4) << " px in " << metrics.iterations
            << " iterations\n";

  if (!result.summary.converged) {
    throw_error(ErrorCode::NoConvergence,
                std::string("bundle adjustment stopped early: ") +
                    lm_stop_name(result.summary.stop));
  }
  return 0;
}

int run_calib_lidar(const fs::path& observations, const fs::path& clouds, const fs::path& out,
                    const fs::path& calibration, const BoardFlags& board, std::uint64_t seed) {
  const fs::path doc_path = calibration.empty() ? out / kDocumentName : calibration;
  io::CalibrationDocument doc = io::CalibrationDocument::load(doc_path);
  const auto intrinsics = doc.camera_intrinsics();
  const RigExtrinsics rig = doc.rig();

  const auto views = io::read_observations(observations);
  const CheckerboardSpec spec = board.spec();
  const std::vector<Vec3> grid = board_points(spec);

  // all views of a capture jointly fix the board pose in the reference frame
  std::map<std::int64_t, std::vector<ViewObservation>> views_by_capture;
  for (const ViewObservation& view : views) {
    if (rig.camera_poses.count(view.camera_id)) {
      views_by_capture[view.capture_index].push_back(view);
    }
  }
  std::map<std::int64_t, Pose> board_in_reference;
  for (const auto& [capture, capture_views] : views_by_capture) {
    try {
      board_in_reference[capture] =
          board_pose_from_views(capture_views, intrinsics, rig, spec);
    } catch (const CalibError& e) {
      std::cerr << "warning: capture " << capture << ": " << e.what() << "\n";
    }
  }

  std::vector<PlanePairObservation> pairs;
  for (const auto& [capture, board_pose] : board_in_reference) {
    char name[32];
    std::snprintf(name, sizeof(name), "cloud_%06lld.csv", static_cast<long long>(capture));
    const fs::path cloud_path = clouds / name;
    if (!fs::exists(cloud_path)) continue;
    const auto cloud = io::read_cloud(cloud_path);
    if (cloud.size() < 3) continue;

    std::vector<Vec3> points;
    for (const io::CloudPoint& p : cloud) points.push_back(p.point);
    RansacPlaneResult segmented;
    try {
      segmented = ransac_board_points(points, seed + static_cast<std::uint64_t>(capture));
    } catch (const CalibError& e) {
      std::cerr << "warning: capture " << capture << ": " << e.what() << "\n";
      continue;
    }

    PlanePairObservation pair;
    pair.capture_index = capture;
    pair.camera_plane = camera_plane_from_board(board_pose, spec);
    for (const Vec3& g : grid) pair.camera_corners.push_back(board_pose * g);
    for (int idx : segmented.inlier_indices) pair.lidar_points.push_back(points[idx]);
    pairs.push_back(std::move(pair));
  }

  if (pairs.size() < 3) {
    throw_error(ErrorCode::RankDeficientNormals,
                "only " + std::to_string(pairs.size()) +
                    " usable board/cloud pairs; need at least 3 with spanning normals");
  }

  const LidarCameraExtrinsics extr = calibrate_lidar_camera(pairs);

  io::LidarSection section;
  section.camera_to_vehicle = extr.camera_to_vehicle;
  section.per_observation_rms = extr.per_observation_rms;
  section.objective = lidar_camera_objective(pairs, extr.camera_to_vehicle);
  section.converged = true;
  fs::create_directories(out);
  doc.set_lidar(section);
  doc.add_provenance("calib-lidar", {observations, doc_path},
                     io::json{{"clouds", clouds.string()}, {"seed", seed}});
  doc.save(out / kDocumentName);

  double worst_rms = 0.0;
  for (double r : extr.per_observation_rms) worst_rms = std::max(worst_rms, r);
  std::cout << "pairs: " << pairs.size() << ", worst point-plane rms "
            << format_fixed(worst_rms, 5) << " m\n";
  return 0;
}

int run_project(const fs::path& calibration, const fs::path& cloud_path, const fs::path& out) {
  const io::CalibrationDocument doc = io::CalibrationDocument::load(calibration);
  LidarCameraExtrinsics extr;
  extr.camera_to_vehicle = doc.lidar().camera_to_vehicle;

  const auto cloud = io::read_cloud(cloud_path);
  std::vector<Vec3> points;
  for (const io::CloudPoint& p : cloud) points.push_back(p.point);

  const auto projected = project_cloud(extr, doc.rig(), doc.camera_intrinsics(), points);

  std::ofstream file(out);
  if (!file) {
    throw_error(ErrorCode::IoFailure, "cannot write '" + out.string() + "'");
  }
  file << "# rigcal projections v1\n";
  file << "camera_id,u,v,depth\n";
  std::size_t total = 0;
  for (const auto& [id, pts] : projected) {
    for (const ProjectedPoint& p : pts) {
      file << id << ',' << format_full(p.pixel.x()) << ',' << format_full(p.pixel.y()) << ','
           << format_full(p.depth) << "\n";
      ++total;
    }
  }
  std::cout << "projected " << total << " point-camera pairs from " << points.size()
            << " points\n";
  return 0;
}

int run_sync_check(const fs::path& streams_path, std::int64_t tolerance_us,
                   const std::string& reference_id) {
  const auto streams = io::read_stream_index(streams_path);
  if (streams.empty()) {
    throw_error(ErrorCode::EmptyStream, "stream index has no records");
  }

  const StreamLog* reference = nullptr;
  if (reference_id.empty()) {
    for (const StreamLog& log : streams) {
      if (log.kind == SensorKind::Camera) {
        reference = &log;
        break;
      }
    }
    if (!reference) reference = &streams.front();
  } else {
    for (const StreamLog& log : streams) {
      if (log.stream_id == reference_id) reference = &log;
    }
    if (!reference) {
      throw_error(ErrorCode::InvalidArgument,
                  "reference stream '" + reference_id + "' not found");
    }
  }

  std::vector<StreamLog> others;
  for (const StreamLog& log : streams) {
    if (log.stream_id != reference->stream_id) others.push_back(log);
  }

  struct Stat {
    std::int64_t present = 0, absent = 0, max_offset = 0;
  };
  std::map<std::string, Stat> stats;
  for (const StreamRecord& record : reference->records) {
    const AlignedBundle bundle = align(others, record.timestamp_us, tolerance_us);
    for (const auto& [id, entry] : bundle.streams) {
      Stat& s = stats[id];
      if (entry) {
        ++s.present;
        s.max_offset = std::max(s.max_offset, std::abs(entry->offset_us));
      } else {
        ++s.absent;
      }
    }
  }

  std::cout << "reference: " << reference->stream_id << " (" << reference->records.size()
            << " records), tolerance " << tolerance_us << " us\n";
  std::cout << "stream,present,absent,max_abs_offset_us\n";
  bool all_present = true;
  for (const auto& [id, s] : stats) {
    std::cout << id << ',' << s.present << ',' << s.absent << ',' << s.max_offset << "\n";
    all_present = all_present && s.absent == 0;
  }
  std::cout << (all_present ? "all streams aligned within tolerance\n"
                            : "some records had no match within tolerance\n");
  return 0;
}

int run_report(const fs::path& calibration, const fs::path& out) {
  const io::CalibrationDocument doc = io::CalibrationDocument::load(calibration);
  fs::create_directories(out);

  const RigExtrinsics rig = doc.rig();
  const BaselineReport baselines = baseline_report(rig);
  {
    std::ofstream file(out / "baselines.csv");
    file << "# rigcal baselines v1\n";
    file << "camera";
    for (const std::string& id : baselines.camera_ids) file << ',' << id;
    file << "\n";
    for (std::size_t i = 0; i < baselines.camera_ids.size(); ++i) {
      file << baselines.camera_ids[i];
      for (std::size_t j = 0; j < baselines.camera_ids.size(); ++j) {
        file << ',' << format_full(baselines.distances(i, j));
      }
      file << "\n";
    }
    if (!file) throw_error(ErrorCode::IoFailure, "failed writing baselines.csv");
  }

  const io::ExtrinsicMetrics metrics = doc.extrinsic_metrics();
  {
    // plot-ready residual histogram over per-edge rms
    constexpr double kBucket = 0.05;  // px
    constexpr int kBuckets = 40;
    std::vector<int> counts(kBuckets + 1, 0);
    for (const io::EdgeResidual& e : metrics.edges) {
      const int bucket = std::min(static_cast<int>(e.rms / kBucket), kBuckets);
      counts[bucket]++;
    }
    std::ofstream file(out / "residual_histogram.csv");
    file << "# rigcal residual histogram v1\n";
    file << "rms_lo_px,rms_hi_px,edge_count\n";
    for (int b = 0; b <= kBuckets; ++b) {
      file << format_fixed(b * kBucket, 2) << ','
           << (b == kBuckets ? "inf" : format_fixed((b + 1) * kBucket, 2)) << ','
           << counts[b] << "\n";
    }
    if (!file) throw_error(ErrorCode::IoFailure, "failed writing residual_histogram.csv");
  }

  {
    std::ofstream file(out / "summary.txt");
    file << "rigcal calibration summary\n";
    file << "reference camera: " << rig.reference_camera_id << "\n";
    file << "cameras: " << rig.camera_poses.size() << "\n";
    file << "bundle rms: " << format_fixed(metrics.final_rms, 4) << " px (from "
         << format_fixed(metrics.initial_rms, 4) << " px, " << metrics.iterations
         << " iterations, " << (metrics.converged ? "converged" : "not converged") << ")\n";
    file << "edges: " << metrics.edges.size() << "\n";

    const auto intrinsics = doc.camera_intrinsics();
    for (const auto& [id, intr] : intrinsics) {
      file << "  " << id << ": xi " << format_fixed(intr.xi, 4) << ", f ("
           << format_fixed(intr.fx, 2) << ", " << format_fixed(intr.fy, 2) << "), c ("
           << format_fixed(intr.cx, 2) << ", " << format_fixed(intr.cy, 2) << ")\n";
    }

    if (doc.has_lidar()) {
      const io::LidarSection lidar = doc.lidar();
      const Vec3& t = lidar.camera_to_vehicle.translation();
      double worst = 0.0;
      for (double r : lidar.per_observation_rms) worst = std::max(worst, r);
      file << "lidar: camera frame sits at (" << format_fixed(t.x(), 4) << ", "
           << format_fixed(t.y(), 4) << ", " << format_fixed(t.z(), 4)
           << ") m in the vehicle frame; worst point-plane rms " << format_fixed(worst, 5)
           << " m over " << lidar.per_observation_rms.size() << " boards\n";
    }
    if (!file) throw_error(ErrorCode::IoFailure, "failed writing summary.txt");
  }

  std::cout << "report written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surround camera and scanner rig calibration"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a config file");
  app.get_config_formatter_base()->comment('#');

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  fs::path sim_out;
  std::uint64_t sim_seed = 0;
  double pixel_noise = 0.0, lidar_noise = 0.0, dropout = 0.0;
  int captures = 0;
  BoardFlags sim_board;
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--seed", sim_seed, "random seed");
  simulate->add_option("--pixel-noise", pixel_noise, "corner noise sigma in pixels");
  simulate->add_option("--lidar-noise", lidar_noise, "range noise sigma in meters");
  simulate->add_option("--dropout", dropout, "corner dropout probability");
  simulate->add_option("--captures", captures, "number of board placements (0 = full plan)");
  sim_board.attach(simulate);

  // calib-intrinsics
  auto* intrinsics_cmd =
      app.add_subcommand("calib-intrinsics", "per-camera intrinsic calibration");
  fs::path intr_observations, intr_out;
  int width = 1600, height = 1200;
  int max_views = 24;
  std::vector<std::string> only_cameras;
  BoardFlags intr_board;
  intrinsics_cmd->add_option("--observations", intr_observations, "corner observation file")
      ->required();
  intrinsics_cmd->add_option("--out", intr_out, "output directory")->required();
  intrinsics_cmd->add_option("--width", width, "image width in pixels");
  intrinsics_cmd->add_option("--height", height, "image height in pixels");
  intrinsics_cmd->add_option("--camera", only_cameras, "restrict to these camera ids");
  intrinsics_cmd->add_option("--max-views", max_views,
                             "cap views per camera, evenly strided (0 = use all)");
  intr_board.attach(intrinsics_cmd);

  // calib-extrinsics
  auto* extrinsics_cmd =
      app.add_subcommand("calib-extrinsics", "surround extrinsic calibration");
  fs::path ext_observations, ext_out, ext_calibration;
  std::string reference = "front";
  bool refine_intrinsics = false, robust = false;
  BoardFlags ext_board;
  extrinsics_cmd->add_option("--observations", ext_observations, "corner observation file")
      ->required();
  extrinsics_cmd->add_option("--out", ext_out, "output directory")->required();
  extrinsics_cmd->add_option("--calibration", ext_calibration,
                             "calibration document to extend (default: <out>/calibration.json)");
  extrinsics_cmd->add_option("--reference", reference, "reference camera id");
  extrinsics_cmd->add_flag("--refine-intrinsics", refine_intrinsics,
                           "refine intrinsics jointly with the poses");
  extrinsics_cmd->add_flag("--robust", robust, "Huber loss on corner residuals");
  ext_board.attach(extrinsics_cmd);

  // calib-lidar
  auto* lidar_cmd = app.add_subcommand("calib-lidar", "scanner-to-camera calibration");
  fs::path lid_observations, lid_clouds, lid_out, lid_calibration;
  std::uint64_t lid_seed = 0;
  BoardFlags lid_board;
  lidar_cmd->add_option("--observations", lid_observations, "corner observation file")
      ->required();
  lidar_cmd->add_option("--clouds", lid_clouds, "directory with cloud_NNNNNN.csv files")
      ->required();
  lidar_cmd->add_option("--out", lid_out, "output directory")->required();
  lidar_cmd->add_option("--calibration", lid_calibration,
                        "calibration document to extend (default: <out>/calibration.json)");
  lidar_cmd->add_option("--seed", lid_seed, "plane segmentation seed");
  lid_board.attach(lidar_cmd);

  // project
  auto* project_cmd = app.add_subcommand("project", "project a cloud into all cameras");
  fs::path prj_calibration, prj_cloud, prj_out;
  project_cmd->add_option("--calibration", prj_calibration, "calibration document")
      ->required();
  project_cmd->add_option("--cloud", prj_cloud, "point cloud file")->required();
  project_cmd->add_option("--out", prj_out, "output csv path")->required();

  // sync-check
  auto* sync_cmd = app.add_subcommand("sync-check", "cross-stream alignment report");
  fs::path sync_streams;
  std::int64_t tolerance_us = 40000;
  std::string sync_reference;
  sync_cmd->add_option("--streams", sync_streams, "stream index file")->required();
  sync_cmd->add_option("--tolerance-us", tolerance_us, "alignment tolerance in microseconds");
  sync_cmd->add_option("--reference", sync_reference,
                       "reference stream id (default: first camera stream)");

  // report
  auto* report_cmd = app.add_subcommand("report", "baselines and residual tables");
  fs::path rep_calibration, rep_out;
  report_cmd->add_option("--calibration", rep_calibration, "calibration document")
      ->required();
  report_cmd->add_option("--out", rep_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return run_simulate(sim_out, sim_seed, pixel_noise, lidar_noise, dropout, captures,
                          sim_board);
    }
    if (intrinsics_cmd->parsed()) {
      return run_calib_intrinsics(intr_observations, intr_out, intr_board, width, height,
                                  only_cameras, max_views);
    }
    if (extrinsics_cmd->parsed()) {
      return run_calib_extrinsics(ext_observations, ext_out, ext_calibration, ext_board,
                                  reference, refine_intrinsics, robust);
    }
    if (lidar_cmd->parsed()) {
      return run_calib_lidar(lid_observations, lid_clouds, lid_out, lid_calibration,
                             lid_board, lid_seed);
    }
    if (project_cmd->parsed()) {
      return run_project(prj_calibration, prj_cloud, prj_out);
    }
    if (sync_cmd->parsed()) {
      return run_sync_check(sync_streams, tolerance_us, sync_reference);
    }
    if (report_cmd->parsed()) {
      return run_report(rep_calibration, rep_out);
    }
  } catch (const CalibError& e) {
    std::cerr << "rigcal: error: " << e.what() << "\n";
    return is_solver_error(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "rigcal: error: Internal: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
