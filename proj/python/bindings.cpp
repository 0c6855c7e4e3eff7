#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/io.hpp"
#include "rigcal/lidar_camera.hpp"
#include "rigcal/sim.hpp"
#include "rigcal/surround.hpp"
#include "rigcal/sync.hpp"

namespace py = pybind11;
using namespace rigcal;

namespace {

Eigen::Vector4d quaternion_wxyz(const Rotation& r) {
  const Eigen::Quaterniond& q = r.quaternion();
  return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "surround camera / scanner rig calibration core";

  py::register_exception<CalibError>(m, "CalibrationError");

  // ------------------------------------------------------------- geometry
  py::class_<Rotation>(m, "Rotation")
      .def(py::init<>())
      .def_static("from_quaternion", &Rotation::from_quaternion, py::arg("w"), py::arg("x"),
                  py::arg("y"), py::arg("z"))
      .def_static("from_matrix", &Rotation::from_matrix)
      .def_static("exp", &Rotation::exp)
      .def("log", &Rotation::log)
      .def("inverse", &Rotation::inverse)
      .def("matrix", &Rotation::matrix)
      .def("quaternion_wxyz", &quaternion_wxyz)
      .def("angle_to", &Rotation::angle_to)
      .def("angle", &Rotation::angle)
      .def("__mul__", [](const Rotation& a, const Rotation& b) { return a * b; })
      .def("__mul__", [](const Rotation& a, const Vec3& v) { return a * v; })
      .def("__repr__", [](const Rotation& r) {
        const Eigen::Vector4d q = quaternion_wxyz(r);
        return "Rotation(w=" + std::to_string(q[0]) + ", x=" + std::to_string(q[1]) +
               ", y=" + std::to_string(q[2]) + ", z=" + std::to_string(q[3]) + ")";
      });

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<const Rotation&, const Vec3&>(), py::arg("rotation"),
           py::arg("translation"))
      .def_static("identity", &Pose::identity)
      .def_static("from_translation", &Pose::from_translation)
      .def_static("from_rotation", &Pose::from_rotation)
      .def_static("exp", &Pose::exp)
      .def("log", &Pose::log)
      .def_property_readonly("rotation", &Pose::rotation)
      .def_property_readonly("translation", &Pose::translation)
      .def("inverse", &Pose::inverse)
      .def("__mul__", [](const Pose& a, const Pose& b) { return a * b; })
      .def("__mul__", [](const Pose& a, const Vec3& p) { return a * p; });

  py::class_<Plane>(m, "Plane")
      .def(py::init<const Vec3&, double>(), py::arg("normal"), py::arg("offset"))
      .def_static("from_point_normal", &Plane::from_point_normal)
      .def_property_readonly("normal", &Plane::normal)
      .def_property_readonly("offset", &Plane::offset)
      .def("signed_distance", &Plane::signed_distance)
      .def("distance", &Plane::distance)
      .def("transformed", &Plane::transformed)
      .def("oriented_toward", &Plane::oriented_toward, py::arg("point"),
           py::arg("tol") = 1e-9);

  m.def("rotation_from_direction_pairs", &rotation_from_direction_pairs, py::arg("src"),
        py::arg("dst"));
  m.def(
      "fit_plane",
      [](const std::vector<Vec3>& pts) {
        const PlaneFit fit = fit_plane(pts);
        return py::make_tuple(fit.plane, fit.rms);
      },
      py::arg("points"), "total-least-squares plane; returns (plane, rms)");

  // --------------------------------------------------------------- camera
  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("xi", &CameraIntrinsics::xi)
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("k1", &CameraIntrinsics::k1)
      .def_readwrite("k2", &CameraIntrinsics::k2)
      .def_readwrite("p1", &CameraIntrinsics::p1)
      .def_readwrite("p2", &CameraIntrinsics::p2)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("params", &CameraIntrinsics::params)
      .def("validate", &CameraIntrinsics::validate);

  py::class_<CheckerboardSpec>(m, "CheckerboardSpec")
      .def(py::init<>())
      .def_readwrite("inner_rows", &CheckerboardSpec::inner_rows)
      .def_readwrite("inner_cols", &CheckerboardSpec::inner_cols)
      .def_readwrite("square_size", &CheckerboardSpec::square_size)
      .def("corner_count", &CheckerboardSpec::corner_count);

  py::class_<CornerObservation>(m, "CornerObservation")
      .def(py::init<>())
      .def_readwrite("corner_id", &CornerObservation::corner_id)
      .def_readwrite("pixel", &CornerObservation::pixel);

  py::class_<ViewObservation>(m, "ViewObservation")
      .def(py::init<>())
      .def_readwrite("camera_id", &ViewObservation::camera_id)
      .def_readwrite("capture_index", &ViewObservation::capture_index)
      .def_readwrite("corners", &ViewObservation::corners);

  m.def("board_points", &board_points);
  m.def("project", &project, py::arg("intrinsics"), py::arg("point"));
  m.def("projectable", &projectable, py::arg("intrinsics"), py::arg("point"));
  m.def("unproject", &unproject, py::arg("intrinsics"), py::arg("pixel"));
  m.def(
      "project_jacobians",
      [](const CameraIntrinsics& intr, const Vec3& p) {
        const ProjectionJacobians j = project_jacobians(intr, p);
        py::dict out;
        out["pixel"] = j.pixel;
        out["d_point"] = Eigen::MatrixXd(j.d_point);
        out["d_intrinsics"] = Eigen::MatrixXd(j.d_intrinsics);
        out["d_pose"] = Eigen::MatrixXd(j.d_pose);
        return out;
      },
      py::arg("intrinsics"), py::arg("point"));
  m.def(
      "estimate_board_pose",
      [](const CameraIntrinsics& intr, const ViewObservation& view,
         const CheckerboardSpec& spec) {
        const BoardPoseEstimate est = estimate_board_pose(intr, view, spec);
        return py::make_tuple(est.board_to_camera, est.rms);
      },
      py::arg("intrinsics"), py::arg("view"), py::arg("board"),
      "returns (board_to_camera, rms)");

  py::class_<IntrinsicsCalibration>(m, "IntrinsicsCalibration")
      .def_readonly("intrinsics", &IntrinsicsCalibration::intrinsics)
      .def_readonly("view_poses", &IntrinsicsCalibration::view_poses)
      .def_readonly("rms", &IntrinsicsCalibration::rms)
      .def_readonly("initial_rms", &IntrinsicsCalibration::initial_rms)
      .def_readonly("iterations", &IntrinsicsCalibration::iterations)
      .def_readonly("converged", &IntrinsicsCalibration::converged);
  m.def("calibrate_intrinsics", &calibrate_intrinsics, py::arg("views"), py::arg("board"),
        py::arg("width") = 1600, py::arg("height") = 1200);

  // ------------------------------------------------------------- surround
  py::class_<PoseGraphEdge>(m, "PoseGraphEdge")
      .def_readonly("camera_id", &PoseGraphEdge::camera_id)
      .def_readonly("capture_index", &PoseGraphEdge::capture_index)
      .def_readonly("board_to_camera", &PoseGraphEdge::board_to_camera)
      .def_readonly("weight", &PoseGraphEdge::weight);

  py::class_<DroppedEdge>(m, "DroppedEdge")
      .def_readonly("camera_id", &DroppedEdge::camera_id)
      .def_readonly("capture_index", &DroppedEdge::capture_index)
      .def_readonly("reason", &DroppedEdge::reason);

  py::class_<PoseGraph>(m, "PoseGraph")
      .def_readonly("intrinsics", &PoseGraph::intrinsics)
      .def_readonly("captures", &PoseGraph::captures)
      .def_readonly("edges", &PoseGraph::edges)
      .def_readonly("dropped", &PoseGraph::dropped);

  py::class_<RigExtrinsics>(m, "RigExtrinsics")
      .def(py::init<>())
      .def_readwrite("reference_camera_id", &RigExtrinsics::reference_camera_id)
      .def_readwrite("camera_poses", &RigExtrinsics::camera_poses);

  py::class_<BundleState>(m, "BundleState")
      .def_readonly("rig", &BundleState::rig)
      .def_readonly("board_poses", &BundleState::board_poses)
      .def_readonly("refined_intrinsics", &BundleState::refined_intrinsics)
      .def_readonly("total_squared_error", &BundleState::total_squared_error);

  py::class_<BundleConfig>(m, "BundleConfig")
      .def(py::init<>())
      .def_readwrite("refine_intrinsics", &BundleConfig::refine_intrinsics)
      .def_readwrite("robust", &BundleConfig::robust)
      .def_readwrite("huber_scale_px", &BundleConfig::huber_scale_px);

  py::class_<LmSummary>(m, "LmSummary")
      .def_readonly("converged", &LmSummary::converged)
      .def_readonly("iterations", &LmSummary::iterations)
      .def_readonly("initial_cost", &LmSummary::initial_cost)
      .def_readonly("final_cost", &LmSummary::final_cost);

  py::class_<BundleResult>(m, "BundleResult")
      .def_readonly("state", &BundleResult::state)
      .def_readonly("summary", &BundleResult::summary);

  m.def("build_pose_graph", &build_pose_graph, py::arg("views"), py::arg("intrinsics"),
        py::arg("board"));
  m.def("spanning_tree_init", &spanning_tree_init, py::arg("graph"),
        py::arg("reference_camera_id"));
  m.def("bundle_adjust", &bundle_adjust, py::arg("init"), py::arg("graph"),
        py::arg("config") = BundleConfig{});
  m.def("board_pose_from_views", &board_pose_from_views, py::arg("views"),
        py::arg("intrinsics"), py::arg("rig"), py::arg("board"));
  m.def(
      "baseline_report",
      [](const RigExtrinsics& rig) {
        const BaselineReport report = baseline_report(rig);
        return py::make_tuple(report.camera_ids, report.distances);
      },
      py::arg("rig"), "returns (camera_ids, distance_matrix)");

  // --------------------------------------------------------- lidar-camera
  py::class_<PlanePairObservation>(m, "PlanePairObservation")
      .def(py::init<>())
      .def_readwrite("capture_index", &PlanePairObservation::capture_index)
      .def_readwrite("camera_plane", &PlanePairObservation::camera_plane)
      .def_readwrite("camera_corners", &PlanePairObservation::camera_corners)
      .def_readwrite("lidar_points", &PlanePairObservation::lidar_points)
      .def("validate", &PlanePairObservation::validate);

  py::class_<LidarCameraExtrinsics>(m, "LidarCameraExtrinsics")
      .def(py::init<>())
      .def_readwrite("camera_to_vehicle", &LidarCameraExtrinsics::camera_to_vehicle)
      .def_readonly("per_observation_rms", &LidarCameraExtrinsics::per_observation_rms);

  m.def("camera_plane_from_board", &camera_plane_from_board, py::arg("board_to_camera"),
        py::arg("board"));
  m.def(
      "ransac_board_points",
      [](const std::vector<Vec3>& scan, std::uint64_t seed) {
        const RansacPlaneResult result = ransac_board_points(scan, seed);
        return py::make_tuple(result.inlier_indices, result.plane);
      },
      py::arg("scan"), py::arg("seed"), "returns (inlier_indices, plane)");
  m.def("solve_rotation", &solve_rotation, py::arg("pairs"));
  m.def("solve_translation", &solve_translation, py::arg("pairs"), py::arg("rotation"));
  m.def("refine_lidar_camera", &refine, py::arg("pairs"), py::arg("init"));
  m.def("calibrate_lidar_camera", &calibrate_lidar_camera, py::arg("pairs"));
  m.def("lidar_camera_objective", &lidar_camera_objective, py::arg("pairs"), py::arg("pose"));
  m.def(
      "project_cloud",
      [](const LidarCameraExtrinsics& extr, const RigExtrinsics& rig,
         const std::map<std::string, CameraIntrinsics>& intr, const std::vector<Vec3>& cloud) {
        std::map<std::string, std::vector<py::tuple>> out;
        for (const auto& [id, pts] : project_cloud(extr, rig, intr, cloud)) {
          for (const ProjectedPoint& p : pts) {
            out[id].push_back(py::make_tuple(p.pixel, p.depth));
          }
        }
        return out;
      },
      py::arg("extrinsics"), py::arg("rig"), py::arg("intrinsics"), py::arg("cloud"),
      "per camera list of (pixel, depth)");

  // ----------------------------------------------------------------- sync
  py::enum_<SensorKind>(m, "SensorKind")
      .value("Camera", SensorKind::Camera)
      .value("Lidar", SensorKind::Lidar)
      .value("Radar", SensorKind::Radar)
      .value("GpsImu", SensorKind::GpsImu)
      .value("Can", SensorKind::Can);

  py::class_<StreamRecord>(m, "StreamRecord")
      .def(py::init<>())
      .def_readwrite("timestamp_us", &StreamRecord::timestamp_us)
      .def_readwrite("payload", &StreamRecord::payload);

  py::class_<StreamLog>(m, "StreamLog")
      .def(py::init<>())
      .def_readwrite("stream_id", &StreamLog::stream_id)
      .def_readwrite("kind", &StreamLog::kind)
      .def_readwrite("records", &StreamLog::records);

  py::class_<AlignedEntry>(m, "AlignedEntry")
      .def_readonly("record", &AlignedEntry::record)
      .def_readonly("offset_us", &AlignedEntry::offset_us);

  py::class_<AlignedBundle>(m, "AlignedBundle")
      .def_readonly("query", &AlignedBundle::query)
      .def_readonly("streams", &AlignedBundle::streams);

  m.def("ingest", &ingest, py::arg("log"));
  m.def(
      "nearest",
      [](const StreamLog& log, Timestamp t) {
        const NearestResult r = nearest(log, t);
        return py::make_tuple(r.record, r.offset_us, r.index);
      },
      py::arg("log"), py::arg("timestamp_us"), "returns (record, offset_us, index)");
  m.def("align", &align, py::arg("streams"), py::arg("timestamp_us"),
        py::arg("tolerance_us"));
  m.def("resample_track", &resample_track, py::arg("log"), py::arg("rate_hz"),
        py::arg("tolerance_us") = kUnlimitedTolerance);

  // ------------------------------------------------------------ simulator
  py::class_<CameraGroundTruth>(m, "CameraGroundTruth")
      .def_readwrite("id", &CameraGroundTruth::id)
      .def_readwrite("intrinsics", &CameraGroundTruth::intrinsics)
      .def_readwrite("pose", &CameraGroundTruth::pose);

  py::class_<LidarGroundTruth>(m, "LidarGroundTruth")
      .def_readwrite("id", &LidarGroundTruth::id)
      .def_readwrite("pose", &LidarGroundTruth::pose);

  py::class_<RigGroundTruth>(m, "RigGroundTruth")
      .def_readwrite("cameras", &RigGroundTruth::cameras)
      .def_readwrite("lidars", &RigGroundTruth::lidars)
      .def("camera", &RigGroundTruth::camera, py::return_value_policy::copy)
      .def("intrinsics_map", &RigGroundTruth::intrinsics_map)
      .def("camera_pose_map", &RigGroundTruth::camera_pose_map);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_readwrite("pixel_sigma", &NoiseModel::pixel_sigma)
      .def_readwrite("lidar_sigma", &NoiseModel::lidar_sigma)
      .def_readwrite("dropout_rate", &NoiseModel::dropout_rate)
      .def_readwrite("seed", &NoiseModel::seed);

  py::class_<CapturePlan>(m, "CapturePlan")
      .def(py::init<>())
      .def_readwrite("board_poses", &CapturePlan::board_poses);

  py::class_<SimulatedCaptures>(m, "SimulatedCaptures")
      .def_readonly("views", &SimulatedCaptures::views)
      .def_readonly("board_poses", &SimulatedCaptures::board_poses);

  py::class_<LidarPoint>(m, "LidarPoint")
      .def_readonly("point", &LidarPoint::point)
      .def_readonly("layer", &LidarPoint::layer);

  py::class_<ScenarioPaths>(m, "ScenarioPaths")
      .def_readonly("observations", &ScenarioPaths::observations)
      .def_readonly("cloud_dir", &ScenarioPaths::cloud_dir)
      .def_readonly("stream_index", &ScenarioPaths::stream_index)
      .def_readonly("ground_truth", &ScenarioPaths::ground_truth);

  m.def("default_rig", &default_rig);
  m.def("default_capture_plan", &default_capture_plan);
  m.def("simulate_captures", &simulate_captures, py::arg("rig"), py::arg("plan"),
        py::arg("board"), py::arg("noise"));
  m.def("simulate_lidar_board", &simulate_lidar_board, py::arg("rig"), py::arg("board_pose"),
        py::arg("board"), py::arg("noise"));
  m.def("export_scenario", &export_scenario, py::arg("rig"), py::arg("plan"), py::arg("board"),
        py::arg("noise"), py::arg("out_dir"));

  // --------------------------------------------------------------- files
  m.def("write_observations", &io::write_observations, py::arg("path"), py::arg("views"));
  m.def("read_observations", &io::read_observations, py::arg("path"));
  m.def("read_stream_index", &io::read_stream_index, py::arg("path"));
  m.def(
      "read_cloud",
      [](const std::filesystem::path& path) {
        std::vector<Vec3> points;
        for (const io::CloudPoint& p : io::read_cloud(path)) points.push_back(p.point);
        return points;
      },
      py::arg("path"));
}
