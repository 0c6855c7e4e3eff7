#include "rigcal/sim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "rigcal/io.hpp"

namespace rigcal {

namespace {

const double kDeg = std::numbers::pi / 180.0;

// optical axis along vehicle +x for a zero-yaw camera: camera x maps to
// vehicle -y (right), camera y to -z (down), camera z to +x (forward)
Mat3 camera_base_orientation() {
  Mat3 r;
  r << 0, 0, 1,  //
      -1, 0, 0,  //
      0, -1, 0;
  return r;
}

}  // namespace

const CameraGroundTruth& RigGroundTruth::camera(const std::string& id) const {
  for (const CameraGroundTruth& cam : cameras) {
    if (cam.id == id) return cam;
  }
  throw_error(ErrorCode::InvalidArgument, "rig has no camera '" + id + "'");
}

std::map<std::string, CameraIntrinsics> RigGroundTruth::intrinsics_map() const {
  std::map<std::string, CameraIntrinsics> out;
  for (const CameraGroundTruth& cam : cameras) out[cam.id] = cam.intrinsics;
  return out;
}

std::map<std::string, Pose> RigGroundTruth::camera_pose_map() const {
  std::map<std::string, Pose> out;
  for (const CameraGroundTruth& cam : cameras) out[cam.id] = cam.pose;
  return out;
}

void NoiseModel::validate() const {
  if (pixel_sigma < 0.0 || lidar_sigma < 0.0) {
    throw_error(ErrorCode::InvalidArgument, "noise sigmas must be non-negative");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw_error(ErrorCode::InvalidArgument, "dropout rate must be in [0, 1)");
  }
}

RigGroundTruth default_rig() {
  RigGroundTruth rig;

  const char* names[8] = {"front",      "front_left", "left",  "rear_left",
                          "rear",       "rear_right", "right", "front_right"};
  const Mat3 base = camera_base_orientation();
  for (int i = 0; i < 8; ++i) {
    CameraGroundTruth cam;
    cam.id = names[i];
    const double yaw = 45.0 * i * kDeg;

    // roof line, approximated by an ellipse around the cabin
    const Vec3 position(0.95 + 1.15 * std::cos(yaw), 0.55 * std::sin(yaw), 1.45);
    cam.pose = Pose(Rotation::from_matrix(Rotation::exp(Vec3(0, 0, yaw)).matrix() * base),
                    position);

    const bool side = (i == 2 || i == 6);  // wider lenses on the side cameras
    CameraIntrinsics intr;
    intr.xi = side ? 0.85 + 0.01 * (i == 6) : 0.70 + 0.01 * i;
    const double pinhole_focal = (side ? 795.0 : 1022.0) + 3.0 * i;
    intr.fx = pinhole_focal * (1.0 + intr.xi);
    intr.fy = intr.fx - 5.0 - i;
    intr.cx = 797.0 + 1.5 * i;
    intr.cy = 597.0 + 1.0 * i;
    intr.k1 = -0.018 - 0.001 * i;
    intr.k2 = 0.003 + 0.0004 * i;
    intr.p1 = (1.5 + 0.2 * i) * 1e-4;
    intr.p2 = (-1.2 + 0.15 * i) * 1e-4;
    intr.width = 1600;
    intr.height = 1200;
    cam.intrinsics = intr;
    rig.cameras.push_back(std::move(cam));
  }

  struct LidarSpec {
    const char* id;
    double x, y, yaw_deg;
  };
  const LidarSpec lidar_specs[6] = {
      {"front_left", 2.30, 0.60, 45.0},   {"front_center", 2.45, 0.00, 0.0},
      {"front_right", 2.30, -0.60, -45.0}, {"rear_left", -0.55, 0.60, 135.0},
      {"rear_center", -0.70, 0.00, 180.0}, {"rear_right", -0.55, -0.60, -135.0}};
  for (const LidarSpec& spec : lidar_specs) {
    LidarGroundTruth lidar;
    lidar.id = spec.id;
    lidar.pose =
        Pose(Rotation::exp(Vec3(0, 0, spec.yaw_deg * kDeg)), Vec3(spec.x, spec.y, 0.45));
    rig.lidars.push_back(std::move(lidar));
  }
  return rig;
}

namespace {

// Board pose whose grid center sits at `center` with the board normal
// facing `toward`, tilted by pitch/roll about the in-plane axes.
Pose board_pose_facing(const CheckerboardSpec& spec, const Vec3& center, const Vec3& toward,
                       double pitch, double roll) {
  const Vec3 z = (toward - center).normalized();
  const Vec3 x = Vec3(0, 0, 1).cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 base;
  base.col(0) = x;
  base.col(1) = y;
  base.col(2) = z;
  const Rotation rot = Rotation::from_matrix(base) * Rotation::exp(Vec3(pitch, 0, 0)) *
                       Rotation::exp(Vec3(0, roll, 0));
  const Vec3 half_extent(0.5 * (spec.inner_cols - 1) * spec.square_size,
                         0.5 * (spec.inner_rows - 1) * spec.square_size, 0.0);
  return Pose(rot, center - rot * half_extent);
}

}  // namespace

CapturePlan default_capture_plan() {
  const CheckerboardSpec spec;
  CapturePlan plan;
  const Vec3 rig_center(0.95, 0.0, 0.0);

  auto add = [&](double bearing_deg, double radius, double height, double pitch_deg,
                 double roll_deg) {
    const double bearing = bearing_deg * kDeg;
    const Vec3 direction(std::cos(bearing), std::sin(bearing), 0.0);
    const Vec3 center = rig_center + radius * direction + Vec3(0, 0, height);
    const Vec3 toward = rig_center + Vec3(0, 0, height);
    plan.board_poses.push_back(
        board_pose_facing(spec, center, toward, pitch_deg * kDeg, roll_deg * kDeg));
  };

  // Dense ring on the bisector bearings between adjacent cameras: every
  // placement lands in both fields of view, which is what pins the
  // relative poses. Tilted boards only; near-frontoparallel views carry a
  // pose ambiguity.
  const double shared_heights[3] = {0.70, 1.05, 1.40};
  const double shared_tilts[4][2] = {{18, 0}, {0, 18}, {-15, 10}, {20, -12}};
  for (int pair = 0; pair < 8; ++pair) {
    const double bearing = 22.5 + 45.0 * pair;
    const double shared_radii[3] = {4.8, 4.2, 3.7};
    for (int k = 0; k < 24; ++k) {
      add(bearing, shared_radii[k % 3], shared_heights[(k / 3) % 3], shared_tilts[k % 4][0],
          shared_tilts[k % 4][1]);
    }
  }

  // On-axis ring for per-camera coverage; the low boards also cross the
  // scanner layers for the lidar registration stage.
  const double axis_heights[3] = {0.55, 0.95, 1.35};
  const double axis_tilts[6][2] = {{20, 0}, {0, 20}, {-15, -10}, {15, 10}, {-20, 5}, {10, -15}};
  for (int cam = 0; cam < 8; ++cam) {
    const double bearing = 45.0 * cam;
    for (int k = 0; k < 6; ++k) {
      add(bearing, 3.6, axis_heights[k % 3], axis_tilts[k][0], axis_tilts[k][1]);
    }
  }
  return plan;
}

SimulatedCaptures simulate_captures(const RigGroundTruth& rig, const CapturePlan& plan,
                                    const CheckerboardSpec& spec, const NoiseModel& noise) {
  spec.validate();
  noise.validate();
  const std::vector<Vec3> grid = board_points(spec);

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> pixel_noise(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SimulatedCaptures out;
  out.board_poses = plan.board_poses;

  for (std::size_t capture = 0; capture < plan.board_poses.size(); ++capture) {
    for (const CameraGroundTruth& cam : rig.cameras) {
      const Pose board_in_camera = cam.pose.inverse() * plan.board_poses[capture];

      bool fully_visible = true;
      std::vector<Vec2> pixels(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec3 q = board_in_camera * grid[i];
        if (!projectable(cam.intrinsics, q)) {
          fully_visible = false;
          break;
        }
        pixels[i] = project(cam.intrinsics, q);
        if (!cam.intrinsics.in_image(pixels[i])) {
          fully_visible = false;
          break;
        }
      }
      if (!fully_visible) continue;

      ViewObservation view;
      view.camera_id = cam.id;
      view.capture_index = static_cast<std::int64_t>(capture);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        Vec2 px = pixels[i];
        if (noise.pixel_sigma > 0.0) {
          px += noise.pixel_sigma * Vec2(pixel_noise(rng), pixel_noise(rng));
        }
        if (noise.dropout_rate > 0.0 && uniform(rng) < noise.dropout_rate) continue;
        if (!cam.intrinsics.in_image(px)) continue;  // noise pushed it off the sensor
        view.corners.push_back({static_cast<int>(i), px});
      }
      if (view.corners.size() >= 4) out.views.push_back(std::move(view));
    }
  }
  return out;
}

std::map<std::string, std::vector<LidarPoint>> simulate_lidar_board(
    const RigGroundTruth& rig, const Pose& board_pose_vehicle, const CheckerboardSpec& spec,
    const NoiseModel& noise) {
  spec.validate();
  noise.validate();

  constexpr double kMaxRange = 200.0;
  constexpr double kMinRange = 0.3;
  constexpr double kHalfFov = 55.0;       // degrees
  constexpr double kAzimuthStep = 0.125;  // degrees
  const double layers[4] = {-1.2, -0.4, 0.4, 1.2};  // degrees

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> range_noise(0.0, 1.0);

  // physical board rectangle: inner grid plus a one-square border
  const double x_min = -spec.square_size;
  const double x_max = spec.inner_cols * spec.square_size;
  const double y_min = -spec.square_size;
  const double y_max = spec.inner_rows * spec.square_size;

  std::map<std::string, std::vector<LidarPoint>> out;
  for (const LidarGroundTruth& lidar : rig.lidars) {
    std::vector<LidarPoint>& points = out[lidar.id];
    const Pose board_in_lidar = lidar.pose.inverse() * board_pose_vehicle;
    const Pose lidar_from_board = board_in_lidar.inverse();
    const Vec3 normal = board_in_lidar.rotation() * Vec3(0, 0, 1);
    const double plane_d = -normal.dot(board_in_lidar.translation());

    for (int layer_index = 0; layer_index < 4; ++layer_index) {
      const double elevation = layers[layer_index] * kDeg;
      for (double azimuth_deg = -kHalfFov; azimuth_deg <= kHalfFov + 1e-9;
           azimuth_deg += kAzimuthStep) {
        const double azimuth = azimuth_deg * kDeg;
        const Vec3 dir(std::cos(elevation) * std::cos(azimuth),
                       std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
        const double denom = normal.dot(dir);
        if (std::abs(denom) < 1e-12) continue;
        const double range = -plane_d / denom;
        if (range < kMinRange || range > kMaxRange) continue;
        const Vec3 local = lidar_from_board * (range * dir);
        if (local.x() < x_min || local.x() > x_max || local.y() < y_min ||
            local.y() > y_max) {
          continue;
        }
        double measured = range;
        if (noise.lidar_sigma > 0.0) measured += noise.lidar_sigma * range_noise(rng);
        points.push_back({lidar.pose * (measured * dir), layer_index});
      }
    }
  }
  return out;
}

ScenarioPaths export_scenario(const RigGroundTruth& rig, const CapturePlan& plan,
                              const CheckerboardSpec& spec, const NoiseModel& noise,
                              const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  fs::create_directories(out_dir / "clouds", ec);
  if (ec) {
    throw_error(ErrorCode::IoFailure, "cannot create '" + out_dir.string() + "'");
  }

  ScenarioPaths paths;
  paths.observations = out_dir / "observations.csv";
  paths.cloud_dir = out_dir / "clouds";
  paths.stream_index = out_dir / "streams.csv";
  paths.ground_truth = out_dir / "ground_truth.json";

  const SimulatedCaptures captures = simulate_captures(rig, plan, spec, noise);
  io::write_observations(paths.observations, captures.views);

  for (std::size_t i = 0; i < plan.board_poses.size(); ++i) {
    const auto clouds = simulate_lidar_board(
        rig, plan.board_poses[i], spec,
        noise.with_seed(noise.seed + 0x9e3779b97f4a7c15ULL * (i + 1)));
    std::vector<io::CloudPoint> merged;
    for (const auto& [id, pts] : clouds) {
      for (const LidarPoint& p : pts) merged.push_back({p.point, p.layer});
    }
    char name[32];
    std::snprintf(name, sizeof(name), "cloud_%06zu.csv", i);
    io::write_cloud(paths.cloud_dir / name, merged);
  }

  // one capture per second; cameras at 30 Hz, scanners at 12.5 Hz
  const std::int64_t duration_us =
      static_cast<std::int64_t>(plan.board_poses.size()) * 1000000;
  std::vector<StreamLog> streams;
  for (const CameraGroundTruth& cam : rig.cameras) {
    StreamLog log;
    log.stream_id = "camera:" + cam.id;
    log.kind = SensorKind::Camera;
    for (std::int64_t k = 0;; ++k) {
      const Timestamp t = std::llround(static_cast<double>(k) * 1e6 / 30.0);
      if (t >= duration_us) break;
      char payload[64];
      std::snprintf(payload, sizeof(payload), "frames/%s/%06lld", cam.id.c_str(),
                    static_cast<long long>(k));
      log.records.push_back({t, payload});
    }
    streams.push_back(std::move(log));
  }
  for (const LidarGroundTruth& lidar : rig.lidars) {
    StreamLog log;
    log.stream_id = "lidar:" + lidar.id;
    log.kind = SensorKind::Lidar;
    for (std::int64_t k = 0; k * 80000 < duration_us; ++k) {
      char payload[64];
      std::snprintf(payload, sizeof(payload), "scans/%s/%06lld", lidar.id.c_str(),
                    static_cast<long long>(k));
      log.records.push_back({k * 80000, payload});
    }
    streams.push_back(std::move(log));
  }
  io::write_stream_index(paths.stream_index, streams);

  // ground-truth sidecar for test harnesses; mirrors the calibration
  // document layout and is explicitly marked as simulation output
  io::json truth;
  truth["format"] = "rigcal_ground_truth";
  truth["version"] = 1;
  truth["simulation"] = true;
  truth["reference_camera"] = rig.cameras.front().id;
  for (const CameraGroundTruth& cam : rig.cameras) {
    truth["cameras"][cam.id]["intrinsics"] = io::intrinsics_to_json(cam.intrinsics);
    truth["cameras"][cam.id]["pose"] = io::pose_to_json(cam.pose);
  }
  for (const LidarGroundTruth& lidar : rig.lidars) {
    truth["lidars"][lidar.id]["pose"] = io::pose_to_json(lidar.pose);
  }
  truth["board"] = {{"inner_rows", spec.inner_rows},
                    {"inner_cols", spec.inner_cols},
                    {"square_size", spec.square_size}};
  truth["captures"] = io::json::array();
  for (std::size_t i = 0; i < plan.board_poses.size(); ++i) {
    truth["captures"].push_back(io::json{
        {"capture_index", i},
        {"timestamp_us", static_cast<std::int64_t>(i) * 1000000},
        {"board_pose", io::pose_to_json(plan.board_poses[i])}});
  }
  truth["noise"] = {{"pixel_sigma", noise.pixel_sigma},
                    {"lidar_sigma", noise.lidar_sigma},
                    {"dropout_rate", noise.dropout_rate},
                    {"seed", noise.seed}};

  std::ofstream out(paths.ground_truth);
  if (!out) {
    throw_error(ErrorCode::IoFailure, "cannot write '" + paths.ground_truth.string() + "'");
  }
  out << truth.dump(2) << "\n";
  return paths;
}

}  // namespace rigcal
