#include "rigcal/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rigcal::io {

namespace {

constexpr const char* kObservationsHeader = "# rigcal observations v1";
constexpr const char* kCloudHeader = "# rigcal cloud v1";
constexpr const char* kStreamsHeader = "# rigcal streams v1";

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& message) {
  throw_error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + message);
}

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

double parse_double(const std::string& text, const std::filesystem::path& path, int line,
                    const char* field) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    parse_fail(path, line, std::string("invalid ") + field + " '" + text + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& text, const std::filesystem::path& path, int line,
                       const char* field) {
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0') {
    parse_fail(path, line, std::string("invalid ") + field + " '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw_error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  }
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw_error(ErrorCode::IoFailure, "cannot read '" + path.string() + "'");
  }
  return in;
}

void expect_header(std::ifstream& in, const std::filesystem::path& path, const char* magic,
                   const char* columns) {
  std::string line;
  if (!std::getline(in, line) || line != magic) {
    parse_fail(path, 1, std::string("expected header '") + magic + "'");
  }
  if (!std::getline(in, line) || line != columns) {
    parse_fail(path, 2, std::string("expected column header '") + columns + "'");
  }
}

json required(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) {
    throw_error(ErrorCode::ParseError, context + ": missing required field '" + key + "'");
  }
  return j.at(key);
}

}  // namespace

json pose_to_json(const Pose& pose) {
  const Eigen::Quaterniond& q = pose.rotation().quaternion();
  return json{{"q", {q.w(), q.x(), q.y(), q.z()}},
              {"t", {pose.translation().x(), pose.translation().y(), pose.translation().z()}}};
}

Pose pose_from_json(const json& j) {
  const json q = required(j, "q", "pose");
  const json t = required(j, "t", "pose");
  if (!q.is_array() || q.size() != 4 || !t.is_array() || t.size() != 3) {
    throw_error(ErrorCode::ParseError, "pose: 'q' must have 4 and 't' 3 numbers");
  }
  return Pose(Rotation::from_quaternion(q[0], q[1], q[2], q[3]), Vec3(t[0], t[1], t[2]));
}

json intrinsics_to_json(const CameraIntrinsics& intr) {
  return json{{"xi", intr.xi}, {"fx", intr.fx}, {"fy", intr.fy},
              {"cx", intr.cx}, {"cy", intr.cy}, {"k1", intr.k1},
              {"k2", intr.k2}, {"p1", intr.p1}, {"p2", intr.p2},
              {"width", intr.width}, {"height", intr.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics intr;
  intr.xi = required(j, "xi", "intrinsics");
  intr.fx = required(j, "fx", "intrinsics");
  intr.fy = required(j, "fy", "intrinsics");
  intr.cx = required(j, "cx", "intrinsics");
  intr.cy = required(j, "cy", "intrinsics");
  intr.k1 = required(j, "k1", "intrinsics");
  intr.k2 = required(j, "k2", "intrinsics");
  intr.p1 = required(j, "p1", "intrinsics");
  intr.p2 = required(j, "p2", "intrinsics");
  intr.width = required(j, "width", "intrinsics");
  intr.height = required(j, "height", "intrinsics");
  intr.validate();
  return intr;
}

std::string fnv1a64_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw_error(ErrorCode::IoFailure, "cannot read '" + path.string() + "' for digest");
  }
  std::uint64_t hash = 14695981039346656037ULL;
  char buffer[65536];
  while (in) {
    in.read(buffer, sizeof(buffer));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016" PRIx64, hash);
  return out;
}

void write_observations(const std::filesystem::path& path,
                        const std::vector<ViewObservation>& views) {
  std::ofstream out = open_for_write(path);
  out << kObservationsHeader << "\n";
  out << "capture_index,camera_id,corner_id,u,v\n";
  for (const ViewObservation& view : views) {
    for (const CornerObservation& corner : view.corners) {
      out << view.capture_index << ',' << view.camera_id << ',' << corner.corner_id << ','
          << format_double(corner.pixel.x()) << ',' << format_double(corner.pixel.y()) << "\n";
    }
  }
  if (!out) {
    throw_error(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
  }
}

std::vector<ViewObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  expect_header(in, path, kObservationsHeader, "capture_index,camera_id,corner_id,u,v");

  // preserve first-appearance order of (capture, camera) groups
  std::vector<ViewObservation> views;
  std::map<std::pair<std::int64_t, std::string>, std::size_t> index;
  std::string line;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 5) {
      parse_fail(path, line_no, "expected 5 comma-separated fields");
    }
    const std::int64_t capture = parse_int(fields[0], path, line_no, "capture_index");
    const std::string& camera = fields[1];
    if (camera.empty()) parse_fail(path, line_no, "empty camera_id");
    const std::int64_t corner = parse_int(fields[2], path, line_no, "corner_id");
    const double u = parse_double(fields[3], path, line_no, "u");
    const double v = parse_double(fields[4], path, line_no, "v");

    const auto key = std::make_pair(capture, camera);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, views.size()).first;
      views.push_back(ViewObservation{camera, capture, {}});
    }
    views[it->second].corners.push_back({static_cast<int>(corner), Vec2(u, v)});
  }
  return views;
}

void write_cloud(const std::filesystem::path& path, const std::vector<CloudPoint>& points) {
  std::ofstream out = open_for_write(path);
  out << kCloudHeader << "\n";
  out << "x,y,z[,layer]\n";
  for (const CloudPoint& p : points) {
    out << format_double(p.point.x()) << ',' << format_double(p.point.y()) << ','
        << format_double(p.point.z());
    if (p.layer) out << ',' << *p.layer;
    out << "\n";
  }
  if (!out) {
    throw_error(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
  }
}

std::vector<CloudPoint> read_cloud(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  expect_header(in, path, kCloudHeader, "x,y,z[,layer]");
  std::vector<CloudPoint> points;
  std::string line;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 3 && fields.size() != 4) {
      parse_fail(path, line_no, "expected 3 or 4 comma-separated fields");
    }
    CloudPoint p;
    p.point = Vec3(parse_double(fields[0], path, line_no, "x"),
                   parse_double(fields[1], path, line_no, "y"),
                   parse_double(fields[2], path, line_no, "z"));
    if (fields.size() == 4) {
      p.layer = static_cast<int>(parse_int(fields[3], path, line_no, "layer"));
    }
    points.push_back(p);
  }
  return points;
}

void write_stream_index(const std::filesystem::path& path,
                        const std::vector<StreamLog>& streams) {
  std::ofstream out = open_for_write(path);
  out << kStreamsHeader << "\n";
  out << "stream_id,timestamp_us,payload\n";
  for (const StreamLog& log : streams) {
    if (log.stream_id.find(',') != std::string::npos) {
      throw_error(ErrorCode::InvalidArgument,
                  "stream id '" + log.stream_id + "' contains a comma");
    }
    for (const StreamRecord& r : log.records) {
      if (r.payload.find(',') != std::string::npos ||
          r.payload.find('\n') != std::string::npos) {
        throw_error(ErrorCode::InvalidArgument, "payload contains a delimiter");
      }
      out << log.stream_id << ',' << r.timestamp_us << ',' << r.payload << "\n";
    }
  }
  if (!out) {
    throw_error(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
  }
}

std::vector<StreamLog> read_stream_index(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  expect_header(in, path, kStreamsHeader, "stream_id,timestamp_us,payload");

  std::vector<StreamLog> streams;
  std::map<std::string, std::size_t> index;
  std::string line;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 3) {
      parse_fail(path, line_no, "expected 3 comma-separated fields");
    }
    if (fields[0].empty()) parse_fail(path, line_no, "empty stream_id");
    auto it = index.find(fields[0]);
    if (it == index.end()) {
      StreamLog log;
      log.stream_id = fields[0];
      const auto colon = fields[0].find(':');
      const std::string prefix = fields[0].substr(0, colon);
      if (prefix == "camera") {
        log.kind = SensorKind::Camera;
      } else if (prefix == "lidar") {
        log.kind = SensorKind::Lidar;
      } else if (prefix == "radar") {
        log.kind = SensorKind::Radar;
      } else if (prefix == "gps_imu") {
        log.kind = SensorKind::GpsImu;
      } else if (prefix == "can") {
        log.kind = SensorKind::Can;
      } else {
        log.kind = SensorKind::Camera;
      }
      it = index.emplace(fields[0], streams.size()).first;
      streams.push_back(std::move(log));
    }
    streams[it->second].records.push_back(
        {parse_int(fields[1], path, line_no, "timestamp_us"), fields[2]});
  }
  for (StreamLog& log : streams) log = ingest(std::move(log));
  return streams;
}

namespace {
constexpr const char* kDocumentFormat = "rigcal_calibration";
constexpr int kDocumentVersion = 1;
}  // namespace

CalibrationDocument CalibrationDocument::create() {
  CalibrationDocument doc;
  doc.root_["format"] = kDocumentFormat;
  doc.root_["version"] = kDocumentVersion;
  return doc;
}

CalibrationDocument CalibrationDocument::from_text(const std::string& text,
                                                   const std::string& origin) {
  CalibrationDocument doc;
  try {
    doc.root_ = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_error(ErrorCode::ParseError, origin + ": " + e.what());
  }
  if (!doc.root_.is_object()) {
    throw_error(ErrorCode::ParseError, origin + ": document root must be an object");
  }
  const json format = required(doc.root_, "format", origin);
  if (format != kDocumentFormat) {
    throw_error(ErrorCode::ParseError,
                origin + ": unexpected format '" + format.dump() + "'");
  }
  const json version = required(doc.root_, "version", origin);
  if (!version.is_number_integer() || version.get<int>() != kDocumentVersion) {
    throw_error(ErrorCode::ParseError, origin + ": unsupported version " + version.dump());
  }
  return doc;
}

CalibrationDocument CalibrationDocument::load(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path.string());
}

void CalibrationDocument::save(const std::filesystem::path& path) const {
  std::ofstream out = open_for_write(path);
  out << dump();
  if (!out) {
    throw_error(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
  }
}

std::string CalibrationDocument::dump() const { return root_.dump(2) + "\n"; }

bool CalibrationDocument::has_camera_intrinsics() const {
  if (!root_.contains("cameras")) return false;
  for (const auto& [id, cam] : root_.at("cameras").items()) {
    if (cam.contains("intrinsics")) return true;
  }
  return false;
}

void CalibrationDocument::set_camera_intrinsics(const std::string& camera_id,
                                                const CameraIntrinsics& intr, double rms) {
  root_["cameras"][camera_id]["intrinsics"] = intrinsics_to_json(intr);
  root_["cameras"][camera_id]["intrinsic_rms"] = rms;
}

std::map<std::string, CameraIntrinsics> CalibrationDocument::camera_intrinsics() const {
  std::map<std::string, CameraIntrinsics> out;
  const json cameras = required(root_, "cameras", "document");
  for (const auto& [id, cam] : cameras.items()) {
    out[id] = intrinsics_from_json(required(cam, "intrinsics", "camera '" + id + "'"));
  }
  return out;
}

double CalibrationDocument::intrinsic_rms(const std::string& camera_id) const {
  const json cameras = required(root_, "cameras", "document");
  if (!cameras.contains(camera_id)) {
    throw_error(ErrorCode::ParseError, "document has no camera '" + camera_id + "'");
  }
  return required(cameras.at(camera_id), "intrinsic_rms", "camera '" + camera_id + "'");
}

bool CalibrationDocument::has_rig() const { return root_.contains("reference_camera"); }

void CalibrationDocument::set_rig(const RigExtrinsics& rig) {
  rig.validate();
  root_["reference_camera"] = rig.reference_camera_id;
  for (const auto& [id, pose] : rig.camera_poses) {
    root_["cameras"][id]["pose"] = pose_to_json(pose);
  }
}

RigExtrinsics CalibrationDocument::rig() const {
  RigExtrinsics rig;
  rig.reference_camera_id = required(root_, "reference_camera", "document");
  const json cameras = required(root_, "cameras", "document");
  for (const auto& [id, cam] : cameras.items()) {
    if (cam.contains("pose")) {
      rig.camera_poses[id] = pose_from_json(cam.at("pose"));
    }
  }
  if (rig.camera_poses.empty()) {
    throw_error(ErrorCode::ParseError, "document has no camera poses");
  }
  rig.validate();
  return rig;
}

void CalibrationDocument::set_extrinsic_metrics(const ExtrinsicMetrics& metrics) {
  json edges = json::array();
  for (const EdgeResidual& e : metrics.edges) {
    edges.push_back(json{{"capture", e.capture_index},
                         {"camera", e.camera_id},
                         {"rms", e.rms},
                         {"corners", e.corners}});
  }
  root_["extrinsic"] = json{{"final_rms", metrics.final_rms},
                            {"initial_rms", metrics.initial_rms},
                            {"iterations", metrics.iterations},
                            {"converged", metrics.converged},
                            {"edges", std::move(edges)}};
}

ExtrinsicMetrics CalibrationDocument::extrinsic_metrics() const {
  const json section = required(root_, "extrinsic", "document");
  ExtrinsicMetrics metrics;
  metrics.final_rms = required(section, "final_rms", "extrinsic");
  metrics.initial_rms = required(section, "initial_rms", "extrinsic");
  metrics.iterations = required(section, "iterations", "extrinsic");
  metrics.converged = required(section, "converged", "extrinsic");
  for (const json& e : required(section, "edges", "extrinsic")) {
    metrics.edges.push_back(EdgeResidual{required(e, "capture", "edge"),
                                         required(e, "camera", "edge"),
                                         required(e, "rms", "edge"),
                                         required(e, "corners", "edge")});
  }
  return metrics;
}

bool CalibrationDocument::has_lidar() const { return root_.contains("lidar"); }

void CalibrationDocument::set_lidar(const LidarSection& lidar) {
  root_["lidar"] = json{{"camera_to_vehicle", pose_to_json(lidar.camera_to_vehicle)},
                        {"per_observation_rms", lidar.per_observation_rms},
                        {"objective", lidar.objective},
                        {"converged", lidar.converged}};
}

LidarSection CalibrationDocument::lidar() const {
  const json section = required(root_, "lidar", "document");
  LidarSection out;
  out.camera_to_vehicle =
      pose_from_json(required(section, "camera_to_vehicle", "lidar"));
  out.per_observation_rms =
      required(section, "per_observation_rms", "lidar").get<std::vector<double>>();
  out.objective = required(section, "objective", "lidar");
  out.converged = required(section, "converged", "lidar");
  return out;
}

void CalibrationDocument::add_provenance(const std::string& stage,
                                         const std::vector<std::filesystem::path>& inputs,
                                         const json& config) {
  json entry;
  entry["config"] = config;
  entry["inputs"] = json::array();
  for (const std::filesystem::path& p : inputs) {
    entry["inputs"].push_back(json{{"path", p.string()}, {"fnv1a64", fnv1a64_hex(p)}});
  }
  // wall-clock stamps would break bit-reproducible reruns
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  entry["timestamp"] = epoch ? epoch : "unset";
  root_["provenance"][stage] = std::move(entry);
}

}  // namespace rigcal::io
