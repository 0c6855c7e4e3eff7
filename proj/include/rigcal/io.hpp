#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigcal/camera.hpp"
#include "rigcal/geometry.hpp"
#include "rigcal/lidar_camera.hpp"
#include "rigcal/surround.hpp"
#include "rigcal/sync.hpp"

namespace rigcal::io {

using json = nlohmann::json;

json pose_to_json(const Pose& pose);
Pose pose_from_json(const json& j);
json intrinsics_to_json(const CameraIntrinsics& intr);
CameraIntrinsics intrinsics_from_json(const json& j);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex characters. Used for
/// input provenance fingerprints.
std::string fnv1a64_hex(const std::filesystem::path& path);

/// Corner observation file: `capture_index,camera_id,corner_id,u,v` rows
/// under a versioned header. Values round-trip at full precision.
void write_observations(const std::filesystem::path& path,
                        const std::vector<ViewObservation>& views);
std::vector<ViewObservation> read_observations(const std::filesystem::path& path);

struct CloudPoint {
  Vec3 point = Vec3::Zero();  // vehicle frame, meters
  std::optional<int> layer;
};

/// Point cloud file: `x,y,z[,layer]` rows under a versioned header.
void write_cloud(const std::filesystem::path& path, const std::vector<CloudPoint>& points);
std::vector<CloudPoint> read_cloud(const std::filesystem::path& path);

/// Stream index file: `stream_id,timestamp_us,payload` rows under a
/// versioned header. Reading groups records by stream (sensor kind comes
/// from the id prefix before ':') and validates monotonic timestamps.
void write_stream_index(const std::filesystem::path& path,
                        const std::vector<StreamLog>& streams);
std::vector<StreamLog> read_stream_index(const std::filesystem::path& path);

struct EdgeResidual {
  std::int64_t capture_index = 0;
  std::string camera_id;
  double rms = 0.0;
  int corners = 0;
};

struct ExtrinsicMetrics {
  double final_rms = 0.0;
  double initial_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<EdgeResidual> edges;
};

struct LidarSection {
  Pose camera_to_vehicle;
  std::vector<double> per_observation_rms;
  double objective = 0.0;
  bool converged = false;
};

/// Versioned calibration result document. The document owns its JSON
/// tree, so fields this build does not know about survive a read/write
/// cycle; the typed accessors below validate the fields they touch and
/// throw ParseError when a required one is missing or malformed.
class CalibrationDocument {
 public:
  static CalibrationDocument create();
  static CalibrationDocument load(const std::filesystem::path& path);
  static CalibrationDocument from_text(const std::string& text, const std::string& origin);

  void save(const std::filesystem::path& path) const;
  /// Deterministic full-precision text form (sorted keys, two-space
  /// indent); identical documents dump byte-identically.
  std::string dump() const;

  bool has_camera_intrinsics() const;
  void set_camera_intrinsics(const std::string& camera_id, const CameraIntrinsics& intr,
                             double rms);
  std::map<std::string, CameraIntrinsics> camera_intrinsics() const;
  double intrinsic_rms(const std::string& camera_id) const;

  bool has_rig() const;
  void set_rig(const RigExtrinsics& rig);
  RigExtrinsics rig() const;

  void set_extrinsic_metrics(const ExtrinsicMetrics& metrics);
  ExtrinsicMetrics extrinsic_metrics() const;

  bool has_lidar() const;
  void set_lidar(const LidarSection& lidar);
  LidarSection lidar() const;

  /// Provenance for one pipeline stage: input digests plus the resolved
  /// configuration. The timestamp honors SOURCE_DATE_EPOCH and otherwise
  /// stays fixed so reruns stay bit-identical.
  void add_provenance(const std::string& stage,
                      const std::vector<std::filesystem::path>& inputs,
                      const json& config);

  const json& raw() const { return root_; }
  json& raw() { return root_; }

 private:
  json root_;
};

}  // namespace rigcal::io
