#include "rigcal/sync.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rigcal {

const char* sensor_kind_name(SensorKind kind) {
  switch (kind) {
    case SensorKind::Camera:
      return "camera";
    case SensorKind::Lidar:
      return "lidar";
    case SensorKind::Radar:
      return "radar";
    case SensorKind::GpsImu:
      return "gps_imu";
    case SensorKind::Can:
      return "can";
  }
  return "?";
}

SensorKind sensor_kind_from_name(const std::string& name) {
  if (name == "camera") return SensorKind::Camera;
  if (name == "lidar") return SensorKind::Lidar;
  if (name == "radar") return SensorKind::Radar;
  if (name == "gps_imu") return SensorKind::GpsImu;
  if (name == "can") return SensorKind::Can;
  throw_error(ErrorCode::ParseError, "unknown sensor kind '" + name + "'");
}

StreamLog ingest(StreamLog log) {
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (log.records[i].timestamp_us < 0) {
      throw_error(ErrorCode::NonMonotonicTimestamps,
                  "stream '" + log.stream_id + "': negative timestamp at index " +
                      std::to_string(i));
    }
    if (i > 0 && log.records[i].timestamp_us <= log.records[i - 1].timestamp_us) {
      throw_error(ErrorCode::NonMonotonicTimestamps,
                  "stream '" + log.stream_id + "': timestamp at index " + std::to_string(i) +
                      " does not increase (" + std::to_string(log.records[i].timestamp_us) +
                      " after " + std::to_string(log.records[i - 1].timestamp_us) + ")");
    }
  }
  return log;
}

NearestResult nearest(const StreamLog& log, Timestamp query) {
  if (log.records.empty()) {
    throw_error(ErrorCode::EmptyStream, "stream '" + log.stream_id + "' has no records");
  }
  const auto it = std::lower_bound(
      log.records.begin(), log.records.end(), query,
      [](const StreamRecord& r, Timestamp t) { return r.timestamp_us < t; });

  std::size_t index;
  if (it == log.records.begin()) {
    index = 0;
  } else if (it == log.records.end()) {
    index = log.records.size() - 1;
  } else {
    const std::size_t after = static_cast<std::size_t>(it - log.records.begin());
    const std::int64_t gap_after = it->timestamp_us - query;
    const std::int64_t gap_before = query - (it - 1)->timestamp_us;
    // ties go to the earlier record
    index = gap_before <= gap_after ? after - 1 : after;
  }
  return {log.records[index], log.records[index].timestamp_us - query, index};
}

AlignedBundle align(const std::vector<StreamLog>& streams, Timestamp query,
                    std::int64_t tolerance_us) {
  std::set<std::string> seen;
  AlignedBundle bundle;
  bundle.query = query;
  for (const StreamLog& log : streams) {
    if (!seen.insert(log.stream_id).second) {
      throw_error(ErrorCode::InvalidArgument, "duplicate stream id '" + log.stream_id + "'");
    }
    if (log.records.empty()) {
      bundle.streams[log.stream_id] = std::nullopt;
      continue;
    }
    const NearestResult found = nearest(log, query);
    if (std::abs(found.offset_us) <= tolerance_us) {
      bundle.streams[log.stream_id] = AlignedEntry{found.record, found.offset_us};
    } else {
      bundle.streams[log.stream_id] = std::nullopt;
    }
  }
  return bundle;
}

std::vector<AlignedBundle> resample_track(const StreamLog& log, double rate_hz,
                                          std::int64_t tolerance_us) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw_error(ErrorCode::InvalidArgument, "resample rate must be positive");
  }
  if (log.records.empty()) {
    throw_error(ErrorCode::EmptyStream, "stream '" + log.stream_id + "' has no records");
  }
  const Timestamp first = log.records.front().timestamp_us;
  const Timestamp last = log.records.back().timestamp_us;

  std::vector<AlignedBundle> bundles;
  const std::vector<StreamLog> single{log};
  for (std::int64_t k = 0;; ++k) {
    const Timestamp t = first + std::llround(static_cast<double>(k) * 1e6 / rate_hz);
    if (t > last) break;
    bundles.push_back(align(single, t, tolerance_us));
  }
  return bundles;
}

}  // namespace rigcal
