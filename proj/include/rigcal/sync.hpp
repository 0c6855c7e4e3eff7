#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rigcal/errors.hpp"

namespace rigcal {

/// Microseconds since epoch. Integer arithmetic keeps nearest-record
/// tie-breaking exact.
using Timestamp = std::int64_t;

enum class SensorKind { Camera, Lidar, Radar, GpsImu, Can };

const char* sensor_kind_name(SensorKind kind);
SensorKind sensor_kind_from_name(const std::string& name);

struct StreamRecord {
  Timestamp timestamp_us = 0;
  std::string payload;  // opaque reference, e.g. a path or offset
};

/// Append-only sequence of timestamped records for one sensor stream.
/// Timestamps are strictly increasing once ingested.
struct StreamLog {
  std::string stream_id;
  SensorKind kind = SensorKind::Camera;
  std::vector<StreamRecord> records;
};

/// Validates a log: non-negative, strictly increasing timestamps. Throws
/// NonMonotonicTimestamps naming the first offending index (duplicates
/// count as violations).
StreamLog ingest(StreamLog log);

struct NearestResult {
  StreamRecord record;
  std::int64_t offset_us = 0;  // record timestamp minus query
  std::size_t index = 0;
};

/// Record minimizing |timestamp - query|; equidistant neighbors resolve to
/// the earlier record. Binary search. Throws EmptyStream.
NearestResult nearest(const StreamLog& log, Timestamp query);

struct AlignedEntry {
  StreamRecord record;
  std::int64_t offset_us = 0;
};

/// One synchronized lookup across streams: the nearest record per stream,
/// or absent when nothing lies within the tolerance.
struct AlignedBundle {
  Timestamp query = 0;
  std::map<std::string, std::optional<AlignedEntry>> streams;
};

constexpr std::int64_t kUnlimitedTolerance = std::numeric_limits<std::int64_t>::max();

/// Nearest record per stream at `query`; streams whose nearest record is
/// farther than `tolerance_us` (or which are empty) are marked absent,
/// never silently substituted.
AlignedBundle align(const std::vector<StreamLog>& streams, Timestamp query,
                    std::int64_t tolerance_us);

/// align() evaluated on a uniform grid spanning the log's time range
/// (inclusive endpoints, rate in Hz).
std::vector<AlignedBundle> resample_track(const StreamLog& log, double rate_hz,
                                          std::int64_t tolerance_us = kUnlimitedTolerance);

}  // namespace rigcal
