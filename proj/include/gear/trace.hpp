#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "gear/annotation.hpp"
#include "gear/orchestrator.hpp"
#include "gear/wire.hpp"

namespace gear {

inline constexpr int kTraceVersion = 1;

/// First line of every trace file.
struct TraceHeader {
  int version = kTraceVersion;
  std::string producer;  // "run-sim", "serve"
  nlohmann::json plan;   // full plan document, so custom plans replay too
  std::uint64_t seed = 0;
  OrchestratorConfig orchestrator;
  std::int64_t session_start_us = 0;
  std::vector<IntendedLabel> annotations;
  /// Producer settings kept for reference (sim config, script); not needed
  /// to replay.
  nlohmann::json extra = nlohmann::json::object();

  std::string plan_id() const;
};

enum class Direction { In, Out };

struct TraceRecord {
  std::int64_t t_us = 0;  // arrival time at the gateway
  Direction dir = Direction::In;
  std::string channel;  // sender for inbound, "engine" for outbound
  WireMessage msg;

  bool operator==(const TraceRecord&) const = default;
};

nlohmann::json header_to_json(const TraceHeader& h);
TraceHeader header_from_json(const nlohmann::json& j);
std::string encode_record(const TraceRecord& r);

/// Appends one JSON line per record and flushes, so a crashed session leaves
/// a readable (truncated) trace.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const TraceHeader& header);

  void append(const TraceRecord& record);

 private:
  std::ostream& out_;
  std::int64_t last_t_us_ = 0;
};

struct TraceContents {
  TraceHeader header;
  std::vector<TraceRecord> records;
  /// Reading stopped at an unparsable line (typically a partial last line).
  bool truncated = false;
  std::size_t truncated_at_line = 0;
};

/// Throws InputError when the header is missing or invalid.
TraceContents read_trace(std::istream& in);
TraceContents read_trace_file(const std::string& path);

}  // namespace gear
