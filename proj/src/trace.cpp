#include "gear/trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "gear/codec.hpp"
#include "gear/errors.hpp"

namespace gear {

using nlohmann::json;

std::string TraceHeader::plan_id() const { return plan.value("plan_id", std::string()); }

json header_to_json(const TraceHeader& h) {
  return {{"trace", "gear"},
          {"version", h.version},
          {"producer", h.producer},
          {"plan_id", h.plan_id()},
          {"plan", h.plan},
          {"seed", h.seed},
          {"stream_config", h.orchestrator.stream},
          {"orchestrator", h.orchestrator},
          {"session_start_us", h.session_start_us},
          {"annotations", h.annotations},
          {"extra", h.extra}};
}

TraceHeader header_from_json(const json& j) {
  if (!j.is_object() || j.value("trace", std::string()) != "gear") {
    throw InputError("trace: first line is not a trace header");
  }
  try {
    TraceHeader h;
    h.version = j.at("version").get<int>();
    if (h.version != kTraceVersion) {
      throw InputError("trace: unsupported version " + std::to_string(h.version));
    }
    h.producer = j.at("producer").get<std::string>();
    h.plan = j.at("plan");
    h.seed = j.at("seed").get<std::uint64_t>();
    h.orchestrator = j.at("orchestrator").get<OrchestratorConfig>();
    h.orchestrator.stream = j.at("stream_config").get<StreamConfig>();
    h.session_start_us = j.at("session_start_us").get<std::int64_t>();
    h.annotations = j.at("annotations").get<std::vector<IntendedLabel>>();
    h.extra = j.value("extra", json::object());
    return h;
  } catch (const json::exception& e) {
    throw InputError(std::string("trace header: ") + e.what());
  }
}

std::string encode_record(const TraceRecord& r) {
  return json{{"t_us", r.t_us},
              {"dir", r.dir == Direction::In ? "in" : "out"},
              {"channel", r.channel},
              {"msg", json::parse(encode(r.msg))}}
      .dump();
}

TraceWriter::TraceWriter(std::ostream& out, const TraceHeader& header) : out_(out) {
  out_ << header_to_json(header).dump() << '\n';
  out_.flush();
}

void TraceWriter::append(const TraceRecord& record) {
  // Timestamps never run backwards in a trace.
  TraceRecord r = record;
  r.t_us = std::max(r.t_us, last_t_us_);
  last_t_us_ = r.t_us;
  out_ << encode_record(r) << '\n';
  out_.flush();
}

TraceContents read_trace(std::istream& in) {
  TraceContents contents;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw InputError("trace: missing header");
  try {
    contents.header = header_from_json(json::parse(line));
  } catch (const json::parse_error&) {
    throw InputError("trace: header is not valid JSON");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TraceRecord r;
      r.t_us = j.at("t_us").get<std::int64_t>();
      const auto dir = j.at("dir").get<std::string>();
      if (dir != "in" && dir != "out") throw ProtocolError("bad direction");
      r.dir = dir == "in" ? Direction::In : Direction::Out;
      r.channel = j.at("channel").get<std::string>();
      r.msg = decode(j.at("msg").dump());
      contents.records.push_back(std::move(r));
    } catch (const std::exception&) {
      contents.truncated = true;
      contents.truncated_at_line = line_no;
      break;
    }
  }
  return contents;
}

TraceContents read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace file '" + path + "'");
  return read_trace(in);
}

}  // namespace gear
