#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gear/assembly.hpp"
#include "gear/config.hpp"
#include "gear/orchestrator.hpp"

namespace gear {

struct GatewayOptions {
  AssemblyPlan plan;
  AppConfig config;
  std::uint64_t seed = 0;
  /// Trace destination; empty disables tracing.
  std::string trace_path;
  /// Drive the simulated robot and cameras from the gateway clock. Disable
  /// when every input comes from connected clients.
  bool simulate = true;
  /// Simulated person at the bench who assembles delivered parts.
  bool auto_assemble = true;
};

/// Live endpoint: raw TCP and WebSocket connections carrying
/// newline-delimited JSON, funnelled into one orchestrator on a single
/// event-loop thread. Port 0 binds an ephemeral port.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds both listeners and starts the event-loop thread. Throws
  /// InputError when a port cannot be bound.
  void start();
  /// Closes listeners and connections and joins the loop. Idempotent.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

  std::vector<EventLogRecord> event_log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gear
