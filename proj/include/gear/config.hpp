#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "gear/orchestrator.hpp"
#include "gear/sim.hpp"

namespace gear {

/// Everything a simulated session needs besides plan, script and seed.
struct SimRunConfig {
  OrchestratorConfig orchestrator;
  SimConfig sim;
  double gaze_sigma_px = 10.0;
  /// Detection frames are rendered for both viewpoints at this period.
  std::int64_t frame_period_us = 100'000;
  /// Simulated user: delay between a part becoming available (and its
  /// prerequisites assembled) and the assembly mark.
  std::int64_t assemble_delay_us = 2'000'000;
  /// Hard stop this long after the script ends.
  std::int64_t tail_us = 60'000'000;
};

struct GatewaySettings {
  std::string host = "127.0.0.1";
  std::uint16_t tcp_port = 7420;
  std::uint16_t ws_port = 7421;
  std::string ws_path = "/gear";
  std::string static_dir;
  std::int64_t snapshot_period_us = 500'000;
};

struct AppConfig {
  SimRunConfig run;
  GatewaySettings gateway;
};

/// Applies the keys present in `document` on top of `base`. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
AppConfig apply_config(const nlohmann::json& document, AppConfig base = {});
nlohmann::json config_to_json(const AppConfig& config);

inline constexpr const char* kConfigEnvVar = "GEAR_CONFIG";

/// Resolves the config path: the explicit flag wins, then $GEAR_CONFIG, then
/// built-in defaults. Throws InputError for unreadable or invalid files.
AppConfig load_app_config(const std::optional<std::string>& explicit_path);

}  // namespace gear
