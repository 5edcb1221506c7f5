#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpignite/error.hpp"
#include "mpignite/wire.hpp"

namespace mpignite {

enum class Role { kMaster, kWorker, kRun };
enum class Mode { kLocal, kCluster };

std::string_view to_string(Role r);
std::string_view to_string(Mode m);

struct LaunchConfig {
  Role role = Role::kRun;
  std::optional<Address> master;
  Address listen{"127.0.0.1", 0};
  std::string example;
  std::uint32_t n = 0;
  Mode mode = Mode::kLocal;
  RoutingMode routing = RoutingMode::kP2P;
  std::string log_level = "warn";
  // Cluster size: workers spawned by `run --mode cluster`, or awaited by
  // `master`.
  std::uint32_t workers = 3;
  // Delay of the evenodd responders, in milliseconds.
  std::optional<std::int32_t> delay_ms;
};

/// Raised for `--help`; carries the text to print.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;

// Reads the real process environment.
std::optional<std::string> process_env(std::string_view name);

// args excludes the program name. Precedence: flags, then MPIGNITE_*
// environment variables, then defaults. Usage errors (kUsage) carry the
// relevant help text.
LaunchConfig parse_config(const std::vector<std::string>& args, const EnvLookup& env);

}  // namespace mpignite
