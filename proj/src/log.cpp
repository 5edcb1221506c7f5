#include "mpignite/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include "mpignite/error.hpp"

namespace mpignite::log {

namespace {

thread_local std::string t_role = "driver";
thread_local std::optional<std::uint32_t> t_rank;

std::shared_ptr<spdlog::logger> make_logger() {
  auto l = std::make_shared<spdlog::logger>(
      "mpignite", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  l->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
  l->set_level(spdlog::level::warn);
  return l;
}

}  // namespace

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = make_logger();
  return *instance;
}

void set_role(std::string_view role) { t_role = role; }
void set_rank(std::optional<std::uint32_t> rank) { t_rank = rank; }

void set_level(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") {
    throw Error(ErrorCode::kUsage, "unknown log level '" + std::string(level) + "'");
  }
  logger().set_level(parsed);
}

std::string prefix() {
  return "role=" + t_role + " rank=" + (t_rank ? std::to_string(*t_rank) : "-");
}

}  // namespace mpignite::log
