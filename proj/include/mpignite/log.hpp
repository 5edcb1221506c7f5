#pragma once

// Structured log lines on stderr: timestamp, level, role, rank, event.

#include <optional>
#include <string>
#include <string_view>

#include <spdlog/spdlog.h>

namespace mpignite::log {

// Role and rank are per thread; logical processes set their rank on entry.
void set_role(std::string_view role);
void set_rank(std::optional<std::uint32_t> rank);
void set_level(std::string_view level);  // trace|debug|info|warn|error|off

std::string prefix();

spdlog::logger& logger();

template <class... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  auto& l = logger();
  if (l.should_log(spdlog::level::debug)) {
    l.debug("{} {}", prefix(), fmt::format(f, std::forward<Args>(args)...));
  }
}

template <class... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  auto& l = logger();
  if (l.should_log(spdlog::level::info)) {
    l.info("{} {}", prefix(), fmt::format(f, std::forward<Args>(args)...));
  }
}

template <class... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
  auto& l = logger();
  if (l.should_log(spdlog::level::warn)) {
    l.warn("{} {}", prefix(), fmt::format(f, std::forward<Args>(args)...));
  }
}

template <class... Args>
void error(fmt::format_string<Args...> f, Args&&... args) {
  auto& l = logger();
  if (l.should_log(spdlog::level::err)) {
    l.error("{} {}", prefix(), fmt::format(f, std::forward<Args>(args)...));
  }
}

}  // namespace mpignite::log
