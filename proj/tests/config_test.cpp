#include <gtest/gtest.h>

#include <map>

#include "mpignite/config.hpp"

using namespace mpignite;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](std::string_view name) -> std::optional<std::string> {
    auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = env_of({});

std::string usage_message(const std::vector<std::string>& args, const EnvLookup& env = kNoEnv) {
  try {
    parse_config(args, env);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
    return e.what();
  }
  ADD_FAILURE() << "expected a usage error";
  return {};
}

}  // namespace

TEST(Config, WorkerWithEphemeralListen) {
  const auto cfg = parse_config({"worker", "--master", "127.0.0.1:7077", "--listen", "0.0.0.0:0"}, kNoEnv);
  EXPECT_EQ(cfg.role, Role::kWorker);
  EXPECT_EQ(cfg.master, (Address{"127.0.0.1", 7077}));
  EXPECT_EQ(cfg.listen, (Address{"0.0.0.0", 0}));
}

TEST(Config, RoutingFromEnvironment) {
  const auto cfg = parse_config({"run", "ring", "-n", "4"}, env_of({{"MPIGNITE_ROUTING", "relay"}}));
  EXPECT_EQ(cfg.routing, RoutingMode::kMasterRelay);
}

TEST(Config, FlagBeatsEnvironmentBeatsDefault) {
  EXPECT_EQ(parse_config({"run", "ring", "-n", "4"}, kNoEnv).routing, RoutingMode::kP2P);
  const auto env = env_of({{"MPIGNITE_ROUTING", "relay"}, {"MPIGNITE_MODE", "cluster"},
                           {"MPIGNITE_WORKERS", "5"}, {"MPIGNITE_LOG_LEVEL", "debug"}});
  auto cfg = parse_config({"run", "ring", "-n", "4", "--routing", "p2p", "--mode", "local"}, env);
  EXPECT_EQ(cfg.routing, RoutingMode::kP2P);
  EXPECT_EQ(cfg.mode, Mode::kLocal);
  EXPECT_EQ(cfg.workers, 5u);
  EXPECT_EQ(cfg.log_level, "debug");
  cfg = parse_config({"run", "ring", "-n", "4"}, env);
  EXPECT_EQ(cfg.mode, Mode::kCluster);
}

TEST(Config, RunDefaults) {
  const auto cfg = parse_config({"run", "matvec", "-n", "8"}, kNoEnv);
  EXPECT_EQ(cfg.role, Role::kRun);
  EXPECT_EQ(cfg.example, "matvec");
  EXPECT_EQ(cfg.n, 8u);
  EXPECT_EQ(cfg.mode, Mode::kLocal);
  EXPECT_EQ(cfg.workers, 3u);
  EXPECT_EQ(cfg.log_level, "warn");
  EXPECT_FALSE(cfg.delay_ms.has_value());
}

TEST(Config, MasterRole) {
  const auto cfg = parse_config(
      {"master", "ring", "-n", "16", "--workers", "2", "--listen", "127.0.0.1:7077", "--routing", "relay"},
      kNoEnv);
  EXPECT_EQ(cfg.role, Role::kMaster);
  EXPECT_EQ(cfg.workers, 2u);
  EXPECT_EQ(cfg.listen.port, 7077);
  EXPECT_EQ(cfg.routing, RoutingMode::kMasterRelay);
}

TEST(Config, UsageErrorsCarryHelp) {
  EXPECT_NE(usage_message({"run", "ring", "-n", "0"}).find("Usage"), std::string::npos);
  usage_message({"run", "ring"});
  usage_message({"run", "ring", "-n", "x"});
  usage_message({"run", "ring", "-n", "4", "--bogus"});
  usage_message({"run", "fft", "-n", "4"});
  usage_message({"run", "ring", "-n", "4", "--mode", "cloud"});
  usage_message({"run", "ring", "-n", "4", "--routing", "smoke-signals"});
  usage_message({"run", "ring", "-n", "4", "--workers", "0"});
  usage_message({"run", "ring", "-n", "4", "--log-level", "loud"});
  usage_message({"worker"});
  usage_message({"worker", "--master", "nowhere"});
  usage_message({});
  usage_message({"dance"});
  usage_message({"run", "ring", "-n", "4"}, env_of({{"MPIGNITE_ROUTING", "sideways"}}));
}

TEST(Config, WorkerMasterFromEnvironment) {
  const auto cfg = parse_config({"worker"}, env_of({{"MPIGNITE_MASTER", "10.1.2.3:9000"}}));
  EXPECT_EQ(cfg.master, (Address{"10.1.2.3", 9000}));
}

TEST(Config, HelpIsNotAnError) {
  EXPECT_THROW(parse_config({"--help"}, kNoEnv), HelpRequested);
  try {
    parse_config({"run", "--help"}, kNoEnv);
    FAIL();
  } catch (const HelpRequested& h) {
    EXPECT_NE(std::string(h.what()).find("--routing"), std::string::npos);
  }
}
