#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <string>

#ifndef MPIGNITE_CLI_PATH
#error "MPIGNITE_CLI_PATH must point at the mpignite executable"
#endif

namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(MPIGNITE_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
  const int status = pclose(pipe);
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

}  // namespace

TEST(Cli, MatvecLocal) {
  const auto o = run_cli("run matvec -n 8 --mode local --routing p2p");
  EXPECT_EQ(o.exit_code, 0);
  EXPECT_EQ(o.out, "results: [14, 32, 50, 0, 0, 0, 0, 0]\nmatvec: n=8 sum=96\n");
}

TEST(Cli, RingOnProcessClusterWithRelay) {
  const auto o = run_cli("run ring -n 16 --mode cluster --routing relay --workers 3");
  EXPECT_EQ(o.exit_code, 0);
  EXPECT_NE(o.out.find("ring: n=16 token=15"), std::string::npos) << o.out;
}

TEST(Cli, ClusterAndLocalPrintTheSameLines) {
  for (const char* ex : {"matvec2d -n 9", "evenodd -n 6 --delay-ms 5"}) {
    const auto local = run_cli(std::string("run ") + ex);
    const auto cluster = run_cli(std::string("run ") + ex + " --mode cluster --workers 2");
    EXPECT_EQ(local.exit_code, 0);
    EXPECT_EQ(cluster.exit_code, 0);
    EXPECT_EQ(local.out, cluster.out);
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("run matvec2d -n 8").exit_code, 2);
  EXPECT_EQ(run_cli("run ring -n 0").exit_code, 2);
  EXPECT_EQ(run_cli("run ring").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto o = run_cli("--help");
  EXPECT_EQ(o.exit_code, 0);
  EXPECT_NE(o.out.find("run"), std::string::npos);
}

TEST(Cli, StandaloneMasterAndWorkers) {
  // Workers retry their connect, so they may start before the master listens.
  const std::string port = "47" + std::to_string(100 + getpid() % 800);
  const std::string master = "127.0.0.1:" + port;
  const std::string cmd = std::string(MPIGNITE_CLI_PATH) + " master ring -n 6 --workers 2 --listen " +
                          master + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  const std::string worker = std::string(MPIGNITE_CLI_PATH) + " worker --master " + master + " 2>/dev/null";
  FILE* w1 = popen(worker.c_str(), "r");
  FILE* w2 = popen(worker.c_str(), "r");
  std::string out;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  const int s1 = pclose(w1);
  const int s2 = pclose(w2);
  EXPECT_EQ(WEXITSTATUS(status), 0);
  EXPECT_EQ(WEXITSTATUS(s1), 0);
  EXPECT_EQ(WEXITSTATUS(s2), 0);
  EXPECT_NE(out.find("ring: n=6 token=5"), std::string::npos) << out;
}
