// mpignite: launcher for the bundled examples and the master/worker roles.
//
//   mpignite run ring -n 16 [--mode local|cluster] [--routing p2p|relay]
//   mpignite master matvec -n 8 --workers 2 [--listen host:port]
//   mpignite worker --master host:port [--listen host:port]
//
// Results go to stdout, logs to stderr. Exit codes: 0 success, 1 job
// failure, 2 usage error.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <iostream>

#include "mpignite/cluster.hpp"
#include "mpignite/config.hpp"
#include "mpignite/examples.hpp"
#include "mpignite/log.hpp"

extern char** environ;

namespace {

using namespace mpignite;

constexpr int kExitOk = 0;
constexpr int kExitJobFailure = 1;
constexpr int kExitUsage = 2;

void print_results(const examples::ExampleRun& run) {
  std::cout << "results: [";
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    std::cout << (i ? ", " : "") << to_display(run.results[i]);
  }
  std::cout << "]\n" << run.summary << "\n";
  std::cout.flush();
}

std::optional<Payload> parameter_of(const LaunchConfig& cfg) {
  if (cfg.delay_ms) return encode_as<std::int32_t>(*cfg.delay_ms);
  return std::nullopt;
}

int run_on(Backend& backend, const LaunchConfig& cfg) {
  auto run = examples::run_example(backend, cfg.example, cfg.n, cfg.routing, parameter_of(cfg));
  print_results(run);
  return kExitOk;
}

std::vector<pid_t> spawn_workers(const LaunchConfig& cfg, const Address& master) {
  std::vector<pid_t> pids;
  const std::string self = "/proc/self/exe";
  for (std::uint32_t i = 0; i < cfg.workers; ++i) {
    std::vector<std::string> args{"mpignite", "worker", "--master", master.to_string(),
                                  "--listen", "127.0.0.1:0", "--log-level", cfg.log_level};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, self.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw Error(ErrorCode::kTransportFailure, "could not start worker process");
    }
    pids.push_back(pid);
  }
  return pids;
}

int reap(const std::vector<pid_t>& pids) {
  int worst = 0;
  for (pid_t pid : pids) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) worst = 1;
  }
  return worst;
}

int run_cluster(const LaunchConfig& cfg) {
  examples::check_process_count(cfg.example, cfg.n);
  Master master(examples::builtin_registry(), MasterOptions{cfg.listen});
  const auto pids = spawn_workers(cfg, master.address());
  int code = kExitOk;
  try {
    master.wait_for_workers(cfg.workers, std::chrono::seconds(30));
    code = run_on(master, cfg);
  } catch (...) {
    master.shutdown();
    reap(pids);
    throw;
  }
  master.shutdown();
  if (reap(pids) != 0) log::warn("event=worker-exit-nonzero");
  return code;
}

int serve_master(const LaunchConfig& cfg) {
  examples::check_process_count(cfg.example, cfg.n);
  Master master(examples::builtin_registry(), MasterOptions{cfg.listen});
  std::cerr << "master listening on " << master.address().to_string() << std::endl;
  master.wait_for_workers(cfg.workers, std::chrono::minutes(10));
  int code = kExitOk;
  try {
    code = run_on(master, cfg);
  } catch (...) {
    master.shutdown();
    throw;
  }
  master.shutdown();
  return code;
}

int serve_worker(const LaunchConfig& cfg) {
  Worker worker(examples::builtin_registry(), WorkerOptions{*cfg.master, cfg.listen});
  return worker.run();
}

int dispatch(const LaunchConfig& cfg) {
  log::set_level(cfg.log_level);
  switch (cfg.role) {
    case Role::kWorker:
      log::set_role("worker");
      return serve_worker(cfg);
    case Role::kMaster:
      log::set_role("master");
      return serve_master(cfg);
    case Role::kRun:
      if (cfg.mode == Mode::kCluster) {
        log::set_role("master");
        return run_cluster(cfg);
      }
      log::set_role("driver");
      {
        LocalBackend backend;
        return run_on(backend, cfg);
      }
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(parse_config(args, process_env));
  } catch (const HelpRequested& h) {
    std::cout << h.what();
    return kExitOk;
  } catch (const JobFailure& f) {
    std::cerr << "error: " << f.what() << "\n";
    for (const auto& r : f.failures()) {
      std::cerr << "  rank " << r.rank << ": " << to_string(r.code) << ": " << r.message << "\n";
    }
    return kExitJobFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kUsage ? kExitUsage : kExitJobFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitJobFailure;
  }
}
