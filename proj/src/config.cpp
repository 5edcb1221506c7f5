#include "mpignite/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>

#include "mpignite/examples.hpp"

namespace mpignite {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kMaster: return "master";
    case Role::kWorker: return "worker";
    case Role::kRun: return "run";
  }
  return "?";
}

std::string_view to_string(Mode m) { return m == Mode::kLocal ? "local" : "cluster"; }

std::optional<std::string> process_env(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

namespace {

Mode parse_mode(std::string_view text) {
  if (text == "local") return Mode::kLocal;
  if (text == "cluster") return Mode::kCluster;
  throw Error(ErrorCode::kUsage, "unknown mode '" + std::string(text) + "' (expected local or cluster)");
}

std::uint32_t parse_count(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size() && v >= 0 && v <= UINT32_MAX) return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kUsage, std::string(what) + " expects a non-negative integer, got '" + text + "'");
}

// A string-valued setting: the flag wins, then the environment, then the
// default already stored by the caller.
struct Setting {
  explicit Setting(std::string env) : env_name(std::move(env)) {}

  std::string env_name;
  std::string flag;
  CLI::Option* option = nullptr;

  std::optional<std::string> resolve(const EnvLookup& env) const {
    if (option && option->count() > 0) return flag;
    if (env) {
      if (auto v = env(env_name)) return v;
    }
    return std::nullopt;
  }
};

}  // namespace

LaunchConfig parse_config(const std::vector<std::string>& args, const EnvLookup& env) {
  CLI::App app{"Ranked parallel closures over a master-coordinated transport", "mpignite"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Setting mode{"MPIGNITE_MODE"}, routing{"MPIGNITE_ROUTING"}, log_level{"MPIGNITE_LOG_LEVEL"},
      workers{"MPIGNITE_WORKERS"}, master{"MPIGNITE_MASTER"}, listen{"MPIGNITE_LISTEN"};
  std::string example;
  std::string n_text;
  std::int32_t delay = 0;

  auto* run = app.add_subcommand("run", "Run a bundled example and print its results");
  run->add_option("example", example, "matvec | ring | evenodd | matvec2d")->required();
  run->add_option("-n,--ranks", n_text, "Number of logical processes")->required();
  mode.option = run->add_option("--mode", mode.flag, "local | cluster  [env MPIGNITE_MODE]");
  auto* run_routing =
      run->add_option("--routing", routing.flag, "p2p | relay  [env MPIGNITE_ROUTING]");
  auto* run_workers = run->add_option("--workers", workers.flag,
                                      "Worker processes in cluster mode  [env MPIGNITE_WORKERS]");
  auto* run_level = run->add_option("--log-level", log_level.flag,
                                    "trace | debug | info | warn | error | off  [env MPIGNITE_LOG_LEVEL]");
  auto* run_delay = run->add_option("--delay-ms", delay, "Responder delay of evenodd");

  auto* mst = app.add_subcommand("master", "Serve one example job to externally started workers");
  mst->add_option("example", example, "matvec | ring | evenodd | matvec2d")->required();
  mst->add_option("-n,--ranks", n_text, "Number of logical processes")->required();
  auto* mst_listen = mst->add_option("--listen", listen.flag, "host:port  [env MPIGNITE_LISTEN]");
  auto* mst_workers =
      mst->add_option("--workers", workers.flag, "Workers to wait for  [env MPIGNITE_WORKERS]");
  auto* mst_routing =
      mst->add_option("--routing", routing.flag, "p2p | relay  [env MPIGNITE_ROUTING]");
  auto* mst_level = mst->add_option("--log-level", log_level.flag, "Log level  [env MPIGNITE_LOG_LEVEL]");
  auto* mst_delay = mst->add_option("--delay-ms", delay, "Responder delay of evenodd");

  auto* wrk = app.add_subcommand("worker", "Join a master and host the ranks it assigns");
  master.option = wrk->add_option("--master", master.flag, "host:port  [env MPIGNITE_MASTER]");
  auto* wrk_listen = wrk->add_option("--listen", listen.flag, "host:port  [env MPIGNITE_LISTEN]");
  auto* wrk_level = wrk->add_option("--log-level", log_level.flag, "Log level  [env MPIGNITE_LOG_LEVEL]");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    throw HelpRequested(subs.empty() ? app.help() : subs.front()->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    throw Error(ErrorCode::kUsage,
                std::string(e.what()) + "\n\n" + (subs.empty() ? app.help() : subs.front()->help()));
  }

  CLI::App* active = app.get_subcommands().front();
  auto usage = [&](const std::string& msg) {
    return Error(ErrorCode::kUsage, msg + "\n\n" + active->help());
  };

  LaunchConfig cfg;
  try {
    if (active == run) {
      cfg.role = Role::kRun;
      routing.option = run_routing;
      workers.option = run_workers;
      log_level.option = run_level;
      if (run_delay->count() > 0) cfg.delay_ms = delay;
    } else if (active == mst) {
      cfg.role = Role::kMaster;
      cfg.mode = Mode::kCluster;
      routing.option = mst_routing;
      workers.option = mst_workers;
      log_level.option = mst_level;
      listen.option = mst_listen;
      if (mst_delay->count() > 0) cfg.delay_ms = delay;
    } else {
      cfg.role = Role::kWorker;
      log_level.option = wrk_level;
      listen.option = wrk_listen;
    }

    if (auto v = log_level.resolve(env)) {
      static const std::vector<std::string> kLevels{"trace", "debug", "info", "warn", "error", "off"};
      if (std::find(kLevels.begin(), kLevels.end(), *v) == kLevels.end()) {
        throw Error(ErrorCode::kUsage, "unknown log level '" + *v + "'");
      }
      cfg.log_level = *v;
    }
    if (auto v = listen.resolve(env)) cfg.listen = parse_address(*v);

    if (cfg.role == Role::kWorker) {
      auto v = master.resolve(env);
      if (!v) throw Error(ErrorCode::kUsage, "worker needs --master host:port");
      cfg.master = parse_address(*v);
      return cfg;
    }

    if (cfg.role == Role::kRun) {
      if (auto v = mode.resolve(env)) cfg.mode = parse_mode(*v);
    }
    if (auto v = routing.resolve(env)) cfg.routing = parse_routing(*v);
    if (auto v = workers.resolve(env)) cfg.workers = parse_count(*v, "--workers");
    if (cfg.workers == 0) throw Error(ErrorCode::kUsage, "--workers must be at least 1");

    if (!examples::is_example(example)) {
      throw Error(ErrorCode::kUsage, "unknown example '" + example +
                                         "' (expected matvec, ring, evenodd or matvec2d)");
    }
    cfg.example = example;
    cfg.n = parse_count(n_text, "-n");
    if (cfg.n == 0) throw Error(ErrorCode::kUsage, "-n must be at least 1");
    if (cfg.delay_ms && *cfg.delay_ms < 0) throw Error(ErrorCode::kUsage, "--delay-ms must be >= 0");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUsage) throw;
    throw usage(e.what());
  }
  return cfg;
}

}  // namespace mpignite
