#include "mpignite/examples.hpp"

#include <numeric>
#include <sstream>
#include <thread>

#include "mpignite/log.hpp"

namespace mpignite::examples {

std::int32_t matvec(Communicator& world) {
  const int rank = world.rank();
  if (rank >= static_cast<int>(kMatrix.size())) return 0;
  const auto& row = kMatrix[rank];
  return std::inner_product(row.begin(), row.end(), kVector.begin(), 0);
}

// The token is incremented on every hop (the original only forwards it), so
// rank 0 receives size - 1 and every other rank returns the value it saw.
std::int32_t ring(Communicator& world) {
  const int rank = world.rank();
  const int size = world.size();
  if (size == 1) return 0;
  if (rank == 0) {
    world.send(1, 0, std::int32_t{0});
    return world.receive<std::int32_t>(size - 1, 0);
  }
  const auto token = world.receive<std::int32_t>(rank - 1, 0);
  world.send((rank + 1) % size, 0, token + 1);
  return token;
}

bool even_odd(Communicator& world) {
  const int rank = world.rank();
  const int half = world.size() / 2;
  if (rank < half) {
    world.send(rank + half, 0, std::int32_t{rank});
    auto f = world.receive_async<bool>(rank + half, 0);
    log::info("event=evenodd-waiting");
    f.on_complete([rank](const bool& b) { log::info("event=evenodd-answer rank={} even={}", rank, b); });
    return await_result(f);
  }
  std::int32_t delay = kEvenOddDelayMs;
  if (const auto& p = world.job_parameter()) delay = decode_as<std::int32_t>(*p);
  const auto r = world.receive<std::int32_t>(rank - half, 0);
  std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  const bool even = r % 2 == 0;
  world.send(rank - half, 0, even);
  return even;
}

// 3x3 grid: world rank w holds a = mat[w / 3][w % 3]. The vector goes to the
// diagonal, down each column by broadcast, and the row all-reduce sums the
// products. The original sends to col.getRank through the row communicator;
// with row ranks equal to grid columns that is the diagonal of the row.
std::int32_t matvec_2d(Communicator& world) {
  const int w = world.rank();
  auto row = world.split(w / 3, w);
  auto col = world.split(w % 3, w);
  if (!row || !col) throw Error(ErrorCode::kSplitProtocol, "grid split left a rank out");
  const std::int32_t a = w + 1;
  const int row_rank = row->rank();
  const int col_rank = col->rank();

  if (row_rank == row->size() - 1) row->send(col_rank, 0, std::int32_t{1 + col_rank});
  std::int32_t multiplied;
  if (row_rank == col_rank) {
    const auto x = row->receive<std::int32_t>(row->size() - 1, 0);
    col->broadcast<std::int32_t>(col_rank, x);
    multiplied = x * a;
  } else {
    multiplied = a * col->broadcast<std::int32_t>(row_rank);
  }
  return row->all_reduce(multiplied, [](std::int32_t x, std::int32_t y) { return x + y; });
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames{"matvec", "ring", "evenodd", "matvec2d"};
  return kNames;
}

bool is_example(std::string_view name) {
  for (const auto& n : names()) {
    if (n == name) return true;
  }
  return false;
}

void register_all(FunctionRegistry& registry) {
  registry.add("matvec", matvec);
  registry.add("ring", ring);
  registry.add("evenodd", even_odd);
  registry.add("matvec2d", matvec_2d);
}

const FunctionRegistry& builtin_registry() {
  static const FunctionRegistry registry = [] {
    FunctionRegistry r;
    register_all(r);
    return r;
  }();
  return registry;
}

void check_process_count(std::string_view name, std::uint32_t n) {
  if (!is_example(name)) {
    throw Error(ErrorCode::kUsage, "unknown example '" + std::string(name) +
                                       "' (expected matvec, ring, evenodd or matvec2d)");
  }
  if (n == 0) throw Error(ErrorCode::kUsage, "-n must be at least 1");
  if (name == "matvec2d" && n != 9) {
    throw Error(ErrorCode::kUsage, "matvec2d runs on a 3x3 grid and needs -n 9");
  }
  if (name == "evenodd" && (n < 2 || n % 2 != 0)) {
    throw Error(ErrorCode::kUsage, "evenodd pairs ranks and needs an even -n of at least 2");
  }
}

std::optional<Payload> default_parameter(std::string_view name) {
  if (name == "evenodd") return encode_as<std::int32_t>(kEvenOddDelayMs);
  return std::nullopt;
}

namespace {

std::int64_t as_int(const Value& v) {
  if (const auto* i = std::get_if<std::int32_t>(&v)) return *i;
  if (const auto* l = std::get_if<std::int64_t>(&v)) return *l;
  throw Error(ErrorCode::kTypeMismatch, "expected an integer result, got " +
                                            std::string(to_string(kind_of(v))));
}

}  // namespace

std::string summarize(std::string_view name, const std::vector<Value>& results) {
  std::ostringstream out;
  if (name == "matvec") {
    std::int64_t sum = 0;
    for (const auto& v : results) sum += as_int(v);
    out << "matvec: n=" << results.size() << " sum=" << sum;
  } else if (name == "ring") {
    out << "ring: n=" << results.size() << " token=" << (results.empty() ? 0 : as_int(results[0]));
  } else if (name == "evenodd") {
    const std::size_t half = results.size() / 2;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < half; ++r) {
      const auto* b = std::get_if<bool>(&results[r]);
      if (b && *b == (r % 2 == 0)) ++correct;
    }
    out << "evenodd: n=" << results.size() << " answered=" << correct << "/" << half;
  } else if (name == "matvec2d") {
    out << "matvec2d: n=" << results.size() << " y=[";
    for (std::size_t i = 0; i < results.size(); i += 3) {
      out << (i ? "," : "") << as_int(results[i]);
    }
    out << "]";
  } else {
    out << name << ": n=" << results.size();
  }
  return out.str();
}

ExampleRun run_example(Backend& backend, std::string_view name, std::uint32_t n,
                       RoutingMode routing, std::optional<Payload> parameter) {
  check_process_count(name, n);
  const auto& fn = builtin_registry().find(name);
  ParallelJob<Value> job(backend, fn);
  job.routing(routing);
  if (!parameter) parameter = default_parameter(name);
  if (parameter) job.parameter(*parameter);
  ExampleRun run;
  run.results = job.execute(n);
  run.summary = summarize(name, run.results);
  return run;
}

}  // namespace mpignite::examples
