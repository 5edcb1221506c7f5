#pragma once

// Bundled example programs: matrix-vector product, token ring, nonblocking
// even/odd exchange and the 2D-decomposed matrix-vector product.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpignite/runtime.hpp"

namespace mpignite::examples {

inline constexpr std::array<std::array<std::int32_t, 3>, 3> kMatrix{{
    {1, 2, 3},
    {4, 5, 6},
    {7, 8, 9},
}};
inline constexpr std::array<std::int32_t, 3> kVector{1, 2, 3};

// Default delay of the even/odd responders, in milliseconds.
inline constexpr std::int32_t kEvenOddDelayMs = 300;

std::int32_t matvec(Communicator& world);
std::int32_t ring(Communicator& world);
bool even_odd(Communicator& world);
std::int32_t matvec_2d(Communicator& world);

const std::vector<std::string>& names();
bool is_example(std::string_view name);

void register_all(FunctionRegistry& registry);
// The registry every mpignite binary ships with.
const FunctionRegistry& builtin_registry();

// Throws kUsage when `n` does not suit the example.
void check_process_count(std::string_view name, std::uint32_t n);
std::optional<Payload> default_parameter(std::string_view name);
std::string summarize(std::string_view name, const std::vector<Value>& results);

struct ExampleRun {
  std::vector<Value> results;
  std::string summary;
};

ExampleRun run_example(Backend& backend, std::string_view name, std::uint32_t n,
                       RoutingMode routing,
                       std::optional<Payload> parameter = std::nullopt);

}  // namespace mpignite::examples
