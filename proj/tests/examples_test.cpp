#include <gtest/gtest.h>

#include "mpignite/examples.hpp"
#include "oracles.hpp"

using namespace mpignite;

namespace {

std::vector<std::int64_t> ints(const std::vector<Value>& vs) {
  std::vector<std::int64_t> out;
  for (const auto& v : vs) out.push_back(std::get<std::int32_t>(v));
  return out;
}

examples::ExampleRun run(std::string_view name, std::uint32_t n,
                         std::optional<Payload> parameter = std::nullopt) {
  LocalBackend backend;
  return examples::run_example(backend, name, n, RoutingMode::kP2P, std::move(parameter));
}

}  // namespace

TEST(Examples, Matvec) {
  const auto r = run("matvec", 8);
  EXPECT_EQ(ints(r.results), oracle::matvec(oracle::example_matrix(), oracle::example_vector(), 8));
  EXPECT_EQ(r.summary, "matvec: n=8 sum=96");
}

TEST(Examples, RingReturnsTokenToRoot) {
  for (std::uint32_t n : {1u, 2u, 5u, 16u}) {
    const auto r = run("ring", n);
    EXPECT_EQ(ints(r.results), oracle::ring(n)) << "n=" << n;
  }
  EXPECT_EQ(run("ring", 16).summary, "ring: n=16 token=15");
}

TEST(Examples, EvenOdd) {
  const auto r = run("evenodd", 10, encode_as<std::int32_t>(10));
  const auto expected = oracle::parity(10);
  ASSERT_EQ(r.results.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(std::get<bool>(r.results[i]), expected[i]) << i;
  EXPECT_EQ(r.summary, "evenodd: n=10 answered=5/5");
}

TEST(Examples, Matvec2dRowsHoldTheProduct) {
  const auto r = run("matvec2d", 9);
  const auto y = oracle::matvec(oracle::example_matrix(), oracle::example_vector(), 3);
  for (std::size_t w = 0; w < 9; ++w) EXPECT_EQ(std::get<std::int32_t>(r.results[w]), y[w / 3]);
  EXPECT_EQ(r.summary, "matvec2d: n=9 y=[14,32,50]");
}

TEST(Examples, ProcessCountValidation) {
  auto code = [](std::string_view name, std::uint32_t n) {
    try {
      examples::check_process_count(name, n);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kUserError;
  };
  EXPECT_EQ(code("matvec2d", 8), ErrorCode::kUsage);
  EXPECT_EQ(code("ring", 0), ErrorCode::kUsage);
  EXPECT_EQ(code("evenodd", 7), ErrorCode::kUsage);
  EXPECT_EQ(code("nope", 3), ErrorCode::kUsage);
  EXPECT_NO_THROW(examples::check_process_count("matvec2d", 9));
  EXPECT_NO_THROW(examples::check_process_count("matvec", 1));
}

TEST(Examples, RepeatedRunsAreIdentical) {
  for (const auto& name : examples::names()) {
    const std::uint32_t n = name == "matvec2d" ? 9 : (name == "evenodd" ? 4 : 6);
    const auto a = run(name, n, name == "evenodd" ? std::optional(encode_as<std::int32_t>(1)) : std::nullopt);
    const auto b = run(name, n, name == "evenodd" ? std::optional(encode_as<std::int32_t>(1)) : std::nullopt);
    EXPECT_EQ(a.results, b.results) << name;
  }
}
