#include <gtest/gtest.h>

#include <atomic>

#include "mpignite/examples.hpp"
#include "mpignite/runtime.hpp"
#include "oracles.hpp"

using namespace mpignite;
using namespace std::chrono_literals;

TEST(Runtime, MatvecMatchesSequentialProduct) {
  LocalBackend backend;
  Context sc(backend);
  const auto mat = examples::kMatrix;
  const auto vec = examples::kVector;
  // Reads mat and vec from the enclosing scope.
  auto res = sc.parallelize_func([mat, vec](Communicator& world) -> std::int32_t {
                 const int rank = world.rank();
                 if (rank >= static_cast<int>(mat.size())) return 0;
                 std::int32_t acc = 0;
                 for (std::size_t j = 0; j < vec.size(); ++j) acc += mat[rank][j] * vec[j];
                 return acc;
               }).execute(8);
  const auto expected = oracle::matvec(oracle::example_matrix(), oracle::example_vector(), 8);
  ASSERT_EQ(res.size(), expected.size());
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    EXPECT_EQ(res[i], expected[i]);
    sum += res[i];
  }
  EXPECT_EQ(sum, 96);
}

TEST(Runtime, SingleProcessReturnsItsRank) {
  LocalBackend backend;
  Context sc(backend);
  EXPECT_EQ(sc.parallelize_func([](Communicator& w) { return w.rank(); }).execute(1),
            std::vector<std::int32_t>{0});
}

TEST(Runtime, ResultsAreIndexedByRank) {
  LocalBackend backend;
  Context sc(backend);
  auto res = sc.parallelize_func([](Communicator& w) {
                 std::this_thread::sleep_for(std::chrono::milliseconds(5 * (4 - w.rank())));
                 return std::int64_t{w.rank()} * w.rank();
               }).execute(4);
  EXPECT_EQ(res, (std::vector<std::int64_t>{0, 1, 4, 9}));
}

TEST(Runtime, UnitFunctionsYieldUnitArray) {
  LocalBackend backend;
  Context sc(backend);
  auto res = sc.parallelize_func([](Communicator&) {}).execute(5);
  EXPECT_EQ(res.size(), 5u);
  for (const auto& u : res) EXPECT_EQ(u, Unit{});
}

TEST(Runtime, RanksAreABijection) {
  LocalBackend backend;
  Context sc(backend);
  auto res = sc.parallelize_func([](Communicator& w) { return w.rank(); }).execute(32);
  for (int r = 0; r < 32; ++r) EXPECT_EQ(res[r], r);
}

TEST(Runtime, BuilderDefersExecution) {
  LocalBackend backend;
  Context sc(backend);
  std::atomic<int> calls{0};
  {
    auto job = sc.parallelize_func([&calls](Communicator&) { ++calls; });
    (void)job;
  }
  EXPECT_EQ(calls.load(), 0);
  sc.parallelize_func([&calls](Communicator&) { ++calls; }).execute(3);
  EXPECT_EQ(calls.load(), 3);
}

TEST(Runtime, FailureNamesOriginatingRank) {
  LocalBackend backend;
  Context sc(backend);
  try {
    sc.parallelize_func([](Communicator& w) -> std::int32_t {
        if (w.rank() == 2) throw std::runtime_error("rank two gave up");
        // Everyone else waits for a message that never comes.
        return w.receive<std::int32_t>((w.rank() + 1) % w.size(), 0);
      }).execute(4);
    FAIL() << "expected JobFailure";
  } catch (const JobFailure& f) {
    EXPECT_EQ(f.origin(), 2u);
    EXPECT_EQ(f.code(), ErrorCode::kJobFailure);
    EXPECT_NE(std::string(f.what()).find("rank 2"), std::string::npos);
    EXPECT_NE(std::string(f.what()).find("rank two gave up"), std::string::npos);
    ASSERT_EQ(f.failures().size(), 4u);
    for (const auto& r : f.failures()) {
      if (r.rank == 2) {
        EXPECT_EQ(r.code, ErrorCode::kUserError);
      } else {
        EXPECT_EQ(r.code, ErrorCode::kReceiveAborted);
      }
    }
  }
}

TEST(Runtime, CollectWaitsForEveryRank) {
  LocalBackend backend;
  Context sc(backend);
  std::atomic<int> finished{0};
  auto handle = sc.parallelize_func([&finished](Communicator& w) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(10 * w.rank()));
                    ++finished;
                  }).submit(6);
  collect_results(handle);
  EXPECT_EQ(finished.load(), 6);
  EXPECT_TRUE(handle.done());
}

TEST(Runtime, CollectWaitsEvenWhenAJobFails) {
  LocalBackend backend;
  Context sc(backend);
  std::atomic<int> finished{0};
  auto handle = sc.parallelize_func([&finished](Communicator& w) {
                    if (w.rank() == 0) {
                      ++finished;
                      throw std::runtime_error("early");
                    }
                    std::this_thread::sleep_for(50ms);
                    ++finished;
                  }).submit(3);
  EXPECT_THROW(collect_results(handle), JobFailure);
  EXPECT_EQ(finished.load(), 3);
}

TEST(Runtime, ZeroProcessesIsUsageError) {
  LocalBackend backend;
  Context sc(backend);
  try {
    sc.parallelize_func([](Communicator&) {}).execute(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
  }
}

TEST(Runtime, RegistryRules) {
  FunctionRegistry reg;
  reg.add("id", [](Communicator& w) { return w.rank(); });
  EXPECT_TRUE(reg.contains("id"));
  EXPECT_THROW(reg.add("id", [](Communicator&) {}), Error);
  EXPECT_THROW(reg.add("", [](Communicator&) {}), Error);
  try {
    reg.find("missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRegistry);
  }
  LocalBackend backend;
  Context sc(backend, &reg);
  auto res = sc.parallelize_func("id").execute(3);
  EXPECT_EQ(res, (std::vector<Value>{std::int32_t{0}, std::int32_t{1}, std::int32_t{2}}));
  EXPECT_THROW(sc.parallelize_func("missing"), Error);
  Context bare(backend);
  EXPECT_THROW(bare.parallelize_func("id"), Error);
}

TEST(Runtime, JobParameterReachesEveryRank) {
  LocalBackend backend;
  Context sc(backend);
  auto res = sc.parallelize_func([](Communicator& w) {
                 return decode_as<std::string>(*w.job_parameter());
               })
                 .parameter(encode_as<std::string>("hello"))
                 .execute(3);
  EXPECT_EQ(res, (std::vector<std::string>{"hello", "hello", "hello"}));
}

TEST(Runtime, BackendRunsConsecutiveJobs) {
  LocalBackend backend;
  Context sc(backend);
  for (int i = 0; i < 20; ++i) {
    auto res = sc.parallelize_func(examples::ring).execute(8);
    EXPECT_EQ(res[0], 7);
  }
}
