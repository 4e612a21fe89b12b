#include <atomic>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "semilab/parallel.hpp"
#include "semilab/random.hpp"
#include "semilab/sde.hpp"

using namespace semilab;

TEST(Philox, KnownAnswer) {
  const auto out = Philox::encrypt({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = Philox::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, StreamsDiffer) {
  Philox a(1, 0), b(1, 1), c(2, 0);
  const auto x = a(), y = b(), z = c();
  EXPECT_NE(x, y);
  EXPECT_NE(x, z);
}

TEST(Philox, UniformInUnitInterval) {
  Philox g(3, 4);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 3 * std::sqrt(1.0 / 12 / 100000));
}

TEST(Parallel, ChunkResultsIndependentOfThreadCount) {
  const auto model = GalerkinModel::ou(Matrix::Identity(2, 2) * -0.5, Matrix::Identity(2, 2));
  const Vector x = Vector::Constant(2, 0.3);
  const int before = thread_count();
  set_thread_count(1);
  const auto one = simulate_mild(model, x, 0.7, 0.05, 5000, 17).positions;
  set_thread_count(4);
  const auto four = simulate_mild(model, x, 0.7, 0.05, 5000, 17).positions;
  set_thread_count(before);
  EXPECT_TRUE((one.array() == four.array()).all());
}

TEST(Parallel, ExceptionPropagates) {
  const int before = thread_count();
  set_thread_count(3);
  std::atomic<int> calls{0};
  EXPECT_THROW(parallel_chunks(10 * kChunkSize,
                               [&](std::size_t chunk, std::size_t, std::size_t) {
                                 ++calls;
                                 if (chunk == 4) throw std::runtime_error("boom");
                               }),
               std::runtime_error);
  set_thread_count(before);
  EXPECT_GE(calls.load(), 1);
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<int> hits(5 * kChunkSize + 17, 0);
  parallel_chunks(hits.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) ++hits[i];
  });
  for (int h : hits) ASSERT_EQ(h, 1);
}

TEST(DeriveSeed, DistinctTags) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(5, 9), derive_seed(5, 9));
}
