#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "lt/error.hpp"
#include "lt/rng.hpp"
#include "lt/tensor.hpp"
#include "lt/tensor_io.hpp"

TEST_CASE("tensor indexing is row-major") {
  lt::Tensor t({2, 3, 4});
  t(1, 2, 3) = 5.0;
  CHECK(t.data()[1 * 12 + 2 * 4 + 3] == 5.0);
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
}

TEST_CASE("log_softmax of a uniform row is -log V") {
  lt::Tensor logits({1, 3}, 0.0);
  const lt::LogProbGrid grid = lt::log_softmax_rows(logits);
  for (std::size_t v = 0; v < 3; ++v)
    CHECK(grid(0, v) == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("log_softmax is shift invariant and overflow safe") {
  lt::Tensor logits({1, 3});
  logits(0, 0) = 1000.0;
  logits(0, 1) = 0.0;
  logits(0, 2) = 0.0;
  const lt::LogProbGrid grid = lt::log_softmax_rows(logits);
  CHECK(std::isfinite(grid(0, 0)));
  CHECK(grid(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(grid(0, 1) == doctest::Approx(-1000.0).epsilon(1e-12));
}

TEST_CASE("log_softmax rows are normalized") {
  lt::Rng rng(11);
  lt::Tensor logits({8, 7});
  for (auto& x : logits.values()) x = rng.uniform(-5.0, 5.0);
  const lt::LogProbGrid grid = lt::log_softmax_rows(logits);
  for (std::size_t t = 0; t < 8; ++t) {
    double sum = 0.0;
    for (std::size_t v = 0; v < 7; ++v) sum += std::exp(grid(t, v));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("log_softmax rejects non-finite logits") {
  lt::Tensor logits({1, 2}, 0.0);
  logits(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lt::log_softmax_rows(logits), lt::Error);
}

TEST_CASE("tensor stream round-trip is bit exact") {
  lt::Rng rng(3);
  lt::Tensor t({3, 4});
  for (auto& x : t.values()) x = rng.gaussian();
  t(0, 0) = -0.0;
  t(1, 1) = 1e-308;

  std::stringstream buf;
  lt::write_tensor_stream(t, std::nullopt, buf);
  const lt::StoredTensor back = lt::read_tensor_stream(buf);

  REQUIRE(back.data.shape() == t.shape());
  CHECK(!back.lengths.has_value());
  for (std::size_t i = 0; i < t.size(); ++i) {
    // Bitwise comparison: -0.0 and 0.0 must stay distinct.
    CHECK(std::signbit(back.data.data()[i]) == std::signbit(t.data()[i]));
    CHECK(back.data.data()[i] == t.data()[i]);
  }
}

TEST_CASE("batched tensor round-trip keeps per-item lengths") {
  lt::BatchGrid grid;
  grid.data = lt::Tensor({2, 3, 2}, -1.0);
  grid.lengths = {3, 1};

  std::stringstream buf;
  lt::write_tensor_stream(grid.data, grid.lengths, buf);
  const lt::StoredTensor back = lt::read_tensor_stream(buf);
  REQUIRE(back.lengths.has_value());
  CHECK(*back.lengths == grid.lengths);
}

TEST_CASE("corrupt tensor streams are rejected") {
  lt::Tensor t({2, 2}, 1.0);
  std::stringstream buf;
  lt::write_tensor_stream(t, std::nullopt, buf);
  const std::string good = buf.str();

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    std::stringstream in(bad);
    CHECK_THROWS_AS(lt::read_tensor_stream(in), lt::Error);
  }
  SUBCASE("truncated payload") {
    std::stringstream in(good.substr(0, good.size() - 7));
    CHECK_THROWS_AS(lt::read_tensor_stream(in), lt::Error);
  }
  SUBCASE("trailing bytes") {
    std::stringstream in(good + "x");
    CHECK_THROWS_AS(lt::read_tensor_stream(in), lt::Error);
  }
  SUBCASE("mangled header json") {
    std::string bad = good;
    bad[12] = '?';  // inside the JSON header
    std::stringstream in(bad);
    CHECK_THROWS_AS(lt::read_tensor_stream(in), lt::Error);
  }
}

TEST_CASE("rng draws are reproducible across instances") {
  lt::Rng a(42);
  lt::Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  lt::Rng c(42);
  for (int i = 0; i < 50; ++i) {
    const auto lo = c.range(-3, 3);
    CHECK(lo >= -3);
    CHECK(lo <= 3);
  }
}
