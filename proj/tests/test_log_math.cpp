#include <doctest.h>

#include <cmath>
#include <vector>

#include "lt/error.hpp"
#include "lt/log_math.hpp"

using lt::kLogZero;

TEST_CASE("log_add of two equal values adds ln 2") {
  CHECK(lt::log_add(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Far below the exp underflow point the naive form would return -inf.
  CHECK(lt::log_add(-10000.0, -10000.0) ==
        doctest::Approx(-10000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("log_add absorbs impossible terms") {
  CHECK(lt::log_add(kLogZero, kLogZero) == kLogZero);
  CHECK(lt::log_add(-1.5, kLogZero) == -1.5);
  CHECK(lt::log_add(kLogZero, -1.5) == -1.5);
  CHECK(!std::isnan(lt::log_add(kLogZero, kLogZero)));
}

TEST_CASE("three-way log_add matches pairwise composition") {
  CHECK(lt::log_add(-1.0, -2.0, -3.0) ==
        doctest::Approx(std::log(std::exp(-1.0) + std::exp(-2.0) + std::exp(-3.0)))
            .epsilon(1e-15));
  CHECK(lt::log_add(kLogZero, kLogZero, -4.0) == -4.0);
}

TEST_CASE("log_sum_exp reductions") {
  const std::vector<double> single{-3.25};
  CHECK(lt::log_sum_exp(single) == -3.25);  // exact, no transform applied

  const std::vector<double> pair{0.0, 0.0};
  CHECK(lt::log_sum_exp(pair) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> shifted{-10000.0, -10000.0, -10000.0};
  CHECK(lt::log_sum_exp(shifted) ==
        doctest::Approx(-10000.0 + std::log(3.0)).epsilon(1e-15));

  const std::vector<double> all_zero{kLogZero, kLogZero};
  CHECK(lt::log_sum_exp(all_zero) == kLogZero);

  const std::vector<double> empty;
  CHECK_THROWS_AS(lt::log_sum_exp(empty), lt::Error);
}

TEST_CASE("log_sum_exp is permutation independent to high accuracy") {
  const std::vector<double> a{-0.3, -5.0, -1.2, -9.0};
  const std::vector<double> b{-9.0, -1.2, -5.0, -0.3};
  CHECK(lt::log_sum_exp(a) == doctest::Approx(lt::log_sum_exp(b)).epsilon(1e-14));
}
