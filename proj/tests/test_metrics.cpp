#include <random>
#include <vector>

#include "doctest.h"
#include "multipa/errors.hpp"
#include "multipa/metrics.hpp"
#include "support/oracles.hpp"

using namespace multipa;

TEST_CASE("pcc examples") {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 5, 4};
  const double expected = oracle::pearson(x, y);
  CHECK(pcc(x, y) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(pcc(x, x) == 1.0);
  const std::vector<double> neg{-1, -2, -3, -4};
  CHECK(pcc(x, neg) == -1.0);
}

TEST_CASE("pcc degenerate input") {
  const std::vector<double> c{3, 3, 3}, v{1, 2, 3}, one{1};
  CHECK_THROWS_AS(pcc(c, v), DegenerateInput);
  CHECK_THROWS_AS(pcc(one, one), DegenerateInput);
  CHECK_THROWS_AS(pcc(v, std::vector<double>{1, 2}), DegenerateInput);
}

TEST_CASE("pcc invariant under positive affine transforms") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(30), y(30), ax(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng);
      y[i] = 0.5 * x[i] + g(rng);
    }
    const double a = scale(rng), b = shift(rng);
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + b;
    CHECK(pcc(ax, y) == doctest::Approx(pcc(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("mean and sample std") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_std(v) == doctest::Approx(2.138089935299395));
  CHECK_THROWS_AS(sample_std(std::vector<double>{1.0}), DegenerateInput);
}
