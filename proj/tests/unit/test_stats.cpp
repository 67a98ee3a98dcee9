#include "gagn/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gagn::stats;

// Reference values below were computed once with numpy / scipy.stats.

TEST_CASE("percentile interpolates between closest ranks") {
  const std::vector<double> xs{5, 1, 4, 2, 3, 10};
  CHECK(percentile(xs, 0) == 1.0);
  CHECK(percentile(xs, 10) == doctest::Approx(1.5));
  CHECK(percentile(xs, 37.5) == doctest::Approx(2.875));
  CHECK(percentile(xs, 50) == doctest::Approx(3.5));
  CHECK(percentile(xs, 90) == doctest::Approx(7.5));
  CHECK(percentile(xs, 100) == 10.0);
  CHECK(percentile({4.0}, 30) == 4.0);
}

TEST_CASE("moments and summary") {
  const std::vector<double> xs{3, 1, 4, 1, 5, 9};
  CHECK(mean(xs) == doctest::Approx(23.0 / 6));
  CHECK(stddev(xs) == doctest::Approx(2.9944392908634274));
  CHECK(half_range(xs) == 4.0);
  const Summary s = summarize(xs);
  CHECK(s.n == 6);
  CHECK(s.min == 1.0);
  CHECK(s.max == 9.0);
  CHECK(s.half_range == 4.0);
  CHECK(stddev(std::vector<double>{2.0}) == 0.0);
}

TEST_CASE("pearson correlation") {
  const std::vector<double> a{0.1, 0.4, 0.35, 0.8, 0.9, 0.05};
  const std::vector<double> b{0.2, 0.3, 0.5, 0.7, 1.0, 0.1};
  CHECK(*pearson(a, b) == doctest::Approx(0.9517277686543467).epsilon(1e-12));
  CHECK(*pearson(a, a) == doctest::Approx(1.0));
  std::vector<double> neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -2.0 * a[i] + 1.0;
  CHECK(*pearson(a, neg) == doctest::Approx(-1.0));
  CHECK_FALSE(pearson(a, std::vector<double>(a.size(), 3.0)).has_value());
  CHECK_FALSE(pearson(a, std::span<const double>(b).first(3)).has_value());
}

TEST_CASE("pearson of independent samples is near zero") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> x(20000), y(20000);
  for (auto& v : x) v = n(rng);
  for (auto& v : y) v = n(rng);
  CHECK(std::abs(*pearson(x, y)) < 0.03);
}

TEST_CASE("one-sided Mann-Whitney with ties") {
  const std::vector<double> x{1.2, 3.4, 2.2, 0.5, 2.2, 4.1, 0.9};
  const std::vector<double> y{2.5, 3.9, 4.4, 2.2, 5.1, 3.3, 6.0, 2.8};
  const MannWhitney r = mann_whitney_less(x, y);
  CHECK(r.u == doctest::Approx(10.0));
  CHECK(r.p == doctest::Approx(0.02105135905830118).epsilon(1e-9));
  CHECK(r.z < 0.0);
  const MannWhitney flipped = mann_whitney_less(y, x);
  CHECK(flipped.p > 0.95);
}
