#include <catch2/catch_amalgamated.hpp>

#include "stockdemand/rng.hpp"

using namespace stockdemand;

TEST_CASE("fixed seed reproduces the exact draw sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.uniform() == b.uniform());
    REQUIRE(a.normal() == b.normal());
  }
}

TEST_CASE("substreams depend only on the id path") {
  Rng root(7);
  Rng s1 = root.substream({1, 2});
  root.uniform();  // advancing the parent must not affect substreams
  Rng s2 = root.substream({1, 2});
  for (int i = 0; i < 100; ++i) REQUIRE(s1.uniform() == s2.uniform());
  Rng other = root.substream({1, 3});
  REQUIRE(s2.uniform() != other.uniform());
}

TEST_CASE("uniform_int stays in range and covers it") {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.uniform_int(7)];
  for (int h : hits) REQUIRE(h > 0);
}

TEST_CASE("poisson matches its mean and variance for small and large means") {
  Rng rng(11);
  for (double mean : {0.5, 40.0, 1200.0}) {
    const int reps = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < reps; ++i) {
      const double x = static_cast<double>(rng.poisson(mean));
      sum += x;
      sq += x * x;
    }
    const double m = sum / reps;
    const double v = sq / reps - m * m;
    REQUIRE(std::abs(m - mean) < 4.0 * std::sqrt(mean / reps));
    REQUIRE(std::abs(v - mean) < 0.1 * mean + 1.0);
  }
  REQUIRE(rng.poisson(0.0) == 0);
}

TEST_CASE("gamma matches mean shape and variance shape") {
  Rng rng(13);
  for (double shape : {0.4, 1.0, 3.5}) {
    const int reps = 40000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < reps; ++i) {
      const double x = rng.gamma(shape);
      sum += x;
      sq += x * x;
    }
    const double m = sum / reps;
    REQUIRE(std::abs(m - shape) < 4.0 * std::sqrt(shape / reps));
    REQUIRE(std::abs(sq / reps - m * m - shape) < 0.15 * shape + 0.05);
  }
}

TEST_CASE("dirichlet draws live on the simplex") {
  Rng rng(5);
  const auto x = rng.dirichlet({1.0, 2.0, 0.5});
  double sum = 0.0;
  for (double v : x) {
    REQUIRE(v > 0.0);
    sum += v;
  }
  REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample_without_replacement yields sorted distinct indices") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const auto idx = rng.sample_without_replacement(10, 4);
    REQUIRE(idx.size() == 4);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      REQUIRE(idx[i] < 10);
      if (i > 0) REQUIRE(idx[i] > idx[i - 1]);
    }
  }
  const auto all = rng.sample_without_replacement(5, 5);
  REQUIRE(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
}
