#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stockdemand/likelihood.hpp"
#include "stockdemand/simulator.hpp"

using namespace stockdemand;

TEST_CASE("null process produces no arrivals") {
  Rng rng(1);
  REQUIRE(sample_nhpp({RateKind::homogeneous, {0.0}}, nullptr, 10.0, rng).empty());
}

TEST_CASE("arrival counts match the mean function") {
  Rng rng(2);
  SECTION("homogeneous") {
    const int reps = 50;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) {
      Rng sub = rng.substream({1, static_cast<std::uint64_t>(r)});
      total += static_cast<double>(
          sample_nhpp({RateKind::homogeneous, {2.0}}, nullptr, 1000.0, sub).size());
    }
    const double mean = total / reps;
    REQUIRE(std::abs(mean - 2000.0) <= 4.0 * std::sqrt(2000.0 / reps));
  }
  SECTION("hill mass splits between early and late windows") {
    const RateParams rp{RateKind::hill, {50.0, 2.0, 1.0}};
    const double early_mass = integrate_rate(rp, nullptr, 0.0, 1.0);
    const double total_mass = integrate_rate(rp, nullptr, 0.0, 10.0);
    const double p_early = early_mass / total_mass;
    long early = 0, total = 0;
    for (int r = 0; r < 200; ++r) {
      Rng sub = rng.substream({2, static_cast<std::uint64_t>(r)});
      for (double t : sample_nhpp(rp, nullptr, 10.0, sub)) {
        ++total;
        if (t <= 1.0) ++early;
      }
    }
    const double se = std::sqrt(p_early * (1.0 - p_early) / static_cast<double>(total));
    REQUIRE(std::abs(static_cast<double>(early) / total - p_early) <= 4.0 * se);
  }
  SECTION("arrivals are sorted and strictly increasing") {
    Rng sub = rng.substream({3});
    const auto ts = sample_nhpp({RateKind::hill, {30.0, 2.5, 2.0}}, nullptr, 8.0, sub);
    for (std::size_t i = 1; i < ts.size(); ++i) REQUIRE(ts[i] > ts[i - 1]);
  }
}

TEST_CASE("interarrival times of the homogeneous process are exponential") {
  Rng rng(5);
  const double rate = 3.0;
  std::vector<double> gaps;
  double prev = 0.0;
  while (gaps.size() < 10000) {
    const auto ts = sample_nhpp({RateKind::homogeneous, {rate}}, nullptr, 1000.0, rng);
    prev = 0.0;
    for (double t : ts) {
      gaps.push_back(t - prev);
      prev = t;
      if (gaps.size() == 10000) break;
    }
  }
  const double d = oracles::ks_statistic(
      gaps, [&](double x) { return 1.0 - std::exp(-rate * x); });
  REQUIRE(d < 1.628 / std::sqrt(10000.0));  // alpha = 0.01 critical value
}

TEST_CASE("simulated periods respect stock") {
  Rng rng(6);
  std::vector<SegmentParams> segs(1);
  segs[0].preference = {0.6, 0.4};
  segs[0].substitution = 0.5;

  SECTION("zero stock means no observed purchases") {
    const auto sim = simulate_period({RateKind::homogeneous, {5.0}}, nullptr, {1.0}, segs,
                                     ChoiceKind::exogenous, {0, 0}, 3.0, rng);
    REQUIRE(sim.observed.total_purchases() == 0);
    for (const auto& a : sim.arrivals) REQUIRE(a.item == -1);
  }
  SECTION("single unit of a single-minded ranking") {
    std::vector<SegmentParams> rank(1);
    rank[0].ranking = {0};
    const auto sim = simulate_period({RateKind::homogeneous, {8.0}}, nullptr, {1.0}, rank,
                                     ChoiceKind::nonparametric, {1, 99}, 3.0, rng);
    if (!sim.arrivals.empty()) {
      REQUIRE(sim.observed.purchases(0) == 1);
      REQUIRE(sim.observed.purchase_times[0][0] == sim.arrivals[0].time);
      for (std::size_t j = 1; j < sim.arrivals.size(); ++j)
        REQUIRE(sim.arrivals[j].item == -1);
    }
  }
  SECTION("purchases never exceed stock and stay feasible") {
    for (int rep = 0; rep < 50; ++rep) {
      Rng sub = rng.substream({7, static_cast<std::uint64_t>(rep)});
      const auto sim = simulate_period({RateKind::homogeneous, {10.0}}, nullptr, {1.0}, segs,
                                       ChoiceKind::exogenous, {3, 2}, 2.0, sub);
      REQUIRE(sim.observed.purchases(0) <= 3);
      REQUIRE(sim.observed.purchases(1) <= 2);
      REQUIRE_NOTHROW(build_stock_trajectory(sim.observed, 2, 2.0));
    }
  }
  SECTION("full-stock purchase shares follow the mixture probabilities") {
    std::vector<SegmentParams> two(2);
    two[0].preference = {0.75, 0.2, 0.05};
    two[0].substitution = 0.75;
    two[1].preference = {0.33, 0.33, 0.34};
    two[1].substitution = 0.75;
    const std::vector<double> theta{0.3, 0.7};
    SegmentMixture mix;
    mix.kind = ChoiceKind::exogenous;
    mix.segments = two;
    mix.store_weights = {theta};
    const auto pi = mixture_probs({1, 1, 1}, mix, 0);

    std::vector<long> counts(3, 0);
    long total = 0;
    for (int rep = 0; rep < 40; ++rep) {
      Rng sub = rng.substream({8, static_cast<std::uint64_t>(rep)});
      const auto sim = simulate_period({RateKind::homogeneous, {50.0}}, nullptr, theta, two,
                                       ChoiceKind::exogenous, {100000, 100000, 100000}, 10.0,
                                       sub);
      for (int i = 0; i < 3; ++i) counts[i] += sim.observed.purchases(i);
      total += sim.observed.total_purchases();
    }
    for (int i = 0; i < 3; ++i) {
      const double emp = static_cast<double>(counts[i]) / static_cast<double>(total);
      const double se =
          std::sqrt(pi[i + 1] * (1.0 - pi[i + 1]) / static_cast<double>(total));
      REQUIRE(std::abs(emp - pi[i + 1]) <= 4.0 * se);
    }
  }
}

TEST_CASE("scenario datasets are deterministic and well formed") {
  ScenarioSpec sc;
  sc.stores = 3;
  sc.periods_per_store = 5;
  sc.items = 3;
  sc.horizon = 100.0;
  sc.rate = RateKind::homogeneous;
  sc.rate_ranges = {{2.0, 4.0}};
  sc.choice = ChoiceKind::exogenous;
  sc.segments.resize(2);
  sc.segments[0].preference = {0.75, 0.2, 0.05};
  sc.segments[0].substitution = 0.75;
  sc.segments[1].preference = {0.33, 0.33, 0.34};
  sc.segments[1].substitution = 0.75;
  sc.stock.kind = StockRule::Kind::uniform;
  sc.stock.lo = 0;
  sc.stock.hi = 120;
  sc.seed = 404;

  const SimulatedDataset a = simulate_dataset(sc);
  const SimulatedDataset b = simulate_dataset(sc);
  REQUIRE(a.data.total_purchases() == b.data.total_purchases());
  for (std::size_t s = 0; s < a.data.stores.size(); ++s)
    for (std::size_t p = 0; p < a.data.stores[s].periods.size(); ++p)
      REQUIRE(a.data.stores[s].periods[p].purchase_times ==
              b.data.stores[s].periods[p].purchase_times);

  REQUIRE(a.truth.rate.size() == 3);
  for (const auto& rp : a.truth.rate) {
    REQUIRE(rp.values[0] >= 2.0);
    REQUIRE(rp.values[0] <= 4.0);
  }
  for (const auto& th : a.truth.mixture.store_weights) {
    double sum = 0.0;
    for (double v : th) sum += v;
    REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
  }
  REQUIRE_NOTHROW(validate_dataset(a.data));

  ScenarioSpec other = sc;
  other.seed = 405;
  REQUIRE(simulate_dataset(other).data.total_purchases() != a.data.total_purchases());
}

TEST_CASE("unbounded rates are rejected by the thinning sampler") {
  Rng rng(9);
  REQUIRE_THROWS_AS(sample_nhpp({RateKind::hill, {1.0, 0.5, 1.0}}, nullptr, 5.0, rng),
                    std::invalid_argument);
}
