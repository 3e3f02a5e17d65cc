#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stockdemand/sampler.hpp"
#include "stockdemand/simulator.hpp"

using namespace stockdemand;

namespace {

ModelSpec one_item_spec() {
  ModelSpec spec;
  spec.choice = ChoiceKind::nonparametric;
  spec.rate = RateKind::homogeneous;
  spec.stores = 1;
  spec.items = 1;
  spec.segments = 1;
  spec.rankings = {{0}};
  return spec;
}

Dataset one_item_data(std::vector<std::vector<double>> period_times, double T) {
  Dataset d;
  d.horizon = T;
  d.item_count = 1;
  d.item_names = {"a"};
  d.stores.resize(1);
  d.stores[0].store_id = "s1";
  int idx = 0;
  for (auto& ts : period_times) {
    TimePeriod p;
    p.period_id = "p" + std::to_string(++idx);
    p.purchase_times = {ts};
    p.initial_stock = {static_cast<long>(ts.size()) + 3};
    d.stores[0].periods.push_back(p);
  }
  return d;
}

}  // namespace

TEST_CASE("expanded-mean transform") {
  ModelSpec spec;
  spec.choice = ChoiceKind::exogenous;
  spec.rate = RateKind::homogeneous;
  spec.stores = 1;
  spec.items = 3;
  spec.segments = 2;
  const ParamLayout l = ParamLayout::of(spec);

  ModelParams p;
  p.rate = {{RateKind::homogeneous, {2.0}}};
  p.mixture.kind = ChoiceKind::exogenous;
  p.mixture.store_weights = {{0.25, 0.75}};
  p.mixture.segments.resize(2);
  p.mixture.segments[0].preference = {0.5, 0.3, 0.2};
  p.mixture.segments[0].substitution = 0.6;
  p.mixture.segments[1].preference = {0.1, 0.1, 0.8};
  p.mixture.segments[1].substitution = 0.2;

  SECTION("normalization recovers the probabilities") {
    std::vector<double> z = transform(p, spec);
    // theta block carries total mass K
    REQUIRE(z[l.theta_offset(0)] == Catch::Approx(0.5));
    REQUIRE(z[l.theta_offset(0) + 1] == Catch::Approx(1.5));
    const ModelParams back = untransform(z, spec);
    for (int k = 0; k < 2; ++k) {
      REQUIRE(back.mixture.segments[k].substitution ==
              Catch::Approx(p.mixture.segments[k].substitution).epsilon(1e-14));
      for (int i = 0; i < 3; ++i)
        REQUIRE(back.mixture.segments[k].preference[i] ==
                Catch::Approx(p.mixture.segments[k].preference[i]).epsilon(1e-14));
    }
    REQUIRE(back.mixture.store_weights[0][0] == Catch::Approx(0.25).epsilon(1e-14));
  }
  SECTION("normalization is scale invariant") {
    std::vector<double> z = transform(p, spec);
    std::vector<double> scaled = z;
    for (int k = 0; k < 2; ++k) scaled[l.theta_offset(0) + k] *= 17.3;
    const auto a = untransform(z, spec), b = untransform(scaled, spec);
    for (int k = 0; k < 2; ++k)
      REQUIRE(a.mixture.store_weights[0][k] ==
              Catch::Approx(b.mixture.store_weights[0][k]).epsilon(1e-14));
  }
  SECTION("simple normalizations") {
    std::vector<double> z = transform(p, spec);
    z[l.theta_offset(0)] = 2.0;
    z[l.theta_offset(0) + 1] = 2.0;
    REQUIRE(untransform(z, spec).mixture.store_weights[0] ==
            std::vector<double>{0.5, 0.5});
    z[l.theta_offset(0)] = 1.0;
    z[l.theta_offset(0) + 1] = 3.0;
    REQUIRE(untransform(z, spec).mixture.store_weights[0][0] == Catch::Approx(0.25));
  }
  SECTION("nonpositive coordinates are rejected") {
    std::vector<double> z = transform(p, spec);
    z[l.theta_offset(0)] = 0.0;
    REQUIRE_THROWS_AS(untransform(z, spec), std::invalid_argument);
  }
}

TEST_CASE("step size schedule") {
  SamplerConfig cfg;
  cfg.step_a = 0.01;
  cfg.step_b = 1000.0;
  cfg.step_c = 0.6;
  REQUIRE(step_size(cfg, 0) == 0.01);
  REQUIRE(step_size(cfg, 1000) == Catch::Approx(0.01 * std::pow(2.0, -0.6)).epsilon(1e-12));
  for (long w = 1; w < 200; ++w) REQUIRE(step_size(cfg, w) < step_size(cfg, w - 1));
}

TEST_CASE("sgrld update rule") {
  ModelSpec spec = one_item_spec();
  const ParamLayout l = ParamLayout::of(spec);  // eta(1) + theta(1)
  PriorHyper prior;
  prior.eta_box = {{0.5, 4.0}};

  SECTION("metric offset acts alone at zero gradient and zero noise") {
    const auto next = sgrld_step({1.0, 1.0}, {0.0, 0.0}, 0.1, l, prior, {0.0, 0.0});
    REQUIRE(next[1] == Catch::Approx(1.05).epsilon(1e-14));  // expanded coordinate
    REQUIRE(next[0] == Catch::Approx(1.0).epsilon(1e-14));   // eta has no +1 term
  }
  SECTION("negative proposals are mirrored about zero") {
    // 1 + 0.05 * (-25 + 1) = -0.2 -> 0.2
    const auto next = sgrld_step({1.0, 1.0}, {0.0, -25.0}, 0.1, l, prior, {0.0, 0.0});
    REQUIRE(next[1] == Catch::Approx(0.2).epsilon(1e-14));
  }
  SECTION("eta reflects at the box edges") {
    const auto low = sgrld_step({0.6, 1.0}, {-100.0, 0.0}, 0.1, l, prior, {0.0, 0.0});
    REQUIRE(low[0] >= 0.5);
    const auto high = sgrld_step({3.9, 1.0}, {100.0, 0.0}, 0.1, l, prior, {0.0, 0.0});
    REQUIRE(high[0] <= 4.0);
  }
  SECTION("noise scale is sqrt(eps) at unit state") {
    Rng rng(99);
    const double eps = 0.04;
    const int reps = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < reps; ++i) {
      const auto next = sgrld_step({1.0, 1.0}, {0.0, 0.0}, eps, l, prior, rng);
      sum += next[1];
      sq += next[1] * next[1];
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(sq / reps - mean * mean);
    REQUIRE(std::abs(sd - std::sqrt(eps)) <= 3.0 * std::sqrt(eps) / std::sqrt(2.0 * reps));
  }
  SECTION("mirroring keeps every expanded coordinate positive") {
    Rng rng(100);
    std::vector<double> z{1.0, 0.5};
    for (int it = 0; it < 20000; ++it) {
      z = sgrld_step(z, {rng.normal() * 5.0, rng.normal() * 5.0}, 0.05, l, prior, rng);
      REQUIRE(z[1] > 0.0);
      REQUIRE(z[0] >= 0.5);
      REQUIRE(z[0] <= 4.0);
    }
  }
}

TEST_CASE("map estimate finds the closed-form optimum") {
  // homogeneous rate, full stock: MAP eta = purchases / exposure
  ModelSpec spec = one_item_spec();
  const Dataset d = one_item_data({{0.3, 0.8, 1.4}, {0.5, 1.1}, {0.2, 0.9}}, 2.0);
  const PreparedData prepared = prepare(d);

  SamplerConfig cfg;
  cfg.prior.eta_box = {{0.01, 100.0}};
  cfg.prior.alpha = 2.0;  // interior stationary point for the theta block
  cfg.map_tol = 1e-8;

  Rng rng(7);
  const MapResult res = map_estimate_from_prior(spec, prepared, cfg, rng);
  REQUIRE(res.z[0] == Catch::Approx(7.0 / 6.0).epsilon(1e-6));
  REQUIRE(res.grad_norm <= 1e-6);

  SECTION("the optimum beats the true generating point") {
    std::vector<double> truth{1.2, 1.0};
    const double at_truth = detail::log_posterior_value(truth, spec, prepared, cfg.prior);
    REQUIRE(res.log_posterior >= at_truth - 1e-9);
  }
}

TEST_CASE("gelman-rubin diagnostic") {
  SECTION("hand example") {
    REQUIRE(gelman_rubin({{1.0, 2.0}, {1.0, 2.0}}) ==
            Catch::Approx(std::sqrt(0.5)).epsilon(1e-12));
  }
  SECTION("degenerate within-chain variance") {
    REQUIRE_THROWS_AS(gelman_rubin({{0.0, 0.0, 0.0}, {10.0, 10.0, 10.0}}), std::domain_error);
  }
  SECTION("identically distributed chains approach 1") {
    Rng rng(3);
    std::vector<std::vector<double>> chains(3);
    for (auto& c : chains)
      for (int i = 0; i < 10000; ++i) c.push_back(rng.normal());
    REQUIRE(gelman_rubin(chains) == Catch::Approx(1.0).margin(0.05));
  }
  SECTION("separated chains blow up") {
    Rng rng(4);
    std::vector<std::vector<double>> chains(2);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 500; ++i) chains[c].push_back(rng.normal() + c * 50.0);
    REQUIRE(gelman_rubin(chains) > 1.5);
  }
}

TEST_CASE("chains are reproducible under a fixed seed") {
  ModelSpec spec = one_item_spec();
  const Dataset d = one_item_data({{0.3, 0.8}, {0.5}, {0.2, 0.9, 1.7}, {1.0}}, 2.0);
  const PreparedData prepared = prepare(d);

  SamplerConfig cfg;
  cfg.prior.eta_box = {{0.01, 50.0}};
  cfg.iterations = 200;
  cfg.chains = 2;
  cfg.minibatch = 2;
  cfg.seed = 12345;
  cfg.map_max_iters = 50;

  const PosteriorSamples a = run_chains(spec, prepared, cfg);
  const PosteriorSamples b = run_chains(spec, prepared, cfg);
  REQUIRE(a.draws == b.draws);  // bit-identical
  REQUIRE(a.draws_per_chain() == 100);

  SamplerConfig other = cfg;
  other.seed = 54321;
  const PosteriorSamples c = run_chains(spec, prepared, other);
  REQUIRE(a.draws != c.draws);
}

TEST_CASE("posterior concentrates near the rate of a simple process") {
  // single item, plentiful stock: posterior for eta1 ~ purchases/exposure
  ModelSpec spec = one_item_spec();
  ScenarioSpec sc;
  sc.stores = 1;
  sc.periods_per_store = 20;
  sc.items = 1;
  sc.horizon = 2.0;
  sc.rate = RateKind::homogeneous;
  sc.rate_values = {{3.0}};
  sc.choice = ChoiceKind::nonparametric;
  sc.segments.resize(1);
  sc.segments[0].ranking = {0};
  sc.theta = {{1.0}};
  sc.stock.kind = StockRule::Kind::fixed;
  sc.stock.fixed = {1000};
  sc.seed = 99;
  const SimulatedDataset sim = simulate_dataset(sc);

  SamplerConfig cfg;
  cfg.prior.eta_box = {{0.01, 50.0}};
  cfg.iterations = 1500;
  cfg.chains = 3;
  cfg.minibatch = 3;
  cfg.seed = 7;
  cfg.step_a = 5e-3;
  cfg.step_b = 300.0;
  cfg.step_c = 0.6;

  const PreparedData prepared = prepare(sim.data);
  const PosteriorSamples s = run_chains(spec, prepared, cfg);

  long m = 0;
  for (const auto& p : sim.data.stores[0].periods) m += p.total_purchases();
  const double mle = static_cast<double>(m) / (20 * 2.0);

  double mean = 0.0;
  for (std::size_t c = 0; c < s.chain_count(); ++c)
    for (std::size_t i = 0; i < s.draws_per_chain(); ++i) mean += s.draws[c][i][0];
  mean /= static_cast<double>(s.total_draws());
  REQUIRE(std::abs(mean - mle) < 0.25);
  REQUIRE(s.diagnostics.converged);
}

TEST_CASE("holdout perplexity definition") {
  ModelSpec spec = one_item_spec();
  const Dataset holdout = one_item_data({{0.4, 1.2}, {0.7}}, 2.0);
  const PreparedData prepared = prepare(holdout);

  ModelParams p;
  p.rate = {{RateKind::homogeneous, {1.4}}};
  p.mixture.kind = ChoiceKind::nonparametric;
  p.mixture.segments.resize(1);
  p.mixture.segments[0].ranking = {0};
  p.mixture.store_weights = {{1.0}};

  PosteriorSamples s;
  s.spec = spec;
  s.draws = {{transform(p, spec)}};

  // m log c - c E with m = 3 purchases and exposure E = 2 periods x T = 4
  const double ll = 3.0 * std::log(1.4) - 1.4 * 4.0;
  const double want = std::exp(-ll / 3.0);
  REQUIRE(holdout_perplexity(s, prepared) == Catch::Approx(want).epsilon(1e-12));

  SECTION("duplicating the holdout changes nothing") {
    Dataset doubled = holdout;
    for (const auto& tp : holdout.stores[0].periods) {
      TimePeriod copy = tp;
      copy.period_id += "x";
      doubled.stores[0].periods.push_back(copy);
    }
    REQUIRE(holdout_perplexity(s, prepare(doubled)) ==
            Catch::Approx(want).epsilon(1e-12));
  }
  SECTION("empty holdout is rejected") {
    Dataset empty = holdout;
    empty.stores[0].periods[0].purchase_times = {{}};
    empty.stores[0].periods[0].initial_stock = {2};
    empty.stores[0].periods[1].purchase_times = {{}};
    empty.stores[0].periods[1].initial_stock = {2};
    REQUIRE_THROWS_AS(holdout_perplexity(s, prepare(empty)), std::invalid_argument);
  }
}

TEST_CASE("the true substitution rate minimizes expected holdout perplexity") {
  // score simulated exogenous holdouts at the true parameters with tau
  // swept over a grid; averaged over repeats the truth should win
  ScenarioSpec sc;
  sc.stores = 1;
  sc.periods_per_store = 12;
  sc.items = 2;
  sc.horizon = 2.0;
  sc.rate = RateKind::homogeneous;
  sc.rate_values = {{6.0}};
  sc.choice = ChoiceKind::exogenous;
  sc.segments.resize(1);
  sc.segments[0].preference = {0.7, 0.3};
  sc.segments[0].substitution = 0.6;
  sc.theta = {{1.0}};
  sc.stock.kind = StockRule::Kind::uniform;
  sc.stock.lo = 2;
  sc.stock.hi = 8;

  ModelSpec spec;
  spec.choice = ChoiceKind::exogenous;
  spec.rate = RateKind::homogeneous;
  spec.stores = 1;
  spec.items = 2;
  spec.segments = 1;

  const double grid[] = {0.15, 0.6, 0.95};
  std::vector<double> avg(3, 0.0);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    sc.seed = 1000 + seed;
    const SimulatedDataset sim = simulate_dataset(sc);
    const PreparedData prepared = prepare(sim.data);
    for (int g = 0; g < 3; ++g) {
      ModelParams p = sim.truth;
      p.mixture.segments[0].substitution = grid[g];
      PosteriorSamples s;
      s.spec = spec;
      s.draws = {{transform(p, spec)}};
      avg[g] += holdout_perplexity(s, prepared);
    }
  }
  REQUIRE(avg[1] < avg[0]);
  REQUIRE(avg[1] < avg[2]);
}
