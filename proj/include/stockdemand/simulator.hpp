#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stockdemand/domain.hpp"
#include "stockdemand/params.hpp"
#include "stockdemand/rng.hpp"

namespace stockdemand {

// Initial stock per item per period: a fixed vector, or independent
// uniform integers on [lo, hi].
struct StockRule {
  enum class Kind { fixed, uniform } kind = Kind::fixed;
  std::vector<long> fixed;
  long lo = 0, hi = 0;
};

struct ScenarioSpec {
  int stores = 1;
  int periods_per_store = 1;
  int items = 1;
  double horizon = 1.0;
  RateKind rate = RateKind::homogeneous;
  std::optional<PeakTemplate> peaks;
  // per-store rate values; empty means sample each coordinate uniformly
  // from rate_ranges
  std::vector<std::vector<double>> rate_values;
  std::vector<std::pair<double, double>> rate_ranges;
  ChoiceKind choice = ChoiceKind::exogenous;
  std::vector<SegmentParams> segments;
  // per-store segment weights; empty means sample from Dirichlet(theta_alpha)
  std::vector<std::vector<double>> theta;
  std::vector<double> theta_alpha;
  StockRule stock;
  std::uint64_t seed = 0;
  std::vector<std::string> item_names;

  const PeakTemplate* peaks_ptr() const { return peaks ? &*peaks : nullptr; }
};

// Arrival times on [0, T] from NHPP(lambda) by thinning against the closed
// form bound of rate_upper_bound; exact for every supported rate family
// with bounded intensity.
inline std::vector<double> sample_nhpp(const RateParams& rp, const PeakTemplate* tmpl, double T,
                                       Rng& rng) {
  validate_rate_params(rp, tmpl);
  const double bound = rate_upper_bound(rp, tmpl, T);
  std::vector<double> times;
  if (bound <= 0.0) return times;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(bound);
    if (t > T) break;
    if (rng.uniform() * bound < eval_rate(rp, tmpl, t)) {
      if (!times.empty() && t <= times.back()) t = std::nextafter(times.back(), T + 1.0);
      if (t > T) break;
      times.push_back(t);
    }
  }
  return times;
}

struct SimulatedArrival {
  double time = 0.0;
  int segment = 0;
  int item = -1;  // -1 = no-purchase
};

struct SimulatedPeriod {
  std::vector<SimulatedArrival> arrivals;  // includes no-purchases
  TimePeriod observed;
};

// Generative model for one period: NHPP arrivals, per-arrival segment
// draw, choice against the current stock, stock decrement on purchase.
inline SimulatedPeriod simulate_period(const RateParams& rp, const PeakTemplate* tmpl,
                                       const std::vector<double>& theta,
                                       const std::vector<SegmentParams>& segments,
                                       ChoiceKind choice, const std::vector<long>& initial_stock,
                                       double T, Rng& rng) {
  const int n = static_cast<int>(initial_stock.size());
  SimulatedPeriod out;
  out.observed.purchase_times.assign(n, {});
  out.observed.initial_stock = initial_stock;

  std::vector<long> remaining = initial_stock;
  std::vector<int> stock(n);
  for (int i = 0; i < n; ++i) stock[i] = remaining[i] > 0 ? 1 : 0;

  for (double t : sample_nhpp(rp, tmpl, T, rng)) {
    const int k = static_cast<int>(rng.categorical(theta));
    const auto f = purchase_probs(stock, choice, segments[k]);
    const int pick = static_cast<int>(rng.categorical(f));  // 0 = no-purchase
    SimulatedArrival a;
    a.time = t;
    a.segment = k;
    a.item = pick - 1;
    out.arrivals.push_back(a);
    if (pick >= 1) {
      const int item = pick - 1;
      out.observed.purchase_times[item].push_back(t);
      if (--remaining[item] == 0) stock[item] = 0;
    }
  }
  return out;
}

struct SimulatedDataset {
  Dataset data;
  ModelParams truth;
  ModelSpec spec;
};

namespace detail {

inline std::string padded_label(const char* prefix, int i, int width) {
  std::string num = std::to_string(i + 1);
  while (static_cast<int>(num.size()) < width) num = "0" + num;
  return prefix + num;
}

}  // namespace detail

// Full dataset plus the generating parameters for recovery scoring.
// Deterministic under the scenario seed: every store draw and period draw
// uses its own substream keyed by (seed, store, period).
inline SimulatedDataset simulate_dataset(const ScenarioSpec& sc) {
  if (sc.stores < 1 || sc.periods_per_store < 1 || sc.items < 1 || sc.horizon <= 0.0)
    throw std::invalid_argument("scenario: dimensions must be positive");
  if (sc.segments.empty()) throw std::invalid_argument("scenario: no segments");
  const Rng root(sc.seed);

  SimulatedDataset out;
  out.spec.rate = sc.rate;
  out.spec.choice = sc.choice;
  out.spec.stores = sc.stores;
  out.spec.items = sc.items;
  out.spec.segments = static_cast<int>(sc.segments.size());
  out.spec.peaks = sc.peaks;
  if (sc.choice == ChoiceKind::nonparametric)
    for (const auto& seg : sc.segments) out.spec.rankings.push_back(seg.ranking);

  out.truth.mixture.kind = sc.choice;
  out.truth.mixture.segments = sc.segments;
  for (const auto& seg : sc.segments) validate_segment(sc.choice, seg, sc.items);

  const int eta_dim = rate_param_count(sc.rate);
  for (int s = 0; s < sc.stores; ++s) {
    RateParams rp;
    rp.kind = sc.rate;
    if (!sc.rate_values.empty()) {
      rp.values = sc.rate_values.at(s);
    } else {
      if (static_cast<int>(sc.rate_ranges.size()) != eta_dim)
        throw std::invalid_argument("scenario: rate_ranges must cover every rate parameter");
      Rng r = root.substream({0xA1u, static_cast<std::uint64_t>(s)});
      for (const auto& [lo, hi] : sc.rate_ranges) rp.values.push_back(r.uniform(lo, hi));
    }
    validate_rate_params(rp, sc.peaks_ptr());
    out.truth.rate.push_back(rp);

    if (!sc.theta.empty()) {
      out.truth.mixture.store_weights.push_back(sc.theta.at(s));
    } else {
      Rng r = root.substream({0xA2u, static_cast<std::uint64_t>(s)});
      std::vector<double> alpha =
          sc.theta_alpha.empty() ? std::vector<double>(sc.segments.size(), 1.0) : sc.theta_alpha;
      out.truth.mixture.store_weights.push_back(r.dirichlet(alpha));
    }
  }

  out.data.horizon = sc.horizon;
  out.data.item_count = sc.items;
  out.data.item_names = sc.item_names;
  if (out.data.item_names.empty())
    for (int i = 0; i < sc.items; ++i)
      out.data.item_names.push_back(detail::padded_label("item", i, 1));

  const int period_width = sc.periods_per_store >= 100 ? 3 : 2;
  for (int s = 0; s < sc.stores; ++s) {
    StoreData store;
    store.store_id = detail::padded_label("s", s, 1);
    for (int p = 0; p < sc.periods_per_store; ++p) {
      Rng r = root.substream(
          {0xA3u, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(p)});
      std::vector<long> stock(sc.items);
      if (sc.stock.kind == StockRule::Kind::fixed) {
        if (static_cast<int>(sc.stock.fixed.size()) != sc.items)
          throw std::invalid_argument("scenario: fixed stock must have one entry per item");
        stock = sc.stock.fixed;
      } else {
        if (sc.stock.hi < sc.stock.lo || sc.stock.lo < 0)
          throw std::invalid_argument("scenario: bad stock range");
        for (int i = 0; i < sc.items; ++i)
          stock[i] = sc.stock.lo +
                     static_cast<long>(r.uniform_int(
                         static_cast<std::uint64_t>(sc.stock.hi - sc.stock.lo + 1)));
      }
      SimulatedPeriod sim =
          simulate_period(out.truth.rate[s], sc.peaks_ptr(), out.truth.mixture.store_weights[s],
                          sc.segments, sc.choice, stock, sc.horizon, r);
      sim.observed.period_id = detail::padded_label("p", p, period_width);
      store.periods.push_back(std::move(sim.observed));
    }
    out.data.stores.push_back(std::move(store));
  }
  validate_dataset(out.data);
  return out;
}

}  // namespace stockdemand
