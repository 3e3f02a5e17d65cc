#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stockdemand/likelihood.hpp"
#include "stockdemand/rng.hpp"
#include "stockdemand/sampler.hpp"

namespace stockdemand {

// A frozen stock level and the time intervals it applies to (possibly
// collected across several periods of one store).
struct StockCondition {
  std::vector<int> stock;
  std::vector<std::pair<double, double>> intervals;

  void validate(int n, double T) const {
    if (static_cast<int>(stock.size()) != n)
      throw std::invalid_argument("stock condition: stock vector must have n entries");
    for (int v : stock)
      if (v != 0 && v != 1) throw std::invalid_argument("stock condition: entries must be 0/1");
    for (auto [a, b] : intervals)
      if (!(0.0 <= a && a <= b && b <= T))
        throw std::invalid_argument("stock condition: interval outside [0,T]");
  }

  double total_length() const {
    double d = 0.0;
    for (auto [a, b] : intervals) d += b - a;
    return d;
  }
};

struct PredictiveSummary {
  double mean = 0.0;
  double q025 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q975 = 0.0;
};

// Per-draw Poisson counts per item plus totals and summaries.
struct PredictiveDistribution {
  std::vector<std::vector<long>> counts;  // [draw][item]
  std::vector<long> totals;               // [draw]
  std::vector<PredictiveSummary> item_summary;
  PredictiveSummary total_summary;
};

namespace detail {

inline PredictiveSummary summarize(std::vector<double> v) {
  PredictiveSummary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  auto q = [&](double p) {
    const double idx = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = idx - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
  };
  s.q025 = q(0.025);
  s.q25 = q(0.25);
  s.median = q(0.5);
  s.q75 = q(0.75);
  s.q975 = q(0.975);
  return s;
}

inline void finalize(PredictiveDistribution& dist, int n) {
  std::vector<double> tot(dist.counts.size());
  dist.totals.resize(dist.counts.size());
  for (std::size_t d = 0; d < dist.counts.size(); ++d) {
    long t = 0;
    for (long c : dist.counts[d]) t += c;
    dist.totals[d] = t;
    tot[d] = static_cast<double>(t);
  }
  dist.item_summary.resize(n);
  std::vector<double> col(dist.counts.size());
  for (int i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dist.counts.size(); ++d)
      col[d] = static_cast<double>(dist.counts[d][i]);
    dist.item_summary[i] = summarize(col);
  }
  dist.total_summary = summarize(tot);
}

}  // namespace detail

// Expected purchases per item over the condition's intervals with the
// stock frozen at the given level: sum_j pi_i(s) * Lambda(a_j, b_j).
inline std::vector<double> expected_counts(const ModelParams& params, const ModelSpec& spec,
                                           const StockCondition& cond, std::size_t store) {
  const auto pi = mixture_probs(cond.stock, params.mixture, store);
  double mass = 0.0;
  for (auto [a, b] : cond.intervals)
    mass += integrate_rate(params.rate.at(store), spec.peaks_ptr(), a, b);
  std::vector<double> mean(spec.items);
  for (int i = 0; i < spec.items; ++i) mean[i] = pi[i + 1] * mass;
  return mean;
}

// Posterior predictive counts under a stock condition: for each posterior
// draw, a Poisson count per item with the closed-form mean above.
// Deterministic given (samples, seed): draw d uses substream (seed, d).
inline PredictiveDistribution predict_counts(const PosteriorSamples& samples,
                                             const StockCondition& cond, std::size_t store,
                                             std::uint64_t seed) {
  const int n = samples.spec.items;
  PredictiveDistribution dist;
  const Rng root(seed);
  std::uint64_t draw_id = 0;
  for (std::size_t c = 0; c < samples.chain_count(); ++c)
    for (std::size_t i = 0; i < samples.draws_per_chain(); ++i, ++draw_id) {
      const auto mean = expected_counts(samples.params_at(c, i), samples.spec, cond, store);
      Rng rng = root.substream({0xD0u, draw_id});
      std::vector<long> row(n);
      for (int v = 0; v < n; ++v) row[v] = rng.poisson(mean[v]);
      dist.counts.push_back(std::move(row));
    }
  detail::finalize(dist, n);
  return dist;
}

// Average predicted purchase-rate curve over the store's periods:
// curve(t) = (1/L) sum_l sum_{i>=1} lambda_tilde_i(t), one curve per
// posterior draw, with each period's stock taken from its own trajectory.
inline std::vector<std::vector<double>> average_purchase_rate_curve(
    const PosteriorSamples& samples, const PreparedData& data, std::size_t store,
    const std::vector<double>& grid) {
  for (double t : grid)
    if (t < 0.0 || t > data.horizon)
      throw std::invalid_argument("rate curve: grid point outside [0,T]");
  const auto& periods = data.stores.at(store);
  std::vector<std::vector<double>> curves;
  curves.reserve(samples.total_draws());
  for (std::size_t c = 0; c < samples.chain_count(); ++c)
    for (std::size_t i = 0; i < samples.draws_per_chain(); ++i) {
      const ModelParams p = samples.params_at(c, i);
      std::vector<double> curve(grid.size(), 0.0);
      for (const auto& w : periods) {
        for (std::size_t g = 0; g < grid.size(); ++g) {
          const auto rates = observed_rate(p, samples.spec, w.traj, store, grid[g]);
          double purchase_rate = 0.0;
          for (int v = 1; v <= samples.spec.items; ++v) purchase_rate += rates[v];
          curve[g] += purchase_rate;
        }
      }
      for (double& v : curve) v /= static_cast<double>(periods.size());
      curves.push_back(std::move(curve));
    }
  return curves;
}

// Posterior predictive of total purchases over `periods` periods had there
// been no stockouts: per draw, Poisson with mean
// periods * Lambda(0,T) * pi_i(full stock).
inline PredictiveDistribution full_stock_sales(const PosteriorSamples& samples,
                                               std::size_t store, long periods, double horizon,
                                               std::uint64_t seed) {
  const int n = samples.spec.items;
  StockCondition cond;
  cond.stock.assign(n, 1);
  cond.intervals.assign(1, {0.0, horizon});
  PredictiveDistribution dist;
  const Rng root(seed);
  std::uint64_t draw_id = 0;
  for (std::size_t c = 0; c < samples.chain_count(); ++c)
    for (std::size_t i = 0; i < samples.draws_per_chain(); ++i, ++draw_id) {
      const auto mean = expected_counts(samples.params_at(c, i), samples.spec, cond, store);
      Rng rng = root.substream({0xD1u, draw_id});
      std::vector<long> row(n);
      for (int v = 0; v < n; ++v)
        row[v] = rng.poisson(static_cast<double>(periods) * mean[v]);
      dist.counts.push_back(std::move(row));
    }
  detail::finalize(dist, n);
  return dist;
}

// Intervals of each requested stock level actually realized in the given
// periods, for the out-of-sample prediction task: returns one condition
// per distinct stock vector found (excluding empty-duration ones).
inline std::vector<StockCondition> realized_stock_conditions(const PreparedData& data,
                                                             std::size_t store,
                                                             std::size_t first_period,
                                                             std::size_t last_period) {
  std::vector<StockCondition> conds;
  const auto& periods = data.stores.at(store);
  for (std::size_t p = first_period; p < last_period && p < periods.size(); ++p) {
    const auto& traj = periods[p].traj;
    for (std::size_t r = 0; r < traj.interval_count(); ++r) {
      const double a = traj.changepoints[r], b = traj.changepoints[r + 1];
      if (b <= a) continue;
      auto it = std::find_if(conds.begin(), conds.end(), [&](const StockCondition& c) {
        return c.stock == traj.stock[r];
      });
      if (it == conds.end()) {
        StockCondition c;
        c.stock = traj.stock[r];
        conds.push_back(c);
        it = conds.end() - 1;
      }
      it->intervals.emplace_back(a, b);
    }
  }
  return conds;
}

// Actual purchases per item that fell inside a condition's intervals
// (intervals are treated half-open [a, b), matching the trajectory
// convention, except b = T which is closed).
inline std::vector<long> actual_counts(const Dataset& data, std::size_t store,
                                       std::size_t first_period, std::size_t last_period,
                                       const StockCondition& cond) {
  std::vector<long> counts(data.item_count, 0);
  const auto& periods = data.stores.at(store).periods;
  for (std::size_t p = first_period; p < last_period && p < periods.size(); ++p) {
    const auto& tp = periods[p];
    const auto traj = build_stock_trajectory(tp, data.item_count, data.horizon);
    for (int i = 0; i < data.item_count; ++i)
      for (double t : tp.purchase_times[i]) {
        const auto& s = traj.stock[traj.interval_before(t)];
        if (s == cond.stock) ++counts[i];
      }
  }
  return counts;
}

}  // namespace stockdemand
