#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "stockdemand/likelihood.hpp"
#include "stockdemand/rng.hpp"

namespace stockdemand {

struct SamplerConfig {
  // step size schedule eps_w = a (1 + w/b)^(-c); the usual convergence
  // conditions hold for c in (0.5, 1]
  double step_a = 0.01;
  double step_b = 1000.0;
  double step_c = 0.6;
  int minibatch = 3;    // periods per store per gradient
  int iterations = 10000;
  int chains = 3;
  double burn_in = 0.5;  // fraction discarded
  std::uint64_t seed = 0;
  PriorHyper prior;
  // MAP initialization
  int map_max_iters = 500;
  double map_tol = 1e-8;
  int map_retries = 20;
  double rhat_threshold = 1.1;

  void validate() const {
    if (step_a <= 0.0 || step_b <= 0.0 || step_c <= 0.0)
      throw std::invalid_argument("sampler config: schedule constants must be positive");
    if (minibatch < 1) throw std::invalid_argument("sampler config: minibatch must be >= 1");
    if (iterations < 1 || chains < 1)
      throw std::invalid_argument("sampler config: iterations and chains must be >= 1");
    if (burn_in < 0.0 || burn_in >= 1.0)
      throw std::invalid_argument("sampler config: burn-in fraction must be in [0,1)");
  }
};

inline double step_size(const SamplerConfig& cfg, long w) {
  return cfg.step_a * std::pow(1.0 + static_cast<double>(w) / cfg.step_b, -cfg.step_c);
}

// One SGRLD update. Expanded-mean coordinates take
//   z <- z + eps/2 (z * grad + 1) + sqrt(z) * psi,  psi ~ N(0, eps I),
// with negative proposals mirrored about 0; the +1 is the metric term of
// G(z) = diag(z)^-1. Eta coordinates use the same positive-coordinate
// Langevin form without the +1 and reflect at their prior box edges.
// `noise` holds standard normal variates, one per coordinate.
inline std::vector<double> sgrld_step(const std::vector<double>& z,
                                      const std::vector<double>& grad, double eps,
                                      const ParamLayout& layout, const PriorHyper& prior,
                                      const std::vector<double>& noise) {
  if (z.size() != grad.size() || z.size() != noise.size())
    throw std::invalid_argument("sgrld_step: size mismatch");
  std::vector<double> out(z.size());
  const double sd = std::sqrt(eps);
  const int eta_total = layout.S * layout.eta_dim;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const bool expanded = static_cast<int>(i) >= eta_total;
    double v = z[i] + 0.5 * eps * (z[i] * grad[i] + (expanded ? 1.0 : 0.0)) +
               std::sqrt(z[i]) * sd * noise[i];
    if (expanded) {
      v = std::abs(v);
      if (v == 0.0) v = 1e-300;
    } else {
      const auto [lo, hi] = prior.eta_box[i % layout.eta_dim];
      for (int guard = 0; (v < lo || v > hi) && guard < 64; ++guard) {
        if (v < lo) v = 2.0 * lo - v;
        if (v > hi) v = 2.0 * hi - v;
      }
      v = std::clamp(v, lo, hi);
    }
    out[i] = v;
  }
  return out;
}

inline std::vector<double> sgrld_step(const std::vector<double>& z,
                                      const std::vector<double>& grad, double eps,
                                      const ParamLayout& layout, const PriorHyper& prior,
                                      Rng& rng) {
  std::vector<double> noise(z.size());
  for (double& v : noise) v = rng.normal();
  return sgrld_step(z, grad, eps, layout, prior, noise);
}

inline std::vector<double> draw_from_prior(const ModelSpec& spec, const PriorHyper& prior,
                                           Rng& rng) {
  const ParamLayout l = ParamLayout::of(spec);
  std::vector<double> z(l.size());
  for (int s = 0; s < l.S; ++s)
    for (int v = 0; v < l.eta_dim; ++v)
      z[l.eta_offset(s) + v] = rng.uniform(prior.eta_box[v].first, prior.eta_box[v].second);
  for (int s = 0; s < l.S; ++s)
    for (int k = 0; k < l.K; ++k) z[l.theta_offset(s) + k] = rng.gamma(prior.alpha);
  if (l.has_phi)
    for (int k = 0; k < l.K; ++k)
      for (int i = 0; i < l.n; ++i) z[l.phi_offset(k) + i] = rng.gamma(prior.beta);
  if (l.has_tau)
    for (int k = 0; k < l.K; ++k) {
      z[l.tau_offset(k)] = rng.gamma(prior.gamma1);
      z[l.tau_offset(k) + 1] = rng.gamma(prior.gamma2);
    }
  return z;
}

struct MapResult {
  std::vector<double> z;
  double log_posterior = neg_inf();
  double grad_norm = 0.0;
  int iterations = 0;
};

namespace detail {

inline LogLikResult log_posterior_and_grad(const std::vector<double>& z, const ModelSpec& spec,
                                           const PreparedData& data, const PriorHyper& prior,
                                           const PeriodSelector* subset = nullptr) {
  LogLikResult lik = grad_log_likelihood(z, spec, data, subset);
  LogLikResult pri = log_prior_and_grad(z, spec, prior);
  lik.value += pri.value;
  for (std::size_t i = 0; i < lik.gradient.size(); ++i) lik.gradient[i] += pri.gradient[i];
  return lik;
}

inline double log_posterior_value(const std::vector<double>& z, const ModelSpec& spec,
                                  const PreparedData& data, const PriorHyper& prior) {
  const LogLikResult pri = log_prior_and_grad(z, spec, prior);
  if (pri.value == neg_inf()) return neg_inf();
  return log_likelihood(untransform(z, spec), spec, data) + pri.value;
}

}  // namespace detail

// Local MAP by natural-gradient ascent (direction diag(z) * grad) with
// backtracking line search on the full-batch log posterior. Coordinates
// are projected back into their domains (tiny positive floor for expanded
// coordinates, prior box for eta). Stops at small gradient norm, a failed
// line search, or the iteration cap.
inline MapResult map_estimate(const ModelSpec& spec, const PreparedData& data,
                              const SamplerConfig& cfg, std::vector<double> z) {
  const ParamLayout l = ParamLayout::of(spec);
  const int eta_total = l.S * l.eta_dim;
  auto project = [&](std::vector<double>& v) {
    for (int i = 0; i < static_cast<int>(v.size()); ++i) {
      if (i < eta_total) {
        const auto [lo, hi] = cfg.prior.eta_box[i % l.eta_dim];
        v[i] = std::clamp(v[i], lo, hi);
      } else {
        v[i] = std::max(v[i], 1e-12);
      }
    }
  };
  project(z);
  MapResult res;
  double f = detail::log_posterior_value(z, spec, data, cfg.prior);
  if (f == neg_inf()) return res;  // caller retries from a fresh draw
  for (int it = 0; it < cfg.map_max_iters; ++it) {
    const LogLikResult g = detail::log_posterior_and_grad(z, spec, data, cfg.prior);
    double gnorm = 0.0;
    for (double v : g.gradient) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    res.iterations = it;
    res.grad_norm = gnorm;
    if (gnorm <= cfg.map_tol) break;
    // ascent direction preconditioned by the expanded-mean metric
    std::vector<double> dir(z.size());
    double dir_dot_grad = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      dir[i] = z[i] * g.gradient[i];
      dir_dot_grad += dir[i] * g.gradient[i];
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      std::vector<double> cand(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) cand[i] = z[i] + step * dir[i];
      project(cand);
      const double fc = detail::log_posterior_value(cand, spec, data, cfg.prior);
      if (fc > f + 1e-4 * step * dir_dot_grad) {
        z = std::move(cand);
        f = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  res.z = std::move(z);
  res.log_posterior = f;
  return res;
}

inline MapResult map_estimate_from_prior(const ModelSpec& spec, const PreparedData& data,
                                         const SamplerConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < cfg.map_retries; ++attempt) {
    MapResult r = map_estimate(spec, data, cfg, draw_from_prior(spec, cfg.prior, rng));
    if (r.log_posterior != neg_inf()) return r;
  }
  throw std::runtime_error(
      "map_estimate: posterior not finite at any prior draw (retry limit reached)");
}

// Classic potential scale reduction over >= 2 equal-length chains:
// Rhat = sqrt(((m-1)/m W + B/m) / W) for chain length m, within-chain
// variance W and between-chain variance B. Throws if W is zero.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least 2 chains");
  const std::size_t m = chains[0].size();
  if (m < 2) throw std::invalid_argument("gelman_rubin: need chains of length >= 2");
  for (const auto& c : chains)
    if (c.size() != m) throw std::invalid_argument("gelman_rubin: chains must be equal length");

  double grand = 0.0;
  std::vector<double> means(chains.size(), 0.0);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (double v : chains[c]) means[c] += v;
    means[c] /= static_cast<double>(m);
    grand += means[c];
  }
  grand /= static_cast<double>(chains.size());
  double within = 0.0, between_over_m = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    double sse = 0.0;
    for (double v : chains[c]) sse += (v - means[c]) * (v - means[c]);
    within += sse / static_cast<double>(m - 1);
    between_over_m += (means[c] - grand) * (means[c] - grand);
  }
  within /= static_cast<double>(chains.size());
  between_over_m /= static_cast<double>(chains.size() - 1);
  if (within == 0.0)
    throw std::domain_error("gelman_rubin: zero within-chain variance (degenerate chains)");
  const double md = static_cast<double>(m);
  return std::sqrt(((md - 1.0) / md * within + between_over_m) / within);
}

struct ChainDiagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  bool converged = false;
};

struct PosteriorSamples {
  ModelSpec spec;
  // [chain][draw] -> transformed latent vector, post burn-in
  std::vector<std::vector<std::vector<double>>> draws;
  ChainDiagnostics diagnostics;

  std::size_t chain_count() const { return draws.size(); }
  std::size_t draws_per_chain() const { return draws.empty() ? 0 : draws[0].size(); }
  std::size_t total_draws() const { return chain_count() * draws_per_chain(); }
  ModelParams params_at(std::size_t chain, std::size_t i) const {
    return untransform(draws[chain][i], spec);
  }
};

namespace detail {

inline void run_single_chain(const ModelSpec& spec, const PreparedData& data,
                             const SamplerConfig& cfg, int chain,
                             std::vector<std::vector<double>>& out) {
  Rng root(cfg.seed);
  Rng rng = root.substream({0xC0u, static_cast<std::uint64_t>(chain)});
  MapResult init = map_estimate_from_prior(spec, data, cfg, rng);
  std::vector<double> z = std::move(init.z);

  const int S = spec.stores;
  PeriodSelector sel(S);
  std::vector<std::size_t> period_counts(S);
  for (int s = 0; s < S; ++s) period_counts[s] = data.stores[s].size();

  out.clear();
  out.reserve(cfg.iterations);
  for (int w = 0; w < cfg.iterations; ++w) {
    for (int s = 0; s < S; ++s) {
      const std::size_t take = std::min<std::size_t>(cfg.minibatch, period_counts[s]);
      sel[s] = rng.sample_without_replacement(period_counts[s], take);
    }
    LogLikResult g = log_posterior_and_grad(z, spec, data, cfg.prior, &sel);
    z = sgrld_step(z, g.gradient, step_size(cfg, w), ParamLayout::of(spec), cfg.prior, rng);
    out.push_back(z);
  }
  const std::size_t burn = static_cast<std::size_t>(cfg.burn_in * cfg.iterations);
  out.erase(out.begin(), out.begin() + burn);
}

}  // namespace detail

// Per-scalar Rhat on the untransformed parameters; scalars that are
// exactly constant and equal across all chains (e.g. theta with K = 1)
// report 1, constant-but-different scalars report infinity.
inline ChainDiagnostics compute_diagnostics(const PosteriorSamples& samples,
                                            double threshold) {
  const ParamLayout l = ParamLayout::of(samples.spec);
  ChainDiagnostics d;
  d.names = l.column_names();
  const std::size_t C = samples.chain_count(), m = samples.draws_per_chain();
  std::vector<std::vector<std::vector<double>>> cols(
      C, std::vector<std::vector<double>>(l.column_count()));
  for (std::size_t c = 0; c < C; ++c) {
    for (auto& v : cols[c]) v.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto u = untransformed_columns(samples.draws[c][i], samples.spec);
      for (int j = 0; j < l.column_count(); ++j) cols[c][j].push_back(u[j]);
    }
  }
  d.converged = true;
  for (int j = 0; j < l.column_count(); ++j) {
    std::vector<std::vector<double>> per_chain(C);
    for (std::size_t c = 0; c < C; ++c) per_chain[c] = cols[c][j];
    double r;
    try {
      r = gelman_rubin(per_chain);
    } catch (const std::domain_error&) {
      bool all_equal = true;
      const double v0 = per_chain[0][0];
      for (const auto& ch : per_chain)
        for (double v : ch) all_equal &= (v == v0);
      r = all_equal ? 1.0 : std::numeric_limits<double>::infinity();
    }
    d.rhat.push_back(r);
    if (!(r <= threshold)) d.converged = false;
  }
  return d;
}

// C independent SGRLD chains, each initialized at a MAP found from its own
// prior draw, with fresh uniform without-replacement minibatches per
// iteration and store. Chains execute concurrently; the result is
// bit-reproducible for a fixed (seed, config, data).
inline PosteriorSamples run_chains(const ModelSpec& spec, const PreparedData& data,
                                   const SamplerConfig& cfg) {
  spec.validate();
  cfg.validate();
  cfg.prior.validate(spec);

  PosteriorSamples out;
  out.spec = spec;
  out.draws.resize(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  std::vector<std::thread> workers;
  workers.reserve(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c)
    workers.emplace_back([&, c] {
      try {
        detail::run_single_chain(spec, data, cfg, c, out.draws[c]);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (cfg.chains >= 2 && out.draws_per_chain() >= 2)
    out.diagnostics = compute_diagnostics(out, cfg.rhat_threshold);
  return out;
}

// exp(- mean over posterior draws of loglik(holdout) / total holdout
// purchases); lower is better. max_draws > 0 subsamples the draws with an
// even stride to bound cost.
inline double holdout_perplexity(const PosteriorSamples& samples, const PreparedData& holdout,
                                 std::size_t max_draws = 0) {
  long m = 0;
  for (const auto& st : holdout.stores)
    for (const auto& p : st) m += p.total_purchases;
  if (m == 0) throw std::invalid_argument("holdout_perplexity: empty holdout");
  const std::size_t per_chain = samples.draws_per_chain();
  if (per_chain == 0) throw std::invalid_argument("holdout_perplexity: no posterior draws");
  std::size_t stride = 1;
  if (max_draws > 0 && samples.total_draws() > max_draws)
    stride = (samples.total_draws() + max_draws - 1) / max_draws;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < samples.chain_count(); ++c)
    for (std::size_t i = 0; i < per_chain; i += stride) {
      acc += log_likelihood(samples.params_at(c, i), samples.spec, holdout);
      ++used;
    }
  return std::exp(-acc / static_cast<double>(used) / static_cast<double>(m));
}

}  // namespace stockdemand
