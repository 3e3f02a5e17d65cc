#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "stockdemand/domain.hpp"
#include "stockdemand/params.hpp"

namespace stockdemand {

// Per-period precomputation shared by every likelihood evaluation: the
// stock step function, each purchase assigned to its constant-stock
// interval (by left limit, so the exhausting purchase counts as in-stock),
// and the per-(interval, item) purchase counts that let the choice part of
// the likelihood aggregate over counts instead of individual purchases.
struct PeriodWorkspace {
  StockTrajectory traj;
  std::vector<double> times;                            // all purchases, any item
  std::vector<std::vector<long>> interval_item_counts;  // [interval][item]
  long total_purchases = 0;
};

struct PreparedData {
  double horizon = 0.0;
  int items = 0;
  std::vector<std::vector<PeriodWorkspace>> stores;  // [store][period]

  std::size_t store_count() const { return stores.size(); }
};

inline PeriodWorkspace prepare_period(const TimePeriod& p, int n, double T) {
  PeriodWorkspace w;
  w.traj = build_stock_trajectory(p, n, T);
  w.interval_item_counts.assign(w.traj.interval_count(), std::vector<long>(n, 0));
  for (int i = 0; i < n; ++i)
    for (double t : p.purchase_times[i]) {
      w.interval_item_counts[w.traj.interval_before(t)][i] += 1;
      w.times.push_back(t);
      ++w.total_purchases;
    }
  return w;
}

inline PreparedData prepare(const Dataset& data) {
  validate_dataset(data);
  PreparedData pd;
  pd.horizon = data.horizon;
  pd.items = data.item_count;
  pd.stores.resize(data.stores.size());
  for (std::size_t s = 0; s < data.stores.size(); ++s) {
    pd.stores[s].reserve(data.stores[s].periods.size());
    for (const auto& p : data.stores[s].periods)
      pd.stores[s].push_back(prepare_period(p, data.item_count, data.horizon));
  }
  return pd;
}

// Observed purchase rate: lambda_tilde_i(t) = lambda(t | eta_store) *
// pi_i(s(t)). Entry 0 is the (unobserved) no-purchase rate.
inline std::vector<double> observed_rate(const ModelParams& params, const ModelSpec& spec,
                                         const StockTrajectory& traj, std::size_t store,
                                         double t) {
  const double lam = eval_rate(params.rate.at(store), spec.peaks_ptr(), t);
  std::vector<double> out = mixture_probs(traj.stock_at(t), params.mixture, store);
  for (double& v : out) v *= lam;
  return out;
}

// Mean function by exact decomposition over constant-stock intervals:
// Lambda_tilde_i(0,T) = sum_r pi_i(s_r) Lambda(q_r, q_{r+1}). Entry 0 is
// the no-purchase mass, so summing all entries recovers Lambda(0,T).
inline std::vector<double> mean_function(const ModelParams& params, const ModelSpec& spec,
                                         const StockTrajectory& traj, std::size_t store) {
  const auto& rp = params.rate.at(store);
  std::vector<double> out(spec.items + 1, 0.0);
  for (std::size_t r = 0; r < traj.interval_count(); ++r) {
    const double seg_mass =
        integrate_rate(rp, spec.peaks_ptr(), traj.changepoints[r], traj.changepoints[r + 1]);
    const auto pi = mixture_probs(traj.stock[r], params.mixture, store);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += pi[i] * seg_mass;
  }
  return out;
}

inline constexpr double neg_inf() { return -std::numeric_limits<double>::infinity(); }

// log p(t | params) = sum_{store,period,item} [ sum_j log lambda_tilde_i(t_ij)
// - Lambda_tilde_i(0,T) ]. A purchase with zero modeled rate yields the
// -infinity sentinel rather than an error so optimizers can back off.
inline double log_likelihood(const ModelParams& params, const ModelSpec& spec,
                             const PreparedData& data) {
  params.validate(spec);
  if (static_cast<int>(data.store_count()) != spec.stores || data.items != spec.items)
    throw std::invalid_argument("log_likelihood: dataset/spec dimension mismatch");
  double value = 0.0;
  for (int s = 0; s < spec.stores; ++s) {
    const auto& rp = params.rate[s];
    for (const auto& w : data.stores[s]) {
      for (std::size_t r = 0; r < w.traj.interval_count(); ++r) {
        const auto pi = mixture_probs(w.traj.stock[r], params.mixture, s);
        const double seg_mass = integrate_rate(rp, spec.peaks_ptr(), w.traj.changepoints[r],
                                               w.traj.changepoints[r + 1]);
        value -= (1.0 - pi[0]) * seg_mass;
        for (int i = 0; i < spec.items; ++i) {
          const long m = w.interval_item_counts[r][i];
          if (m == 0) continue;
          if (pi[i + 1] <= 0.0) return neg_inf();
          value += static_cast<double>(m) * std::log(pi[i + 1]);
        }
      }
      if (rp.kind == RateKind::homogeneous) {
        if (w.total_purchases > 0) {
          if (rp.values[0] <= 0.0) return neg_inf();
          value += static_cast<double>(w.total_purchases) * std::log(rp.values[0]);
        }
      } else {
        for (double t : w.times) {
          const double lam = eval_rate(rp, spec.peaks_ptr(), t);
          if (lam <= 0.0) return neg_inf();
          value += std::log(lam);
        }
      }
    }
  }
  return value;
}

inline double log_likelihood(const ModelParams& params, const ModelSpec& spec,
                             const Dataset& data) {
  return log_likelihood(params, spec, prepare(data));
}

struct LogLikResult {
  double value = 0.0;
  std::vector<double> gradient;  // aligned to ParamLayout order
};

// Period subset per store for the stochastic gradient; empty optional
// means the full batch.
using PeriodSelector = std::vector<std::vector<std::size_t>>;

// Gradient of the log-likelihood with respect to the transformed latent
// vector z (expanded-mean coordinates for theta/phi/tau, raw coordinates
// for eta). With a subset selector, each store's contribution is scaled by
// L_store / |subset| so the stochastic gradient is unbiased.
inline LogLikResult grad_log_likelihood(const std::vector<double>& z, const ModelSpec& spec,
                                        const PreparedData& data,
                                        const PeriodSelector* subset = nullptr) {
  const ParamLayout l = ParamLayout::of(spec);
  const ModelParams params = untransform(z, spec);
  if (static_cast<int>(data.store_count()) != spec.stores || data.items != spec.items)
    throw std::invalid_argument("grad_log_likelihood: dataset/spec dimension mismatch");
  if (subset && static_cast<int>(subset->size()) != spec.stores)
    throw std::invalid_argument("grad_log_likelihood: selector needs one entry per store");

  const int n = spec.items, K = spec.segments;
  LogLikResult res;
  res.gradient.assign(l.size(), 0.0);
  bool sentinel = false;

  // raw-coordinate accumulators (probability space), chain-ruled at the end
  std::vector<std::vector<double>> g_theta(spec.stores, std::vector<double>(K, 0.0));
  std::vector<std::vector<double>> g_phi(K, std::vector<double>(n, 0.0));
  std::vector<double> g_tau(K, 0.0);
  std::vector<double> d_seg(l.eta_dim), d_lam(l.eta_dim);
  std::vector<std::vector<double>> seg_probs(K);
  std::vector<ChoiceGrad> seg_grads(K);

  for (int s = 0; s < spec.stores; ++s) {
    const auto& rp = params.rate[s];
    const auto& theta = params.mixture.store_weights[s];
    const std::size_t L = data.stores[s].size();
    std::vector<std::size_t> all;
    const std::vector<std::size_t>* periods = nullptr;
    if (subset) {
      periods = &(*subset)[s];
      if (periods->empty() && L > 0)
        throw std::invalid_argument("grad_log_likelihood: empty period subset for a store");
    } else {
      all.resize(L);
      for (std::size_t i = 0; i < L; ++i) all[i] = i;
      periods = &all;
    }
    const double scale = static_cast<double>(L) / static_cast<double>(periods->size());
    double* g_eta = res.gradient.data() + l.eta_offset(s);

    for (std::size_t pidx : *periods) {
      const PeriodWorkspace& w = data.stores[s].at(pidx);
      for (std::size_t r = 0; r < w.traj.interval_count(); ++r) {
        const auto& stock = w.traj.stock[r];
        for (int k = 0; k < K; ++k) {
          seg_probs[k] = purchase_probs(stock, spec.choice, params.mixture.segments[k]);
          if (l.has_phi) seg_grads[k] = grad_choice(stock, spec.choice, params.mixture.segments[k]);
        }
        std::vector<double> pi(n + 1, 0.0);
        for (int k = 0; k < K; ++k)
          for (int i = 0; i <= n; ++i) pi[i] += theta[k] * seg_probs[k][i];

        const double q0 = w.traj.changepoints[r], q1 = w.traj.changepoints[r + 1];
        const double seg_mass = integrate_rate(rp, spec.peaks_ptr(), q0, q1);
        grad_integral(rp, spec.peaks_ptr(), q0, q1, d_seg);
        const double purchase_mass = 1.0 - pi[0];
        res.value -= scale * purchase_mass * seg_mass;
        for (int v = 0; v < l.eta_dim; ++v) g_eta[v] -= scale * purchase_mass * d_seg[v];
        for (int k = 0; k < K; ++k) {
          g_theta[s][k] -= scale * (1.0 - seg_probs[k][0]) * seg_mass;
          if (l.has_phi) {
            // sum_{i>=1} df_i = -df_0
            for (int u = 0; u < n; ++u)
              g_phi[k][u] += scale * theta[k] * seg_grads[k].dphi[u] * seg_mass;
            if (l.has_tau) g_tau[k] += scale * theta[k] * seg_grads[k].dtau[0] * seg_mass;
          }
        }

        for (int i = 0; i < n; ++i) {
          const long m = w.interval_item_counts[r][i];
          if (m == 0) continue;
          if (pi[i + 1] <= 0.0) {
            sentinel = true;
            continue;
          }
          const double mm = scale * static_cast<double>(m);
          res.value += mm * std::log(pi[i + 1]);
          const double inv = 1.0 / pi[i + 1];
          for (int k = 0; k < K; ++k) {
            g_theta[s][k] += mm * seg_probs[k][i + 1] * inv;
            if (l.has_phi) {
              for (int u = 0; u < n; ++u)
                g_phi[k][u] += mm * theta[k] * seg_grads[k].dphi[(i + 1) * n + u] * inv;
              if (l.has_tau) g_tau[k] += mm * theta[k] * seg_grads[k].dtau[i + 1] * inv;
            }
          }
        }
      }

      if (rp.kind == RateKind::homogeneous) {
        if (w.total_purchases > 0) {
          if (rp.values[0] <= 0.0) {
            sentinel = true;
          } else {
            res.value += scale * static_cast<double>(w.total_purchases) * std::log(rp.values[0]);
            g_eta[0] += scale * static_cast<double>(w.total_purchases) / rp.values[0];
          }
        }
      } else {
        for (double t : w.times) {
          const double lam = eval_rate(rp, spec.peaks_ptr(), t);
          if (lam <= 0.0) {
            sentinel = true;
            continue;
          }
          res.value += scale * std::log(lam);
          grad_rate(rp, spec.peaks_ptr(), t, d_lam);
          for (int v = 0; v < l.eta_dim; ++v) g_eta[v] += scale * d_lam[v] / lam;
        }
      }
    }
  }

  if (sentinel) {
    res.value = neg_inf();
    res.gradient.assign(l.size(), 0.0);
    return res;
  }

  // chain rule from probability space into the expanded-mean coordinates:
  // for p = z_block / sum(z_block), dL/dz_k = (dL/dp_k - sum_j p_j dL/dp_j) / sum(z_block)
  auto chain_simplex = [&](const double* zb, const double* graw, int len, double* gout) {
    double mass = 0.0, dot = 0.0;
    for (int i = 0; i < len; ++i) mass += zb[i];
    for (int i = 0; i < len; ++i) dot += (zb[i] / mass) * graw[i];
    for (int i = 0; i < len; ++i) gout[i] = (graw[i] - dot) / mass;
  };
  for (int s = 0; s < spec.stores; ++s)
    chain_simplex(z.data() + l.theta_offset(s), g_theta[s].data(), K,
                  res.gradient.data() + l.theta_offset(s));
  if (l.has_phi)
    for (int k = 0; k < K; ++k)
      chain_simplex(z.data() + l.phi_offset(k), g_phi[k].data(), n,
                    res.gradient.data() + l.phi_offset(k));
  if (l.has_tau)
    for (int k = 0; k < K; ++k) {
      const double a = z[l.tau_offset(k)], b = z[l.tau_offset(k) + 1];
      const double mass = a + b, tau = a / mass;
      res.gradient[l.tau_offset(k)] = g_tau[k] * (1.0 - tau) / mass;
      res.gradient[l.tau_offset(k) + 1] = -g_tau[k] * tau / mass;
    }
  return res;
}

// Hyperparameters of the prior: Dirichlet(alpha) on theta, Dirichlet(beta)
// on phi, Beta(gamma1, gamma2) on tau -- realized as independent Gamma(.,1)
// priors on the expanded coordinates -- and an independent uniform box on
// each eta coordinate.
struct PriorHyper {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma1 = 1.0, gamma2 = 1.0;
  std::vector<std::pair<double, double>> eta_box;  // per eta coordinate, lo > 0

  void validate(const ModelSpec& spec) const {
    if (alpha <= 0.0 || beta <= 0.0 || gamma1 <= 0.0 || gamma2 <= 0.0)
      throw std::invalid_argument("prior: Gamma shapes must be positive");
    if (static_cast<int>(eta_box.size()) != spec.eta_dim())
      throw std::invalid_argument("prior: one eta box per rate parameter required");
    for (auto [lo, hi] : eta_box)
      if (!(0.0 < lo && lo < hi))
        throw std::invalid_argument("prior: eta boxes need 0 < lo < hi");
  }
};

// log p(z) up to constants, and its gradient in z. Gamma(a,1) on each
// expanded coordinate gives (a-1) log z - z with gradient (a-1)/z - 1; eta
// outside its box yields the -infinity sentinel.
inline LogLikResult log_prior_and_grad(const std::vector<double>& z, const ModelSpec& spec,
                                       const PriorHyper& hyper) {
  const ParamLayout l = ParamLayout::of(spec);
  LogLikResult res;
  res.gradient.assign(l.size(), 0.0);
  bool outside = false;
  auto gamma_block = [&](int off, int len, double shape) {
    for (int i = 0; i < len; ++i) {
      const double v = z[off + i];
      res.value += (shape - 1.0) * std::log(v) - v;
      res.gradient[off + i] = (shape - 1.0) / v - 1.0;
    }
  };
  for (int s = 0; s < l.S; ++s) gamma_block(l.theta_offset(s), l.K, hyper.alpha);
  if (l.has_phi)
    for (int k = 0; k < l.K; ++k) gamma_block(l.phi_offset(k), l.n, hyper.beta);
  if (l.has_tau)
    for (int k = 0; k < l.K; ++k) {
      gamma_block(l.tau_offset(k), 1, hyper.gamma1);
      gamma_block(l.tau_offset(k) + 1, 1, hyper.gamma2);
    }
  for (int s = 0; s < l.S; ++s)
    for (int v = 0; v < l.eta_dim; ++v) {
      const double e = z[l.eta_offset(s) + v];
      if (e < hyper.eta_box[v].first || e > hyper.eta_box[v].second) outside = true;
    }
  if (outside) {
    res.value = neg_inf();
    res.gradient.assign(l.size(), 0.0);
  }
  return res;
}

}  // namespace stockdemand
