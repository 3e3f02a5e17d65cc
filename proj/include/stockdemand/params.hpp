#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stockdemand/choice_model.hpp"
#include "stockdemand/rate_model.hpp"

namespace stockdemand {

// Model structure that stays fixed during inference: families, dimensions,
// the fixed parts of the choice model, and the peak template.
struct ModelSpec {
  RateKind rate = RateKind::homogeneous;
  ChoiceKind choice = ChoiceKind::exogenous;
  int stores = 1;    // S
  int items = 1;     // n
  int segments = 1;  // K
  double mnl_tau = 0.0;                     // fixed, not sampled (unidentifiable)
  std::vector<std::vector<int>> rankings;   // nonparametric only, size K
  std::optional<PeakTemplate> peaks;

  int eta_dim() const { return rate_param_count(rate); }
  bool samples_phi() const { return choice != ChoiceKind::nonparametric; }
  bool samples_tau() const { return choice == ChoiceKind::exogenous; }
  const PeakTemplate* peaks_ptr() const { return peaks ? &*peaks : nullptr; }

  void validate() const {
    if (stores < 1 || items < 1 || segments < 1)
      throw std::invalid_argument("model spec: dimensions must be positive");
    if (choice == ChoiceKind::nonparametric &&
        static_cast<int>(rankings.size()) != segments)
      throw std::invalid_argument("model spec: one ranking per segment required");
    if (rate == RateKind::hill_plus_peaks && !peaks)
      throw std::invalid_argument("model spec: hill_plus_peaks needs a peak template");
  }
};

// Free parameters in probability space.
struct ModelParams {
  std::vector<RateParams> rate;  // per store
  SegmentMixture mixture;

  void validate(const ModelSpec& spec) const {
    if (static_cast<int>(rate.size()) != spec.stores)
      throw std::invalid_argument("model params: one rate parameter set per store required");
    for (const auto& rp : rate) validate_rate_params(rp, spec.peaks_ptr());
    if (static_cast<int>(mixture.store_weights.size()) != spec.stores ||
        static_cast<int>(mixture.segment_count()) != spec.segments)
      throw std::invalid_argument("model params: mixture dimensions mismatch");
    validate_mixture(mixture, spec.items);
  }
};

// Flattening order of the sampled latent vector z, fixed across the whole
// code base: eta blocks per store, then expanded theta blocks per store,
// then expanded phi blocks per segment (mnl/exogenous), then expanded tau
// pairs per segment (exogenous). All gradients and samples use this order.
struct ParamLayout {
  int S = 0, K = 0, n = 0, eta_dim = 0;
  bool has_phi = false, has_tau = false;

  static ParamLayout of(const ModelSpec& spec) {
    ParamLayout l;
    l.S = spec.stores;
    l.K = spec.segments;
    l.n = spec.items;
    l.eta_dim = spec.eta_dim();
    l.has_phi = spec.samples_phi();
    l.has_tau = spec.samples_tau();
    return l;
  }

  int eta_offset(int store) const { return store * eta_dim; }
  int theta_offset(int store) const { return S * eta_dim + store * K; }
  int phi_offset(int k) const { return S * (eta_dim + K) + k * n; }
  int tau_offset(int k) const { return S * (eta_dim + K) + (has_phi ? K * n : 0) + 2 * k; }
  int size() const {
    return S * (eta_dim + K) + (has_phi ? K * n : 0) + (has_tau ? 2 * K : 0);
  }
  bool is_eta(int idx) const { return idx < S * eta_dim; }

  // Scalar names of the untransformed parameters, in report order:
  // eta.<store>.<v>, theta.<store>.<k>, phi.<k>.<i>, tau.<k> (1-based).
  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (int s = 0; s < S; ++s)
      for (int v = 0; v < eta_dim; ++v)
        names.push_back("eta." + std::to_string(s + 1) + "." + std::to_string(v + 1));
    for (int s = 0; s < S; ++s)
      for (int k = 0; k < K; ++k)
        names.push_back("theta." + std::to_string(s + 1) + "." + std::to_string(k + 1));
    if (has_phi)
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < n; ++i)
          names.push_back("phi." + std::to_string(k + 1) + "." + std::to_string(i + 1));
    if (has_tau)
      for (int k = 0; k < K; ++k) names.push_back("tau." + std::to_string(k + 1));
    return names;
  }
  int column_count() const {
    return S * (eta_dim + K) + (has_phi ? K * n : 0) + (has_tau ? K : 0);
  }
};

namespace detail {

inline void expand_block(const std::vector<double>& probs, double mass, double* out) {
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0)
      throw std::invalid_argument(
          "transform: probability entries must be strictly positive for the expanded-mean map");
    out[i] = probs[i] * mass;
  }
}

inline void normalize_block(const double* z, int len, std::vector<double>& out) {
  out.assign(len, 0.0);
  double sum = 0.0;
  for (int i = 0; i < len; ++i) {
    if (z[i] <= 0.0)
      throw std::invalid_argument("untransform: expanded coordinates must be strictly positive");
    sum += z[i];
  }
  for (int i = 0; i < len; ++i) out[i] = z[i] / sum;
}

}  // namespace detail

// Probability space -> expanded-mean coordinates. Each probability block is
// scaled by a fixed total mass (K for theta, n for phi, 2 for tau pairs);
// untransform renormalizes, so untransform(transform(p)) == p.
inline std::vector<double> transform(const ModelParams& params, const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::of(spec);
  std::vector<double> z(l.size());
  for (int s = 0; s < l.S; ++s)
    for (int v = 0; v < l.eta_dim; ++v) z[l.eta_offset(s) + v] = params.rate[s].values[v];
  for (int s = 0; s < l.S; ++s)
    detail::expand_block(params.mixture.store_weights[s], static_cast<double>(l.K),
                         z.data() + l.theta_offset(s));
  if (l.has_phi)
    for (int k = 0; k < l.K; ++k)
      detail::expand_block(params.mixture.segments[k].preference, static_cast<double>(l.n),
                           z.data() + l.phi_offset(k));
  if (l.has_tau)
    for (int k = 0; k < l.K; ++k) {
      const double tau = params.mixture.segments[k].substitution;
      if (tau <= 0.0 || tau >= 1.0)
        throw std::invalid_argument("transform: tau must lie strictly inside (0,1)");
      z[l.tau_offset(k)] = 2.0 * tau;
      z[l.tau_offset(k) + 1] = 2.0 * (1.0 - tau);
    }
  return z;
}

inline ModelParams untransform(const std::vector<double>& z, const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::of(spec);
  if (static_cast<int>(z.size()) != l.size())
    throw std::invalid_argument("untransform: state size does not match layout");
  ModelParams p;
  p.rate.resize(l.S);
  for (int s = 0; s < l.S; ++s) {
    p.rate[s].kind = spec.rate;
    p.rate[s].values.assign(z.begin() + l.eta_offset(s),
                            z.begin() + l.eta_offset(s) + l.eta_dim);
  }
  p.mixture.kind = spec.choice;
  p.mixture.store_weights.resize(l.S);
  for (int s = 0; s < l.S; ++s)
    detail::normalize_block(z.data() + l.theta_offset(s), l.K, p.mixture.store_weights[s]);
  p.mixture.segments.resize(l.K);
  for (int k = 0; k < l.K; ++k) {
    auto& seg = p.mixture.segments[k];
    if (l.has_phi)
      detail::normalize_block(z.data() + l.phi_offset(k), l.n, seg.preference);
    if (l.has_tau) {
      const double a = z[l.tau_offset(k)], b = z[l.tau_offset(k) + 1];
      if (a <= 0.0 || b <= 0.0)
        throw std::invalid_argument("untransform: expanded coordinates must be strictly positive");
      seg.substitution = a / (a + b);
    } else if (spec.choice == ChoiceKind::mnl) {
      seg.substitution = spec.mnl_tau;
    }
    if (spec.choice == ChoiceKind::nonparametric) seg.ranking = spec.rankings[k];
  }
  return p;
}

// Untransformed scalars in column_names() order (tau pairs collapse to tau).
inline std::vector<double> untransformed_columns(const std::vector<double>& z,
                                                 const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::of(spec);
  const ModelParams p = untransform(z, spec);
  std::vector<double> cols;
  cols.reserve(l.column_count());
  for (int s = 0; s < l.S; ++s)
    for (int v = 0; v < l.eta_dim; ++v) cols.push_back(p.rate[s].values[v]);
  for (int s = 0; s < l.S; ++s)
    for (int k = 0; k < l.K; ++k) cols.push_back(p.mixture.store_weights[s][k]);
  if (l.has_phi)
    for (int k = 0; k < l.K; ++k)
      for (int i = 0; i < l.n; ++i) cols.push_back(p.mixture.segments[k].preference[i]);
  if (l.has_tau)
    for (int k = 0; k < l.K; ++k) cols.push_back(p.mixture.segments[k].substitution);
  return cols;
}

// All ordered subsets of {0..n-1} of size 1..max_size, enumerated by size
// then lexicographically; the canonical segment order for nonparametric
// fits.
inline std::vector<std::vector<int>> enumerate_rankings(int n, int max_size) {
  if (max_size < 1 || max_size > n)
    throw std::invalid_argument("enumerate_rankings: size must be in [1, n]");
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::vector<char> used(n, 0);
  auto rec = [&](auto&& self, int depth) -> void {
    if (!cur.empty()) out.push_back(cur);
    if (depth == max_size) return;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = 1;
      cur.push_back(i);
      self(self, depth + 1);
      cur.pop_back();
      used[i] = 0;
    }
  };
  rec(rec, 0);
  // enumeration above is depth-first; reorder by (size, lexicographic)
  std::stable_sort(out.begin(), out.end(),
                   [](const std::vector<int>& a, const std::vector<int>& b) {
                     return a.size() < b.size();
                   });
  return out;
}

inline int ranking_index(const std::vector<std::vector<int>>& rankings,
                         const std::vector<int>& r) {
  for (std::size_t k = 0; k < rankings.size(); ++k)
    if (rankings[k] == r) return static_cast<int>(k);
  throw std::invalid_argument("ranking not found in enumeration");
}

}  // namespace stockdemand
