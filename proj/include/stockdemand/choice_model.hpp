#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stockdemand {

enum class ChoiceKind { mnl, exogenous, nonparametric };

inline std::string choice_kind_name(ChoiceKind k) {
  switch (k) {
    case ChoiceKind::mnl: return "mnl";
    case ChoiceKind::exogenous: return "exogenous";
    case ChoiceKind::nonparametric: return "nonparametric";
  }
  return "?";
}

inline ChoiceKind choice_kind_from_name(const std::string& s) {
  if (s == "mnl") return ChoiceKind::mnl;
  if (s == "exogenous") return ChoiceKind::exogenous;
  if (s == "nonparametric") return ChoiceKind::nonparametric;
  throw std::invalid_argument("unknown choice kind '" + s + "'");
}

// Parameters of one customer segment. For mnl/exogenous, `preference` is a
// probability vector over the n items and `substitution` is tau; for the
// nonparametric model, `ranking` is the fixed ordered subset of items
// (0-based) and the continuous fields are unused.
struct SegmentParams {
  std::vector<double> preference;
  double substitution = 0.0;
  std::vector<int> ranking;
};

// Segments shared across stores, mixed per store with weights theta.
struct SegmentMixture {
  ChoiceKind kind = ChoiceKind::exogenous;
  std::vector<SegmentParams> segments;
  std::vector<std::vector<double>> store_weights;  // theta[store][segment]

  std::size_t segment_count() const { return segments.size(); }
  std::size_t store_count() const { return store_weights.size(); }
};

inline void validate_segment(ChoiceKind kind, const SegmentParams& seg, int n) {
  if (kind == ChoiceKind::nonparametric) {
    if (seg.ranking.empty()) throw std::invalid_argument("segment: empty ranking");
    std::vector<char> seen(n, 0);
    for (int item : seg.ranking) {
      if (item < 0 || item >= n) throw std::invalid_argument("segment: ranking item out of range");
      if (seen[item]) throw std::invalid_argument("segment: duplicate item in ranking");
      seen[item] = 1;
    }
    return;
  }
  if (static_cast<int>(seg.preference.size()) != n)
    throw std::invalid_argument("segment: preference vector must have n entries");
  double sum = 0.0;
  for (double p : seg.preference) {
    if (p < 0.0) throw std::invalid_argument("segment: negative preference weight");
    sum += p;
  }
  if (sum <= 0.0 || std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("segment: preference weights must sum to 1");
  if (seg.substitution < 0.0 || seg.substitution > (kind == ChoiceKind::mnl ? 1e300 : 1.0))
    throw std::invalid_argument("segment: substitution parameter out of range");
  if (kind == ChoiceKind::exogenous && n < 2)
    throw std::invalid_argument("segment: exogenous model needs at least 2 items");
}

inline void validate_mixture(const SegmentMixture& mix, int n) {
  if (mix.segments.empty()) throw std::invalid_argument("mixture: no segments");
  for (const auto& seg : mix.segments) validate_segment(mix.kind, seg, n);
  for (const auto& theta : mix.store_weights) {
    if (theta.size() != mix.segments.size())
      throw std::invalid_argument("mixture: theta dimension mismatch");
    double sum = 0.0;
    for (double w : theta) {
      if (w < 0.0) throw std::invalid_argument("mixture: negative segment weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("mixture: segment weights must sum to 1");
  }
}

// All purchase-probability vectors below have n+1 entries: slot 0 is the
// no-purchase option, slot i (i >= 1) is item i-1 of the stock vector.

inline std::vector<double> purchase_probs_mnl(const std::vector<int>& s,
                                              const std::vector<double>& phi, double tau) {
  const std::size_t n = s.size();
  if (tau < 0.0) throw std::invalid_argument("mnl: tau must be nonnegative");
  double in_stock_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (s[i]) in_stock_mass += phi[i];
  const double denom = tau + in_stock_mass;
  if (denom <= 0.0)
    throw std::invalid_argument("mnl: tau = 0 with no stock leaves probabilities undefined");
  std::vector<double> f(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (s[i]) f[i + 1] = phi[i] / denom;
  f[0] = 1.0 - in_stock_mass / denom;
  return f;
}

// Eq. probability of the two-stage story: first choice from phi; if out of
// stock, substitute with probability tau to a second choice drawn from phi
// reweighted to exclude the first.
inline std::vector<double> purchase_probs_exogenous(const std::vector<int>& s,
                                                    const std::vector<double>& phi, double tau) {
  const std::size_t n = s.size();
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("exogenous: tau must be in [0,1]");
  std::vector<double> f(n + 1, 0.0);
  bool any_in_stock = false;
  for (std::size_t i = 0; i < n; ++i) any_in_stock |= (s[i] != 0);
  if (!any_in_stock) {
    f[0] = 1.0;
    return f;
  }
  double total = 0.0;
  for (double p : phi) total += p;
  // A = sum over out-of-stock j of phi_j / sum_{v != j} phi_v
  double A = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (s[j] || phi[j] == 0.0) continue;
    const double rest = total - phi[j];
    if (rest <= 0.0)
      throw std::invalid_argument(
          "exogenous: degenerate preference (phi_j = 1 for an out-of-stock item)");
    A += phi[j] / rest;
  }
  double purchase_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!s[i]) continue;
    f[i + 1] = phi[i] * (1.0 + tau * A);
    purchase_mass += f[i + 1];
  }
  f[0] = 1.0 - purchase_mass;
  return f;
}

inline std::vector<double> purchase_probs_nonparametric(const std::vector<int>& s,
                                                        const std::vector<int>& ranking) {
  std::vector<double> f(s.size() + 1, 0.0);
  for (int item : ranking) {
    if (s[item]) {
      f[item + 1] = 1.0;
      return f;
    }
  }
  f[0] = 1.0;
  return f;
}

inline std::vector<double> purchase_probs(const std::vector<int>& s, ChoiceKind kind,
                                          const SegmentParams& seg) {
  switch (kind) {
    case ChoiceKind::mnl: return purchase_probs_mnl(s, seg.preference, seg.substitution);
    case ChoiceKind::exogenous:
      return purchase_probs_exogenous(s, seg.preference, seg.substitution);
    case ChoiceKind::nonparametric: return purchase_probs_nonparametric(s, seg.ranking);
  }
  return {};
}

// pi_i = sum_k theta_k f_i(s, segment k)
inline std::vector<double> mixture_probs(const std::vector<int>& s, const SegmentMixture& mix,
                                         std::size_t store) {
  const auto& theta = mix.store_weights.at(store);
  std::vector<double> pi(s.size() + 1, 0.0);
  for (std::size_t k = 0; k < mix.segments.size(); ++k) {
    const auto f = purchase_probs(s, mix.kind, mix.segments[k]);
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] += theta[k] * f[i];
  }
  return pi;
}

// Exact partials of the purchase probabilities with respect to the raw phi
// coordinates and tau, differentiating the formulas as written (no simplex
// substitution), so they are checkable by finite differences off the
// simplex. dphi is (n+1) x n row-major: dphi[i*n + u] = d f_i / d phi_u.
struct ChoiceGrad {
  std::vector<double> dphi;
  std::vector<double> dtau;
};

inline ChoiceGrad grad_choice_mnl(const std::vector<int>& s, const std::vector<double>& phi,
                                  double tau) {
  const std::size_t n = s.size();
  double in_stock_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (s[i]) in_stock_mass += phi[i];
  const double denom = tau + in_stock_mass;
  if (denom <= 0.0)
    throw std::invalid_argument("mnl: tau = 0 with no stock leaves probabilities undefined");
  const double d2 = denom * denom;
  ChoiceGrad g;
  g.dphi.assign((n + 1) * n, 0.0);
  g.dtau.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!s[i]) continue;
    for (std::size_t u = 0; u < n; ++u)
      g.dphi[(i + 1) * n + u] = ((i == u ? denom : 0.0) - phi[i] * (s[u] ? 1.0 : 0.0)) / d2;
    g.dtau[i + 1] = -phi[i] / d2;
  }
  for (std::size_t u = 0; u < n; ++u)
    g.dphi[u] = -(s[u] ? 1.0 : 0.0) * (denom - in_stock_mass) / d2;
  g.dtau[0] = in_stock_mass / d2;
  return g;
}

inline ChoiceGrad grad_choice_exogenous(const std::vector<int>& s,
                                        const std::vector<double>& phi, double tau) {
  const std::size_t n = s.size();
  ChoiceGrad g;
  g.dphi.assign((n + 1) * n, 0.0);
  g.dtau.assign(n + 1, 0.0);
  bool any_in_stock = false;
  for (std::size_t i = 0; i < n; ++i) any_in_stock |= (s[i] != 0);
  if (!any_in_stock) return g;  // f = indicator of no-purchase, constant

  double total = 0.0;
  for (double p : phi) total += p;
  double A = 0.0;
  std::vector<double> dA(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (s[j] || phi[j] == 0.0) continue;
    const double rest = total - phi[j];
    if (rest <= 0.0)
      throw std::invalid_argument(
          "exogenous: degenerate preference (phi_j = 1 for an out-of-stock item)");
    A += phi[j] / rest;
    // d/dphi_u [phi_j / rest]: rest depends on every coordinate except j
    for (std::size_t u = 0; u < n; ++u) {
      if (u == j)
        dA[u] += 1.0 / rest;
      else
        dA[u] -= phi[j] / (rest * rest);
    }
  }
  const double boost = 1.0 + tau * A;
  for (std::size_t i = 0; i < n; ++i) {
    if (!s[i]) continue;
    for (std::size_t u = 0; u < n; ++u) {
      const double d = (i == u ? boost : 0.0) + phi[i] * tau * dA[u];
      g.dphi[(i + 1) * n + u] = d;
      g.dphi[u] -= d;  // f_0 = 1 - sum of purchase probabilities
    }
    const double dt = phi[i] * A;
    g.dtau[i + 1] = dt;
    g.dtau[0] -= dt;
  }
  return g;
}

inline ChoiceGrad grad_choice(const std::vector<int>& s, ChoiceKind kind,
                              const SegmentParams& seg) {
  switch (kind) {
    case ChoiceKind::mnl: return grad_choice_mnl(s, seg.preference, seg.substitution);
    case ChoiceKind::exogenous:
      return grad_choice_exogenous(s, seg.preference, seg.substitution);
    case ChoiceKind::nonparametric: {
      // rankings are fixed; only the segment weights are learned
      ChoiceGrad g;
      g.dphi.assign((s.size() + 1) * s.size(), 0.0);
      g.dtau.assign(s.size() + 1, 0.0);
      return g;
    }
  }
  return {};
}

}  // namespace stockdemand
