#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace stockdemand {

enum class RateKind { homogeneous, hill, hill_plus_peaks };

inline int rate_param_count(RateKind k) {
  switch (k) {
    case RateKind::homogeneous: return 1;
    case RateKind::hill: return 3;
    case RateKind::hill_plus_peaks: return 4;
  }
  return 0;
}

inline std::string rate_kind_name(RateKind k) {
  switch (k) {
    case RateKind::homogeneous: return "homogeneous";
    case RateKind::hill: return "hill";
    case RateKind::hill_plus_peaks: return "hill_plus_peaks";
  }
  return "?";
}

inline RateKind rate_kind_from_name(const std::string& s) {
  if (s == "homogeneous") return RateKind::homogeneous;
  if (s == "hill") return RateKind::hill;
  if (s == "hill_plus_peaks") return RateKind::hill_plus_peaks;
  throw std::invalid_argument("unknown rate kind '" + s + "'");
}

// Arrival intensity parameters eta for one store.
//   homogeneous:      lambda(t) = eta1
//   hill:             lambda(t) = eta1 (eta2/eta3) (t/eta3)^(eta2-1)
//                                 (1 + (t/eta3)^eta2)^-2
//   hill_plus_peaks:  hill plus eta4 * template(t)
// The hill intensity is the derivative of eta1 * H(t), with
// H(t) = (t/eta3)^eta2 / (1 + (t/eta3)^eta2), so Lambda has a closed form.
struct RateParams {
  RateKind kind = RateKind::homogeneous;
  std::vector<double> values;
};

// Fixed additive shape for recurring intra-period rush times: a sum of
// truncated Gaussian bumps, each normalized to unit mass over [0, T], so a
// single learned weight scales the whole template and the antiderivative
// stays closed form via erf.
struct PeakTemplate {
  std::vector<double> centers;
  std::vector<double> widths;
  double horizon = 0.0;

  std::size_t peak_count() const { return centers.size(); }

  void validate() const {
    if (horizon <= 0.0) throw std::invalid_argument("peak template: horizon must be positive");
    if (centers.size() != widths.size())
      throw std::invalid_argument("peak template: centers/widths size mismatch");
    for (std::size_t p = 0; p < centers.size(); ++p) {
      if (centers[p] <= 0.0 || centers[p] >= horizon)
        throw std::invalid_argument("peak template: center outside (0,T)");
      if (widths[p] <= 0.0) throw std::invalid_argument("peak template: width must be positive");
    }
  }

  double value(double t) const {
    double v = 0.0;
    for (std::size_t p = 0; p < centers.size(); ++p) {
      const double x = (t - centers[p]) / widths[p];
      v += std::exp(-0.5 * x * x) * 0.3989422804014326779399461 / (widths[p] * mass(p));
    }
    return v;
  }

  double integral(double t0, double t1) const {
    double v = 0.0;
    for (std::size_t p = 0; p < centers.size(); ++p)
      v += (ncdf((t1 - centers[p]) / widths[p]) - ncdf((t0 - centers[p]) / widths[p])) / mass(p);
    return v;
  }

  // upper bound on value() over [0,T]
  double max_height() const {
    double v = 0.0;
    for (std::size_t p = 0; p < centers.size(); ++p)
      v += 0.3989422804014326779399461 / (widths[p] * mass(p));
    return v;
  }

 private:
  static double ncdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244008444); }

  double mass(std::size_t p) const {
    return ncdf((horizon - centers[p]) / widths[p]) - ncdf((0.0 - centers[p]) / widths[p]);
  }
};

inline void validate_rate_params(const RateParams& rp, const PeakTemplate* tmpl = nullptr) {
  const int want = rate_param_count(rp.kind);
  if (static_cast<int>(rp.values.size()) != want)
    throw std::invalid_argument("rate params: " + rate_kind_name(rp.kind) + " needs " +
                                std::to_string(want) + " parameters");
  if (rp.kind == RateKind::homogeneous) {
    if (rp.values[0] < 0.0) throw std::invalid_argument("rate params: eta1 must be nonnegative");
    return;
  }
  for (int v = 0; v < 3; ++v)
    if (rp.values[v] <= 0.0)
      throw std::invalid_argument("rate params: hill parameters must be positive");
  if (rp.kind == RateKind::hill_plus_peaks) {
    if (rp.values[3] < 0.0) throw std::invalid_argument("rate params: eta4 must be nonnegative");
    if (tmpl == nullptr)
      throw std::invalid_argument("rate params: hill_plus_peaks needs a peak template");
    tmpl->validate();
  }
}

namespace detail {

inline double hill_eval(double eta1, double eta2, double eta3, double t) {
  if (t == 0.0) {
    if (eta2 > 1.0) return 0.0;
    if (eta2 == 1.0) return eta1 / eta3;
    return std::numeric_limits<double>::infinity();
  }
  const double x = t / eta3;
  const double u = std::pow(x, eta2);
  const double d = 1.0 + u;
  return eta1 * (eta2 / eta3) * std::pow(x, eta2 - 1.0) / (d * d);
}

// H(t) = u / (1+u), u = (t/eta3)^eta2
inline double hill_cdf(double eta2, double eta3, double t) {
  if (t == 0.0) return 0.0;
  const double u = std::pow(t / eta3, eta2);
  return u / (1.0 + u);
}

}  // namespace detail

inline double eval_rate(const RateParams& rp, const PeakTemplate* tmpl, double t) {
  switch (rp.kind) {
    case RateKind::homogeneous:
      return rp.values[0];
    case RateKind::hill:
      return detail::hill_eval(rp.values[0], rp.values[1], rp.values[2], t);
    case RateKind::hill_plus_peaks:
      return detail::hill_eval(rp.values[0], rp.values[1], rp.values[2], t) +
             rp.values[3] * tmpl->value(t);
  }
  return 0.0;
}

inline double integrate_rate(const RateParams& rp, const PeakTemplate* tmpl, double t0,
                             double t1) {
  if (t0 > t1) throw std::invalid_argument("integrate_rate: t0 > t1");
  switch (rp.kind) {
    case RateKind::homogeneous:
      return rp.values[0] * (t1 - t0);
    case RateKind::hill:
      return rp.values[0] * (detail::hill_cdf(rp.values[1], rp.values[2], t1) -
                             detail::hill_cdf(rp.values[1], rp.values[2], t0));
    case RateKind::hill_plus_peaks:
      return rp.values[0] * (detail::hill_cdf(rp.values[1], rp.values[2], t1) -
                             detail::hill_cdf(rp.values[1], rp.values[2], t0)) +
             rp.values[3] * tmpl->integral(t0, t1);
  }
  return 0.0;
}

// d lambda(t) / d eta, written into grad[0..|eta|-1]
inline void grad_rate(const RateParams& rp, const PeakTemplate* tmpl, double t,
                      std::vector<double>& grad) {
  grad.assign(rp.values.size(), 0.0);
  if (rp.kind == RateKind::homogeneous) {
    grad[0] = 1.0;
    return;
  }
  const double eta1 = rp.values[0], eta2 = rp.values[1], eta3 = rp.values[2];
  if (t == 0.0) {
    if (eta2 == 1.0) grad[0] = 1.0 / eta3;  // lambda = eta1/eta3 at t=0
    if (rp.kind == RateKind::hill_plus_peaks) grad[3] = tmpl->value(t);
    return;
  }
  const double lam = detail::hill_eval(eta1, eta2, eta3, t);
  const double x = t / eta3;
  const double u = std::pow(x, eta2);
  const double lnx = std::log(x);
  grad[0] = lam / eta1;
  grad[1] = lam * (1.0 / eta2 + lnx * (1.0 - u) / (1.0 + u));
  grad[2] = lam * (eta2 / eta3) * (u - 1.0) / (u + 1.0);
  if (rp.kind == RateKind::hill_plus_peaks) grad[3] = tmpl->value(t);
}

// d Lambda(t0,t1) / d eta
inline void grad_integral(const RateParams& rp, const PeakTemplate* tmpl, double t0, double t1,
                          std::vector<double>& grad) {
  if (t0 > t1) throw std::invalid_argument("grad_integral: t0 > t1");
  grad.assign(rp.values.size(), 0.0);
  if (rp.kind == RateKind::homogeneous) {
    grad[0] = t1 - t0;
    return;
  }
  const double eta1 = rp.values[0], eta2 = rp.values[1], eta3 = rp.values[2];
  // dH/deta2 = u ln(x) / (1+u)^2, dH/deta3 = -eta2 u / (eta3 (1+u)^2)
  auto dH2 = [&](double t) {
    if (t == 0.0) return 0.0;
    const double x = t / eta3;
    const double u = std::pow(x, eta2);
    const double d = 1.0 + u;
    return u * std::log(x) / (d * d);
  };
  auto dH3 = [&](double t) {
    if (t == 0.0) return 0.0;
    const double u = std::pow(t / eta3, eta2);
    const double d = 1.0 + u;
    return -eta2 * u / (eta3 * d * d);
  };
  grad[0] = detail::hill_cdf(eta2, eta3, t1) - detail::hill_cdf(eta2, eta3, t0);
  grad[1] = eta1 * (dH2(t1) - dH2(t0));
  grad[2] = eta1 * (dH3(t1) - dH3(t0));
  if (rp.kind == RateKind::hill_plus_peaks) grad[3] = tmpl->integral(t0, t1);
}

// Least upper bound we can state in closed form, used by the thinning
// sampler. Throws for hill shapes with eta2 < 1, whose intensity diverges
// at t = 0.
inline double rate_upper_bound(const RateParams& rp, const PeakTemplate* tmpl, double T) {
  switch (rp.kind) {
    case RateKind::homogeneous:
      return rp.values[0];
    case RateKind::hill:
    case RateKind::hill_plus_peaks: {
      const double eta1 = rp.values[0], eta2 = rp.values[1], eta3 = rp.values[2];
      double hill_max;
      if (eta2 < 1.0) {
        throw std::invalid_argument("rate_upper_bound: hill intensity with shape < 1 is unbounded");
      } else if (eta2 == 1.0) {
        hill_max = eta1 / eta3;  // decreasing from t = 0
      } else {
        const double mode = eta3 * std::pow((eta2 - 1.0) / (eta2 + 1.0), 1.0 / eta2);
        hill_max = detail::hill_eval(eta1, eta2, eta3, std::min(mode, T));
      }
      if (rp.kind == RateKind::hill_plus_peaks) hill_max += rp.values[3] * tmpl->max_height();
      return hill_max;
    }
  }
  return 0.0;
}

}  // namespace stockdemand
