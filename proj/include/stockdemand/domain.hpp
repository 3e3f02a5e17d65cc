#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stockdemand {

// One period of observations at one store: per-item sorted purchase times
// t_{i,1} < ... < t_{i,m_i} and the known initial stock N_i. m_i <= N_i;
// equality means the item stocked out during the period.
struct TimePeriod {
  std::string period_id;
  std::vector<std::vector<double>> purchase_times;  // [item][j], strictly increasing
  std::vector<long> initial_stock;                  // [item]

  std::size_t item_count() const { return initial_stock.size(); }
  long purchases(std::size_t item) const {
    return static_cast<long>(purchase_times[item].size());
  }
  long total_purchases() const {
    long m = 0;
    for (const auto& ts : purchase_times) m += static_cast<long>(ts.size());
    return m;
  }
};

struct StoreData {
  std::string store_id;
  std::vector<TimePeriod> periods;
};

struct Dataset {
  std::vector<StoreData> stores;
  double horizon = 0.0;  // T, shared by all periods
  int item_count = 0;    // n
  std::vector<std::string> item_names;

  long total_purchases() const {
    long m = 0;
    for (const auto& st : stores)
      for (const auto& p : st.periods) m += p.total_purchases();
    return m;
  }
};

inline void validate_period(const TimePeriod& p, int n, double T) {
  if (static_cast<int>(p.purchase_times.size()) != n ||
      static_cast<int>(p.initial_stock.size()) != n)
    throw std::invalid_argument("period '" + p.period_id + "': item dimension mismatch");
  for (int i = 0; i < n; ++i) {
    if (p.initial_stock[i] < 0)
      throw std::invalid_argument("period '" + p.period_id + "': negative initial stock");
    const auto& ts = p.purchase_times[i];
    if (static_cast<long>(ts.size()) > p.initial_stock[i])
      throw std::invalid_argument("period '" + p.period_id +
                                  "': more purchases than initial stock for item " +
                                  std::to_string(i + 1));
    for (std::size_t j = 0; j < ts.size(); ++j) {
      if (ts[j] < 0.0 || ts[j] > T)
        throw std::invalid_argument("period '" + p.period_id + "': purchase time outside [0,T]");
      if (j > 0 && ts[j] <= ts[j - 1])
        throw std::invalid_argument("period '" + p.period_id +
                                    "': purchase times must be strictly increasing per item");
    }
  }
}

inline void validate_dataset(const Dataset& d) {
  if (d.horizon <= 0.0) throw std::invalid_argument("dataset: horizon must be positive");
  if (d.item_count <= 0) throw std::invalid_argument("dataset: item_count must be positive");
  if (d.stores.empty()) throw std::invalid_argument("dataset: no stores");
  for (const auto& st : d.stores) {
    if (st.periods.empty())
      throw std::invalid_argument("store '" + st.store_id + "': needs at least one period");
    for (const auto& p : st.periods) validate_period(p, d.item_count, d.horizon);
  }
}

// Step function s(t) of item availability over one period. Intervals are
// [q_r, q_{r+1}) with q_1 = 0 and q_Q = T; the vector on each interval is
// componentwise nonincreasing across intervals since stock is never
// replenished mid-period.
//
// Convention at an exact stockout time q: the purchase that exhausts the
// stock is itself valid (the buyer saw the item in stock), but evaluation
// at t = q reports the item out of stock. interval_at() implements the
// left-closed lookup; interval_before() implements the left-limit lookup
// used for observed purchases.
struct StockTrajectory {
  std::vector<double> changepoints;      // size Q >= 2
  std::vector<std::vector<int>> stock;   // [interval][item], size Q-1

  std::size_t interval_count() const { return stock.size(); }
  double horizon() const { return changepoints.back(); }

  std::size_t interval_at(double t) const {
    check_range(t);
    auto it = std::upper_bound(changepoints.begin(), changepoints.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - changepoints.begin());
    if (idx == 0) return 0;
    return std::min(idx - 1, stock.size() - 1);
  }

  std::size_t interval_before(double t) const {
    check_range(t);
    auto it = std::lower_bound(changepoints.begin(), changepoints.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - changepoints.begin());
    if (idx == 0) return 0;
    return std::min(idx - 1, stock.size() - 1);
  }

  const std::vector<int>& stock_at(double t) const { return stock[interval_at(t)]; }

 private:
  void check_range(double t) const {
    if (t < changepoints.front() || t > changepoints.back())
      throw std::out_of_range("stock lookup outside [0,T]");
  }
};

// Changepoints are {0, T} plus the stockout time of every item that sold
// out (its N_i-th purchase time). Items with zero initial stock are out of
// stock from t = 0.
inline StockTrajectory build_stock_trajectory(const TimePeriod& period, int n, double T) {
  validate_period(period, n, T);

  std::vector<double> outs(n, -1.0);  // stockout time, or -1 if never
  for (int i = 0; i < n; ++i) {
    if (period.initial_stock[i] == 0) {
      outs[i] = 0.0;
    } else if (period.purchases(i) == period.initial_stock[i]) {
      outs[i] = period.purchase_times[i].back();
    }
  }

  std::vector<double> q;
  q.push_back(0.0);
  for (int i = 0; i < n; ++i)
    if (outs[i] > 0.0 && outs[i] < T) q.push_back(outs[i]);
  q.push_back(T);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());

  StockTrajectory traj;
  traj.changepoints = q;
  traj.stock.resize(q.size() - 1);
  for (std::size_t r = 0; r + 1 < q.size(); ++r) {
    traj.stock[r].resize(n);
    for (int i = 0; i < n; ++i)
      traj.stock[r][i] = (outs[i] < 0.0 || outs[i] > q[r]) ? 1 : 0;
  }
  return traj;
}

}  // namespace stockdemand
