#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stockdemand/domain.hpp"
#include "stockdemand/params.hpp"
#include "stockdemand/sampler.hpp"
#include "stockdemand/simulator.hpp"

namespace stockdemand {

using json = nlohmann::json;

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Labels sort numerically when every label parses as a number, otherwise
// lexicographically; keeps simulated ids (p01, p02, ...) and date-style
// period ids in chronological order.
inline bool label_less(const std::string& a, const std::string& b) {
  auto as_num = [](const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  };
  double x, y;
  if (as_num(a, x) && as_num(b, y)) return x < y;
  return a < b;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& s, long line_no, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s +
                             "'");
  }
}

inline long parse_long(const std::string& s, long line_no, const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s +
                             "'");
  }
}

}  // namespace detail

// Simple CSV table: comment lines start with '#', the first remaining line
// is the header. No quoting; fields must not contain commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("missing required column '" + name + "'");
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    auto fields = detail::split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
      t.line_numbers.push_back(line_no);
    }
  }
  if (t.header.empty()) throw std::runtime_error("empty file: header row required");
  return t;
}

// Ingestion settings for transaction/stock files. Wall-clock times are
// rescaled onto [0, T] via the configured opening hours; when open/close
// are absent the file times are taken to already live on [0, T].
struct IngestConfig {
  std::string store_col = "store_id";
  std::string period_col = "period_id";
  std::string item_col = "item_id";
  std::string time_col = "purchase_time";
  std::string stock_col = "initial_stock";
  std::vector<std::string> items;  // catalog; empty = derive from data (sorted)
  double horizon = 1.0;
  std::optional<double> open_time, close_time;
  // Ties within one item+period break the strictly-increasing invariant;
  // "nudge" shifts later duplicates by one ulp, "reject" errors out.
  std::string tie_policy = "nudge";
};

struct ParseReport {
  long rows = 0;
  long nudged_ties = 0;
};

inline Dataset parse_transactions(std::istream& in, const IngestConfig& cfg,
                                  ParseReport* report = nullptr) {
  if (cfg.horizon <= 0.0) throw std::invalid_argument("ingest: horizon must be positive");
  const CsvTable t = read_csv(in);
  const int cs = t.column(cfg.store_col), cp = t.column(cfg.period_col),
            ci = t.column(cfg.item_col), ct = t.column(cfg.time_col);

  std::vector<std::string> catalog = cfg.items;
  if (catalog.empty()) {
    for (const auto& r : t.rows) catalog.push_back(r[ci]);
    std::sort(catalog.begin(), catalog.end(), label_less);
    catalog.erase(std::unique(catalog.begin(), catalog.end()), catalog.end());
  }
  std::map<std::string, int> item_index;
  for (std::size_t i = 0; i < catalog.size(); ++i) item_index[catalog[i]] = static_cast<int>(i);

  const int n = static_cast<int>(catalog.size());
  // (store, period) -> per-item times
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>,
                                 decltype(&label_less)>,
           decltype(&label_less)>
      acc(&label_less);

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long line_no = t.line_numbers[r];
    auto it = item_index.find(row[ci]);
    if (it == item_index.end())
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown item '" +
                               row[ci] + "'");
    double time = detail::parse_double(row[ct], line_no, "purchase time");
    if (cfg.open_time && cfg.close_time) {
      if (time < *cfg.open_time || time > *cfg.close_time)
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": time outside business hours");
      time = (time - *cfg.open_time) * cfg.horizon / (*cfg.close_time - *cfg.open_time);
    }
    if (time < 0.0 || time > cfg.horizon)
      throw std::runtime_error("line " + std::to_string(line_no) + ": time outside [0,T]");
    auto& store = acc.try_emplace(row[cs], &label_less).first->second;
    auto& period = store[row[cp]];
    if (period.empty()) period.assign(n, {});
    period[it->second].push_back(time);
  }

  Dataset ds;
  ds.horizon = cfg.horizon;
  ds.item_count = n;
  ds.item_names = catalog;
  long nudged = 0;
  for (auto& [store_id, periods] : acc) {
    StoreData sd;
    sd.store_id = store_id;
    for (auto& [period_id, times] : periods) {
      TimePeriod tp;
      tp.period_id = period_id;
      tp.purchase_times = std::move(times);
      for (auto& ts : tp.purchase_times) {
        std::sort(ts.begin(), ts.end());
        for (std::size_t j = 1; j < ts.size(); ++j) {
          if (ts[j] <= ts[j - 1]) {
            if (cfg.tie_policy != "nudge")
              throw std::runtime_error("tied purchase times for one item in period '" +
                                       period_id + "'");
            ts[j] = std::nextafter(ts[j - 1], std::numeric_limits<double>::infinity());
            ++nudged;
          }
        }
        // nudges past the horizon fold back down from T
        if (!ts.empty() && ts.back() > ds.horizon) {
          ts.back() = ds.horizon;
          for (std::size_t j = ts.size() - 1; j-- > 0;)
            if (ts[j] >= ts[j + 1])
              ts[j] = std::nextafter(ts[j + 1], -std::numeric_limits<double>::infinity());
        }
      }
      // stock defaults to the purchase count until a stock file or the
      // stock-from-last-purchase convention overrides it
      tp.initial_stock.assign(n, 0);
      for (int i = 0; i < n; ++i) tp.initial_stock[i] = tp.purchases(i);
      sd.periods.push_back(std::move(tp));
    }
    ds.stores.push_back(std::move(sd));
  }
  if (report) {
    report->rows = static_cast<long>(t.rows.size());
    report->nudged_ties = nudged;
  }
  if (!ds.stores.empty()) validate_dataset(ds);  // a header-only file is an empty dataset
  return ds;
}

// Sets every period's initial stock to its purchase count, the stock
// convention when stock files are unavailable: every item is treated as
// stocked out right after its last recorded purchase, which censors the
// final stretch of each period by construction.
inline void derive_stock_from_last_purchase(Dataset& ds) {
  for (auto& st : ds.stores)
    for (auto& p : st.periods)
      for (int i = 0; i < ds.item_count; ++i) p.initial_stock[i] = p.purchases(i);
}

inline void apply_stock_file(std::istream& in, const IngestConfig& cfg, Dataset& ds) {
  const CsvTable t = read_csv(in);
  const int cs = t.column(cfg.store_col), cp = t.column(cfg.period_col),
            ci = t.column(cfg.item_col), cn = t.column(cfg.stock_col);
  std::map<std::string, int> item_index;
  for (int i = 0; i < ds.item_count; ++i) item_index[ds.item_names[i]] = i;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long line_no = t.line_numbers[r];
    auto store = std::find_if(ds.stores.begin(), ds.stores.end(),
                              [&](const StoreData& s) { return s.store_id == t.rows[r][cs]; });
    if (store == ds.stores.end())
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown store '" +
                               t.rows[r][cs] + "'");
    auto period = std::find_if(store->periods.begin(), store->periods.end(),
                               [&](const TimePeriod& p) { return p.period_id == t.rows[r][cp]; });
    if (period == store->periods.end())
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown period '" +
                               t.rows[r][cp] + "'");
    auto item = item_index.find(t.rows[r][ci]);
    if (item == item_index.end())
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown item '" +
                               t.rows[r][ci] + "'");
    const long stock = detail::parse_long(t.rows[r][cn], line_no, "initial stock");
    if (stock < period->purchases(item->second))
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": initial stock below observed purchase count");
    period->initial_stock[item->second] = stock;
  }
  validate_dataset(ds);
}

inline void write_provenance(std::ostream& out, const std::string& kind,
                             const std::string& config_hash, std::uint64_t seed) {
  out << "# stockdemand " << kind << "; config_hash=" << config_hash << "; seed=" << seed
      << "\n";
}

inline void write_transactions(std::ostream& out, const Dataset& ds,
                               const std::string& config_hash, std::uint64_t seed) {
  write_provenance(out, "transactions", config_hash, seed);
  out << "store_id,period_id,item_id,purchase_time\n";
  out << std::setprecision(17);
  for (const auto& st : ds.stores)
    for (const auto& p : st.periods)
      for (int i = 0; i < ds.item_count; ++i)
        for (double t : p.purchase_times[i])
          out << st.store_id << ',' << p.period_id << ',' << ds.item_names[i] << ',' << t
              << '\n';
}

inline void write_stock(std::ostream& out, const Dataset& ds, const std::string& config_hash,
                        std::uint64_t seed) {
  write_provenance(out, "stock", config_hash, seed);
  out << "store_id,period_id,item_id,initial_stock\n";
  for (const auto& st : ds.stores)
    for (const auto& p : st.periods)
      for (int i = 0; i < ds.item_count; ++i)
        out << st.store_id << ',' << p.period_id << ',' << ds.item_names[i] << ','
            << p.initial_stock[i] << '\n';
}

// One row per posterior draw, named columns per untransformed parameter.
inline void write_samples_csv(std::ostream& out, const PosteriorSamples& samples,
                              const std::string& config_hash, std::uint64_t seed) {
  write_provenance(out, "samples", config_hash, seed);
  const auto names = ParamLayout::of(samples.spec).column_names();
  out << "chain,iteration";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t c = 0; c < samples.chain_count(); ++c)
    for (std::size_t i = 0; i < samples.draws_per_chain(); ++i) {
      out << (c + 1) << ',' << (i + 1);
      for (double v : untransformed_columns(samples.draws[c][i], samples.spec)) out << ',' << v;
      out << '\n';
    }
}

inline PosteriorSamples read_samples_csv(std::istream& in, const ModelSpec& spec) {
  const CsvTable t = read_csv(in);
  const ParamLayout l = ParamLayout::of(spec);
  const int cc = t.column("chain"), ci = t.column("iteration");
  const auto names = l.column_names();
  std::vector<int> cols;
  for (const auto& n : names) cols.push_back(t.column(n));

  PosteriorSamples out;
  out.spec = spec;
  std::map<long, std::vector<std::vector<double>>> by_chain;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long line_no = t.line_numbers[r];
    const long chain = detail::parse_long(t.rows[r][cc], line_no, "chain");
    (void)detail::parse_long(t.rows[r][ci], line_no, "iteration");
    ModelParams p;
    p.rate.resize(l.S);
    p.mixture.kind = spec.choice;
    p.mixture.store_weights.assign(l.S, std::vector<double>(l.K, 0.0));
    p.mixture.segments.resize(l.K);
    int idx = 0;
    for (int s = 0; s < l.S; ++s) {
      p.rate[s].kind = spec.rate;
      for (int v = 0; v < l.eta_dim; ++v)
        p.rate[s].values.push_back(
            detail::parse_double(t.rows[r][cols[idx++]], line_no, "eta"));
    }
    for (int s = 0; s < l.S; ++s)
      for (int k = 0; k < l.K; ++k)
        p.mixture.store_weights[s][k] =
            detail::parse_double(t.rows[r][cols[idx++]], line_no, "theta");
    for (int k = 0; k < l.K; ++k) {
      auto& seg = p.mixture.segments[k];
      if (l.has_phi)
        for (int i = 0; i < l.n; ++i) {
          seg.preference.push_back(detail::parse_double(t.rows[r][cols[idx]], line_no, "phi"));
          ++idx;
        }
      if (spec.choice == ChoiceKind::mnl) seg.substitution = spec.mnl_tau;
      if (spec.choice == ChoiceKind::nonparametric) seg.ranking = spec.rankings[k];
    }
    if (l.has_tau)
      for (int k = 0; k < l.K; ++k)
        p.mixture.segments[k].substitution =
            detail::parse_double(t.rows[r][cols[idx++]], line_no, "tau");
    by_chain[chain].push_back(transform(p, spec));
  }
  for (auto& [chain, draws] : by_chain) out.draws.push_back(std::move(draws));
  return out;
}

// First floor(fraction * L) periods of each store (clamped so both sides
// are nonempty) as training data, the rest as holdout.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("split: fraction must be in (0,1)");
  Dataset train = ds, test = ds;
  for (std::size_t s = 0; s < ds.stores.size(); ++s) {
    const auto& periods = ds.stores[s].periods;
    std::size_t cut = static_cast<std::size_t>(fraction * static_cast<double>(periods.size()));
    cut = std::min(std::max<std::size_t>(cut, 1), periods.size() - 1);
    train.stores[s].periods.assign(periods.begin(), periods.begin() + cut);
    test.stores[s].periods.assign(periods.begin() + cut, periods.end());
  }
  return {train, test};
}

// ---- JSON configuration ----------------------------------------------

inline PeakTemplate peaks_from_json(const json& j, double horizon) {
  PeakTemplate p;
  p.horizon = horizon;
  p.centers = j.at("centers").get<std::vector<double>>();
  p.widths = j.at("widths").get<std::vector<double>>();
  p.validate();
  return p;
}

inline ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec sc;
  sc.stores = j.at("stores").get<int>();
  sc.periods_per_store = j.at("periods_per_store").get<int>();
  sc.items = j.at("items").get<int>();
  sc.horizon = j.at("horizon").get<double>();
  sc.seed = j.value("seed", 0ULL);
  if (j.contains("item_names"))
    sc.item_names = j.at("item_names").get<std::vector<std::string>>();

  const json& rate = j.at("rate");
  sc.rate = rate_kind_from_name(rate.at("kind").get<std::string>());
  if (rate.contains("peaks")) sc.peaks = peaks_from_json(rate.at("peaks"), sc.horizon);
  if (rate.contains("values_per_store"))
    sc.rate_values = rate.at("values_per_store").get<std::vector<std::vector<double>>>();
  if (rate.contains("ranges"))
    for (const auto& r : rate.at("ranges"))
      sc.rate_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());

  const json& choice = j.at("choice");
  sc.choice = choice_kind_from_name(choice.at("kind").get<std::string>());
  for (const auto& s : choice.at("segments")) {
    SegmentParams seg;
    if (sc.choice == ChoiceKind::nonparametric) {
      for (int item : s.at("ranking").get<std::vector<int>>()) seg.ranking.push_back(item - 1);
    } else {
      seg.preference = s.at("preference").get<std::vector<double>>();
      seg.substitution = s.value("substitution", 0.0);
    }
    sc.segments.push_back(std::move(seg));
  }

  if (j.contains("theta")) {
    const json& th = j.at("theta");
    if (th.is_array()) {
      sc.theta = th.get<std::vector<std::vector<double>>>();
    } else if (th.is_object() && th.contains("dirichlet")) {
      sc.theta_alpha = th.at("dirichlet").get<std::vector<double>>();
    }
  }

  const json& stock = j.at("stock");
  if (stock.contains("fixed")) {
    sc.stock.kind = StockRule::Kind::fixed;
    sc.stock.fixed = stock.at("fixed").get<std::vector<long>>();
  } else {
    sc.stock.kind = StockRule::Kind::uniform;
    sc.stock.lo = stock.at("uniform").at(0).get<long>();
    sc.stock.hi = stock.at("uniform").at(1).get<long>();
  }
  return sc;
}

inline std::vector<std::pair<double, double>> default_eta_box(RateKind kind, double T) {
  switch (kind) {
    case RateKind::homogeneous: return {{1e-6, 1e6}};
    case RateKind::hill: return {{1e-4, 1e6}, {1.0, 100.0}, {1e-3 * T, 10.0 * T}};
    case RateKind::hill_plus_peaks:
      return {{1e-4, 1e6}, {1.0, 100.0}, {1e-3 * T, 10.0 * T}, {1e-8, 1e6}};
  }
  return {};
}

struct RunConfig {
  IngestConfig ingest;
  ModelSpec model;  // stores/items filled in after the data are parsed
  SamplerConfig sampler;
  int max_ranking_size = 2;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Dimensions that depend on the parsed data: store count, item count, and
// the nonparametric segment enumeration when rankings were not listed.
inline void finalize_model_spec(RunConfig& rc, const Dataset& ds) {
  rc.model.stores = static_cast<int>(ds.stores.size());
  rc.model.items = ds.item_count;
  if (rc.model.choice == ChoiceKind::nonparametric && rc.model.rankings.empty()) {
    rc.model.rankings = enumerate_rankings(ds.item_count, rc.max_ranking_size);
    rc.model.segments = static_cast<int>(rc.model.rankings.size());
  }
  rc.model.validate();
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  rc.config_hash = hex64(fnv1a64(j.dump()));
  rc.seed = j.value("seed", 0ULL);
  rc.train_fraction = j.value("train_fraction", 0.8);

  rc.ingest.horizon = j.at("horizon").get<double>();
  if (j.contains("open_time")) rc.ingest.open_time = j.at("open_time").get<double>();
  if (j.contains("close_time")) rc.ingest.close_time = j.at("close_time").get<double>();
  if (j.contains("items")) rc.ingest.items = j.at("items").get<std::vector<std::string>>();
  if (j.contains("columns")) {
    const json& c = j.at("columns");
    rc.ingest.store_col = c.value("store", rc.ingest.store_col);
    rc.ingest.period_col = c.value("period", rc.ingest.period_col);
    rc.ingest.item_col = c.value("item", rc.ingest.item_col);
    rc.ingest.time_col = c.value("time", rc.ingest.time_col);
    rc.ingest.stock_col = c.value("stock", rc.ingest.stock_col);
  }
  if (j.contains("tie_policy")) rc.ingest.tie_policy = j.at("tie_policy").get<std::string>();

  const json& m = j.at("model");
  rc.model.rate = rate_kind_from_name(m.at("rate").get<std::string>());
  rc.model.choice = choice_kind_from_name(m.at("choice").get<std::string>());
  if (m.contains("peaks")) rc.model.peaks = peaks_from_json(m.at("peaks"), rc.ingest.horizon);
  rc.model.mnl_tau = m.value("mnl_tau", 0.0);
  if (rc.model.choice == ChoiceKind::nonparametric) {
    if (m.contains("rankings") && m.at("rankings").is_array()) {
      for (const auto& r : m.at("rankings")) {
        std::vector<int> rank;
        for (int item : r.get<std::vector<int>>()) rank.push_back(item - 1);
        rc.model.rankings.push_back(std::move(rank));
      }
    }
    // else: enumerate once the item count is known (max_ranking_size)
    rc.model.segments = static_cast<int>(rc.model.rankings.size());
  } else {
    rc.model.segments = m.value("segments", 1);
  }

  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    rc.sampler.step_a = s.value("a", rc.sampler.step_a);
    rc.sampler.step_b = s.value("b", rc.sampler.step_b);
    rc.sampler.step_c = s.value("c", rc.sampler.step_c);
    rc.sampler.minibatch = s.value("minibatch", rc.sampler.minibatch);
    rc.sampler.iterations = s.value("iterations", rc.sampler.iterations);
    rc.sampler.chains = s.value("chains", rc.sampler.chains);
    rc.sampler.burn_in = s.value("burn_in", rc.sampler.burn_in);
    rc.sampler.prior.alpha = s.value("alpha", 1.0);
    rc.sampler.prior.beta = s.value("beta", 1.0);
    if (s.contains("gamma")) {
      rc.sampler.prior.gamma1 = s.at("gamma").at(0).get<double>();
      rc.sampler.prior.gamma2 = s.at("gamma").at(1).get<double>();
    }
    if (s.contains("eta_box"))
      for (const auto& b : s.at("eta_box"))
        rc.sampler.prior.eta_box.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
  }
  if (rc.sampler.prior.eta_box.empty())
    rc.sampler.prior.eta_box = default_eta_box(rc.model.rate, rc.ingest.horizon);
  rc.sampler.seed = rc.seed;
  rc.max_ranking_size = m.value("max_ranking_size", 2);
  return rc;
}

}  // namespace stockdemand
