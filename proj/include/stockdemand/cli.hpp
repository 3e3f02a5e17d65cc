#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stockdemand/io.hpp"
#include "stockdemand/predictive.hpp"

namespace stockdemand {

namespace cli {

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

inline Dataset load_dataset(const RunConfig& rc, const std::string& data_path,
                            const std::string& stock_path, std::ostream& log) {
  std::ifstream in(data_path);
  if (!in) throw std::runtime_error("cannot open '" + data_path + "'");
  ParseReport rep;
  Dataset ds = parse_transactions(in, rc.ingest, &rep);
  if (rep.nudged_ties > 0)
    log << "warning: " << rep.nudged_ties << " tied purchase times nudged by one ulp\n";
  if (!stock_path.empty()) {
    std::ifstream sin(stock_path);
    if (!sin) throw std::runtime_error("cannot open '" + stock_path + "'");
    apply_stock_file(sin, rc.ingest, ds);
  } else {
    derive_stock_from_last_purchase(ds);
    log << "warning: no stock file; initial stock set to per-period purchase counts, so "
           "demand after each item's last purchase is censored by construction\n";
  }
  return ds;
}

inline std::vector<int> parse_stock_level(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (cur != "0" && cur != "1")
        throw std::invalid_argument("stock level must be comma-separated 0/1 flags");
      out.push_back(cur == "1" ? 1 : 0);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

inline json summary_to_json(const PredictiveSummary& s) {
  return json{{"mean", s.mean}, {"q025", s.q025},   {"q25", s.q25},
              {"median", s.median}, {"q75", s.q75}, {"q975", s.q975}};
}

inline void write_prediction_files(const std::filesystem::path& dir, const std::string& tag,
                                   const PredictiveDistribution& dist,
                                   const std::vector<std::string>& item_names,
                                   const std::vector<long>* actual, const RunConfig& rc) {
  auto draws = open_out(dir / (tag + "_draws.csv"));
  write_provenance(draws, "prediction draws", rc.config_hash, rc.seed);
  draws << "draw";
  for (const auto& n : item_names) draws << ',' << n;
  draws << ",total\n";
  for (std::size_t d = 0; d < dist.counts.size(); ++d) {
    draws << (d + 1);
    for (long c : dist.counts[d]) draws << ',' << c;
    draws << ',' << dist.totals[d] << '\n';
  }

  auto summary = open_out(dir / (tag + "_summary.csv"));
  write_provenance(summary, "prediction summary", rc.config_hash, rc.seed);
  summary << "item,mean,q025,q25,median,q75,q975";
  if (actual) summary << ",actual";
  summary << '\n';
  for (std::size_t i = 0; i < item_names.size(); ++i) {
    const auto& s = dist.item_summary[i];
    summary << item_names[i] << ',' << s.mean << ',' << s.q025 << ',' << s.q25 << ','
            << s.median << ',' << s.q75 << ',' << s.q975;
    if (actual) summary << ',' << (*actual)[i];
    summary << '\n';
  }
  const auto& st = dist.total_summary;
  summary << "TOTAL," << st.mean << ',' << st.q025 << ',' << st.q25 << ',' << st.median << ','
          << st.q75 << ',' << st.q975;
  if (actual) {
    long tot = 0;
    for (long v : *actual) tot += v;
    summary << ',' << tot;
  }
  summary << '\n';
}

inline int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override) {
  json j = load_json(config_path);
  ScenarioSpec sc = scenario_from_json(j);
  if (seed_override) sc.seed = *seed_override;
  const std::string hash = hex64(fnv1a64(j.dump()));
  SimulatedDataset sim = simulate_dataset(sc);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  auto tx = open_out(dir / "transactions.csv");
  write_transactions(tx, sim.data, hash, sc.seed);
  auto st = open_out(dir / "stock.csv");
  write_stock(st, sim.data, hash, sc.seed);

  json truth;
  truth["seed"] = sc.seed;
  truth["config_hash"] = hash;
  for (const auto& rp : sim.truth.rate) truth["eta"].push_back(rp.values);
  for (const auto& th : sim.truth.mixture.store_weights) truth["theta"].push_back(th);
  for (const auto& seg : sim.truth.mixture.segments) {
    json s;
    if (sim.spec.choice == ChoiceKind::nonparametric) {
      for (int item : seg.ranking) s["ranking"].push_back(item + 1);
    } else {
      s["preference"] = seg.preference;
      s["substitution"] = seg.substitution;
    }
    truth["segments"].push_back(s);
  }
  auto tf = open_out(dir / "truth.json");
  tf << truth.dump(2) << '\n';

  std::cout << "simulated " << sim.data.stores.size() << " store(s) x "
            << sim.data.stores[0].periods.size() << " period(s), "
            << sim.data.total_purchases() << " purchases -> " << out_dir << "\n";
  return 0;
}

struct FitArtifacts {
  PosteriorSamples samples;
  double perplexity = -1.0;  // -1 = no holdout
};

inline FitArtifacts fit_dataset(const RunConfig& rc, const Dataset& ds, bool tune,
                                std::ostream& log) {
  Dataset train = ds, holdout;
  bool have_holdout = false;
  if (rc.train_fraction < 1.0) {
    auto [tr, ho] = split_dataset(ds, rc.train_fraction);
    train = std::move(tr);
    holdout = std::move(ho);
    have_holdout = true;
  }
  const PreparedData prepared = prepare(train);
  PreparedData prepared_holdout;
  if (have_holdout) prepared_holdout = prepare(holdout);

  SamplerConfig cfg = rc.sampler;
  if (tune) {
    if (!have_holdout)
      throw std::invalid_argument("tuning requires train_fraction < 1 for a holdout set");
    const double grid_a[] = {1e-3, 1e-2, 1e-1};
    const double grid_b[] = {1e2, 1e3, 1e4};
    const double grid_c[] = {0.51, 0.6, 0.8};
    SamplerConfig probe = cfg;
    probe.chains = 1;
    probe.iterations = std::max(200, cfg.iterations / 10);
    double best = std::numeric_limits<double>::infinity();
    for (double a : grid_a)
      for (double b : grid_b)
        for (double c : grid_c) {
          probe.step_a = a;
          probe.step_b = b;
          probe.step_c = c;
          const PosteriorSamples s = run_chains(rc.model, prepared, probe);
          const double perp = holdout_perplexity(s, prepared_holdout, 200);
          log << "tune a=" << a << " b=" << b << " c=" << c << " perplexity=" << perp << "\n";
          if (perp < best) {
            best = perp;
            cfg.step_a = a;
            cfg.step_b = b;
            cfg.step_c = c;
          }
        }
    log << "selected a=" << cfg.step_a << " b=" << cfg.step_b << " c=" << cfg.step_c << "\n";
  }

  FitArtifacts out;
  out.samples = run_chains(rc.model, prepared, cfg);
  if (have_holdout) out.perplexity = holdout_perplexity(out.samples, prepared_holdout, 2000);
  return out;
}

inline int cmd_fit(const std::string& config_path, const std::string& data_path,
                   const std::string& stock_path, const std::string& out_dir, bool tune,
                   std::optional<std::uint64_t> seed_override) {
  json j = load_json(config_path);
  RunConfig rc = run_config_from_json(j);
  if (seed_override) {
    rc.seed = *seed_override;
    rc.sampler.seed = *seed_override;
  }
  Dataset ds = load_dataset(rc, data_path, stock_path, std::cerr);
  finalize_model_spec(rc, ds);

  FitArtifacts fit = fit_dataset(rc, ds, tune, std::cerr);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  auto sf = open_out(dir / "samples.csv");
  write_samples_csv(sf, fit.samples, rc.config_hash, rc.seed);

  json report;
  report["config_hash"] = rc.config_hash;
  report["seed"] = rc.seed;
  report["chains"] = fit.samples.chain_count();
  report["draws_per_chain"] = fit.samples.draws_per_chain();
  report["converged"] = fit.samples.diagnostics.converged;
  for (std::size_t i = 0; i < fit.samples.diagnostics.names.size(); ++i)
    report["rhat"][fit.samples.diagnostics.names[i]] =
        std::isfinite(fit.samples.diagnostics.rhat[i]) ? json(fit.samples.diagnostics.rhat[i])
                                                       : json("inf");
  if (fit.perplexity >= 0.0) report["holdout_perplexity"] = fit.perplexity;
  auto rf = open_out(dir / "report.json");
  rf << report.dump(2) << '\n';

  std::cout << "fit complete: " << fit.samples.total_draws() << " draws, converged="
            << (fit.samples.diagnostics.converged ? "yes" : "no");
  if (fit.perplexity >= 0.0) std::cout << ", holdout perplexity=" << fit.perplexity;
  std::cout << " -> " << out_dir << "\n";
  return 0;  // non-convergence is a reported flag, not a failure
}

inline int cmd_diagnose(const std::string& samples_path, const std::string& out_dir) {
  std::ifstream in(samples_path);
  if (!in) throw std::runtime_error("cannot open '" + samples_path + "'");
  const CsvTable t = read_csv(in);
  const int cc = t.column("chain");
  std::map<long, std::vector<std::vector<double>>> chains;  // chain -> [col][draw]
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long chain = detail::parse_long(t.rows[r][cc], t.line_numbers[r], "chain");
    auto& cols = chains[chain];
    if (cols.empty()) cols.resize(t.header.size());
    for (std::size_t c = 0; c < t.header.size(); ++c)
      cols[c].push_back(detail::parse_double(t.rows[r][c], t.line_numbers[r], "value"));
  }
  if (chains.empty()) throw std::runtime_error("no draws in samples file");

  json report;
  bool converged = true;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& name = t.header[c];
    if (name == "chain" || name == "iteration") continue;
    std::vector<std::vector<double>> per_chain;
    std::vector<double> merged;
    for (const auto& [id, cols] : chains) {
      per_chain.push_back(cols[c]);
      merged.insert(merged.end(), cols[c].begin(), cols[c].end());
    }
    double mean = 0.0;
    for (double v : merged) mean += v;
    mean /= static_cast<double>(merged.size());
    double var = 0.0;
    for (double v : merged) var += (v - mean) * (v - mean);
    var = merged.size() > 1 ? var / static_cast<double>(merged.size() - 1) : 0.0;
    report["trace"][name]["mean"] = mean;
    report["trace"][name]["sd"] = std::sqrt(var);
    if (per_chain.size() >= 2 && per_chain[0].size() >= 2) {
      double r;
      try {
        r = gelman_rubin(per_chain);
      } catch (const std::domain_error&) {
        bool all_equal = true;
        for (const auto& ch : per_chain)
          for (double v : ch) all_equal &= (v == merged[0]);
        r = all_equal ? 1.0 : std::numeric_limits<double>::infinity();
      }
      report["rhat"][name] = std::isfinite(r) ? json(r) : json("inf");
      if (!(r <= 1.1)) converged = false;
      std::cout << name << ": rhat=" << r << " mean=" << mean << " sd=" << std::sqrt(var)
                << "\n";
    } else {
      std::cout << name << ": mean=" << mean << " sd=" << std::sqrt(var) << "\n";
    }
  }
  report["converged"] = converged;
  std::cout << "converged=" << (converged ? "yes" : "no") << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    auto rf = open_out(std::filesystem::path(out_dir) / "diagnostics.json");
    rf << report.dump(2) << '\n';
  }
  return 0;
}

inline int cmd_predict(const std::string& config_path, const std::string& data_path,
                       const std::string& stock_path, const std::string& samples_path,
                       const std::vector<std::string>& stock_levels, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override) {
  json j = load_json(config_path);
  RunConfig rc = run_config_from_json(j);
  if (seed_override) rc.seed = *seed_override;
  Dataset ds = load_dataset(rc, data_path, stock_path, std::cerr);
  finalize_model_spec(rc, ds);

  std::ifstream sin(samples_path);
  if (!sin) throw std::runtime_error("cannot open '" + samples_path + "'");
  PosteriorSamples samples = read_samples_csv(sin, rc.model);

  // conditions are evaluated on the held-out periods, per store
  const PreparedData prepared = prepare(ds);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  for (std::size_t store = 0; store < ds.stores.size(); ++store) {
    const std::size_t total = ds.stores[store].periods.size();
    const std::size_t first =
        rc.train_fraction < 1.0
            ? std::min(std::max<std::size_t>(
                           static_cast<std::size_t>(rc.train_fraction * total), 1),
                       total - 1)
            : 0;
    for (const auto& level_str : stock_levels) {
      StockCondition cond;
      cond.stock = parse_stock_level(level_str);
      cond.validate(ds.item_count, ds.horizon);
      for (const auto& realized : realized_stock_conditions(prepared, store, first, total))
        if (realized.stock == cond.stock) cond.intervals = realized.intervals;
      bool all_zero = true;
      for (int v : cond.stock) all_zero &= (v == 0);
      if (cond.intervals.empty() && !all_zero)
        throw std::runtime_error("stock level " + level_str +
                                 " never occurs in the evaluation periods of store '" +
                                 ds.stores[store].store_id + "'");
      const auto actual = actual_counts(ds, store, first, total, cond);
      const auto dist = predict_counts(samples, cond, store, rc.seed);
      std::string tag = ds.stores[store].store_id + "_s" + level_str;
      for (char& c : tag)
        if (c == ',') c = '-';
      write_prediction_files(dir, tag, dist, ds.item_names, &actual, rc);
      long atot = 0;
      for (long v : actual) atot += v;
      std::cout << "store " << ds.stores[store].store_id << " stock [" << level_str
                << "]: predicted total mean=" << dist.total_summary.mean
                << " (95% PI " << dist.total_summary.q025 << ".." << dist.total_summary.q975
                << "), actual=" << atot << "\n";
    }
  }
  return 0;
}

inline int cmd_lost_sales(const std::string& config_path, const std::string& data_path,
                          const std::string& stock_path, const std::string& samples_path,
                          const std::string& out_dir,
                          std::optional<std::uint64_t> seed_override) {
  json j = load_json(config_path);
  RunConfig rc = run_config_from_json(j);
  if (seed_override) rc.seed = *seed_override;
  Dataset ds = load_dataset(rc, data_path, stock_path, std::cerr);
  finalize_model_spec(rc, ds);

  std::ifstream sin(samples_path);
  if (!sin) throw std::runtime_error("cannot open '" + samples_path + "'");
  PosteriorSamples samples = read_samples_csv(sin, rc.model);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  for (std::size_t store = 0; store < ds.stores.size(); ++store) {
    const long L = static_cast<long>(ds.stores[store].periods.size());
    const auto dist = full_stock_sales(samples, store, L, ds.horizon, rc.seed);
    write_prediction_files(dir, ds.stores[store].store_id + "_full_stock", dist, ds.item_names,
                           nullptr, rc);

    auto table = open_out(dir / (ds.stores[store].store_id + "_lost_sales.csv"));
    write_provenance(table, "lost sales", rc.config_hash, rc.seed);
    table << "item,actual,full_stock_mean,lost_mean,lost_q025,lost_q975\n";
    std::cout << "store " << ds.stores[store].store_id << " lost sales over " << L
              << " periods:\n";
    for (int i = 0; i < ds.item_count; ++i) {
      long actual = 0;
      for (const auto& p : ds.stores[store].periods) actual += p.purchases(i);
      const auto& s = dist.item_summary[i];
      table << ds.item_names[i] << ',' << actual << ',' << s.mean << ','
            << (s.mean - actual) << ',' << (s.q025 - actual) << ',' << (s.q975 - actual)
            << '\n';
      std::cout << "  " << ds.item_names[i] << ": actual=" << actual
                << " full-stock mean=" << s.mean << " lost=" << (s.mean - actual) << "\n";
    }
  }
  return 0;
}

// The reference point of the prediction task: maximum a posteriori fit of
// this model with a homogeneous rate and MNL choice, over a grid of fixed
// tau values, scored by out-of-sample absolute deviation.
inline int cmd_baseline_fit(const std::string& config_path, const std::string& data_path,
                            const std::string& stock_path, const std::string& out_dir,
                            std::vector<double> tau_grid,
                            std::optional<std::uint64_t> seed_override) {
  json j = load_json(config_path);
  RunConfig rc = run_config_from_json(j);
  if (seed_override) {
    rc.seed = *seed_override;
    rc.sampler.seed = *seed_override;
  }
  Dataset ds = load_dataset(rc, data_path, stock_path, std::cerr);
  finalize_model_spec(rc, ds);
  if (tau_grid.empty())
    for (int g = 1; g <= 9; ++g) tau_grid.push_back(0.1 * g);

  ModelSpec base = rc.model;
  base.rate = RateKind::homogeneous;
  base.choice = ChoiceKind::mnl;
  base.segments = 1;
  base.rankings.clear();
  base.peaks.reset();
  SamplerConfig cfg = rc.sampler;
  cfg.prior.eta_box = default_eta_box(RateKind::homogeneous, ds.horizon);

  auto [train, test] = split_dataset(ds, rc.train_fraction);
  const PreparedData prepared_train = prepare(train);
  const PreparedData prepared_all = prepare(ds);

  json report;
  double best_dev = std::numeric_limits<double>::infinity();
  double best_tau = tau_grid.front();
  for (double tau : tau_grid) {
    ModelSpec spec_tau = base;
    spec_tau.mnl_tau = tau;
    Rng rng(cfg.seed);
    Rng sub = rng.substream({0xB0u, static_cast<std::uint64_t>(tau * 1000)});
    const MapResult map = map_estimate_from_prior(spec_tau, prepared_train, cfg, sub);
    const ModelParams params = untransform(map.z, spec_tau);

    double dev = 0.0;
    for (std::size_t store = 0; store < ds.stores.size(); ++store) {
      const std::size_t total = ds.stores[store].periods.size();
      const std::size_t first = train.stores[store].periods.size();
      for (const auto& cond : realized_stock_conditions(prepared_all, store, first, total)) {
        const auto mean = expected_counts(params, spec_tau, cond, store);
        const auto actual = actual_counts(ds, store, first, total, cond);
        double mean_total = 0.0;
        long actual_total = 0;
        for (int i = 0; i < ds.item_count; ++i) {
          mean_total += mean[i];
          actual_total += actual[i];
        }
        dev += std::abs(mean_total - static_cast<double>(actual_total));
      }
    }
    report["grid"].push_back(json{{"tau", tau}, {"abs_deviation", dev}});
    std::cout << "baseline tau=" << tau << ": holdout abs deviation=" << dev << "\n";
    if (dev < best_dev) {
      best_dev = dev;
      best_tau = tau;
    }
  }
  report["best_tau"] = best_tau;
  report["best_abs_deviation"] = best_dev;
  report["config_hash"] = rc.config_hash;
  report["seed"] = rc.seed;

  std::filesystem::create_directories(out_dir);
  auto rf = open_out(std::filesystem::path(out_dir) / "baseline.json");
  rf << report.dump(2) << '\n';
  std::cout << "best tau=" << best_tau << " (abs deviation " << best_dev << ") -> " << out_dir
            << "\n";
  return 0;
}

}  // namespace cli

// Entry point shared by the binary and the tests: argv without the program
// name. Nonzero exits print "error:<category>: <detail>" on stderr.
inline int run_command(std::vector<std::string> args) {
  CLI::App app{"demand and substitution inference from stockout-censored transactions"};
  app.require_subcommand(1);

  std::string config_path, data_path, stock_path, samples_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool tune = false;
  std::vector<std::string> stock_levels;
  std::vector<double> tau_grid;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    if (needs_data) {
      sub->add_option("--data", data_path, "transactions CSV")->required();
      sub->add_option("--stock", stock_path,
                      "stock CSV (default: stock-from-last-purchase convention)");
    }
  };

  auto* sim = app.add_subcommand("simulate", "generate a dataset from a scenario spec");
  add_common(sim, false);

  auto* fit = app.add_subcommand("fit", "posterior inference by SGRLD");
  add_common(fit, true);
  fit->add_flag("--tune", tune, "choose the step schedule on the default grid by perplexity");

  auto* diag = app.add_subcommand("diagnose", "Gelman-Rubin and trace summaries of a sample file");
  diag->add_option("--samples", samples_path, "samples CSV")->required();
  diag->add_option("--out", out_dir, "output directory");

  auto* pred = app.add_subcommand("predict", "posterior predictive counts under stock levels");
  add_common(pred, true);
  pred->add_option("--samples", samples_path, "samples CSV")->required();
  pred->add_option("--stock-level", stock_levels, "0/1 flags, e.g. 0,1,1 (repeatable)")
      ->required();

  auto* lost = app.add_subcommand("lost-sales", "full-stock predictive vs actual purchases");
  add_common(lost, true);
  lost->add_option("--samples", samples_path, "samples CSV")->required();

  auto* base = app.add_subcommand("baseline-fit",
                                  "MAP fit with homogeneous rate + MNL over a tau grid");
  add_common(base, true);
  base->add_option("--tau-grid", tau_grid, "tau values (default 0.1..0.9)");

  std::vector<const char*> argv;
  argv.push_back("stockdemand");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error:usage: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sim->parsed()) return cli::cmd_simulate(config_path, out_dir, seed);
    if (fit->parsed()) return cli::cmd_fit(config_path, data_path, stock_path, out_dir, tune, seed);
    if (diag->parsed()) return cli::cmd_diagnose(samples_path, out_dir);
    if (pred->parsed())
      return cli::cmd_predict(config_path, data_path, stock_path, samples_path, stock_levels,
                              out_dir, seed);
    if (lost->parsed())
      return cli::cmd_lost_sales(config_path, data_path, stock_path, samples_path, out_dir, seed);
    if (base->parsed())
      return cli::cmd_baseline_fit(config_path, data_path, stock_path, out_dir, tau_grid, seed);
  } catch (const json::exception& e) {
    std::cerr << "error:config: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error:invalid: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error:data: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace stockdemand
