// Command-line harness: run the online learning experiment or the
// perfect-knowledge benchmark from a JSON config, or fit the hazard model on
// a rental-record CSV. All outputs are deterministic, plot-ready CSV files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raas/config.hpp"
#include "raas/csv.hpp"
#include "raas/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace raas;

namespace {

constexpr const char* kHistoryHeader =
    "k,wall_time,event,price,reward_rate,elapsed,n_F,n_R,err_u,err_theta,phase";

void write_history_csv(const std::string& path, const RunReport& report) {
  CsvWriter out(path, kHistoryHeader);
  for (const auto& ev : report.history) {
    out.row({std::to_string(ev.k), fmt17(ev.wall_time), to_string(ev.event),
             fmt17(ev.price), fmt17(ev.reward_rate), fmt17(ev.elapsed),
             std::to_string(ev.n_failures), std::to_string(ev.n_replacements),
             fmt17(ev.err_u), fmt17(ev.err_theta), to_string(ev.phase)});
  }
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

// Rolling rate sampled on a fixed time grid (shared across seeds).
std::vector<double> rate_on_grid(const std::vector<HistoryEvent>& history,
                                 const std::vector<double>& times, double window) {
  std::vector<double> out(times.size(), 0.0);
  std::size_t head = 0, tail = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    while (head < history.size() && history[head].wall_time <= t)
      sum += history[head++].profit_delta;
    while (tail < head && history[tail].wall_time <= t - window)
      sum -= history[tail++].profit_delta;
    out[i] = sum / window;
  }
  return out;
}

void write_profit_rate_csv(const std::string& path, const std::vector<RunReport>& reports,
                           double window) {
  double horizon = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) horizon = std::min(horizon, r.total_time);
  const double step = window / 100.0;
  std::vector<double> times;
  for (double t = 0.0; t <= horizon; t += step) times.push_back(t);
  std::vector<std::vector<double>> rates;
  rates.reserve(reports.size());
  for (const auto& r : reports) rates.push_back(rate_on_grid(r.history, times, window));
  CsvWriter out(path, "time,mean_rate,std_rate");
  for (std::size_t i = 0; i < times.size(); ++i) {
    double mean = 0.0;
    for (const auto& r : rates) mean += r[i];
    mean /= static_cast<double>(rates.size());
    double var = 0.0;
    for (const auto& r : rates) var += (r[i] - mean) * (r[i] - mean);
    var /= static_cast<double>(rates.size());
    out.row({fmt17(times[i]), fmt17(mean), fmt17(std::sqrt(var))});
  }
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

void write_estimation_error_csv(const std::string& path,
                                const std::vector<RunReport>& reports, long num_customers) {
  std::vector<std::vector<double>> eu(reports.size()), et(reports.size());
  for (std::size_t s = 0; s < reports.size(); ++s) {
    eu[s].assign(num_customers, 0.0);
    et[s].assign(num_customers, 0.0);
    const auto [u_series, t_series] = estimation_errors(reports[s]);
    for (const auto& [k, v] : u_series) eu[s][k - 1] = v;
    for (const auto& [k, v] : t_series) et[s][k - 1] = v;
  }
  CsvWriter out(path, "k,err_u_mean,err_u_std,err_theta_mean,err_theta_std");
  for (long k = 0; k < num_customers; ++k) {
    double mu = 0.0, mt = 0.0;
    for (std::size_t s = 0; s < reports.size(); ++s) {
      mu += eu[s][k];
      mt += et[s][k];
    }
    mu /= static_cast<double>(reports.size());
    mt /= static_cast<double>(reports.size());
    double vu = 0.0, vt = 0.0;
    for (std::size_t s = 0; s < reports.size(); ++s) {
      vu += (eu[s][k] - mu) * (eu[s][k] - mu);
      vt += (et[s][k] - mt) * (et[s][k] - mt);
    }
    vu /= static_cast<double>(reports.size());
    vt /= static_cast<double>(reports.size());
    out.row({std::to_string(k + 1), fmt17(mu), fmt17(std::sqrt(vu)), fmt17(mt),
             fmt17(std::sqrt(vt))});
  }
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& arg) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    seeds.push_back(std::stoull(tok));
  }
  return seeds;
}

template <class RunFn>
std::vector<RunReport> run_seeds(const ExperimentConfig& cfg, RunFn&& fn, bool quiet) {
  std::vector<std::future<RunReport>> futures;
  futures.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds)
    futures.push_back(std::async(std::launch::async, fn, seed));
  std::vector<RunReport> reports;
  reports.reserve(cfg.seeds.size());
  for (std::size_t i = 0; i < futures.size(); ++i) {
    reports.push_back(futures[i].get());
    if (!quiet)
      std::cout << "seed " << cfg.seeds[i] << ": profit " << reports.back().total_profit
                << " over " << reports.back().total_time << " time units\n";
  }
  return reports;
}

// Revenue-grid slice indices at the requested percentiles of the projected
// customer revenue distribution, estimated from a fixed large context sample.
std::vector<std::pair<double, int>> revenue_percentile_slices(
    const ExperimentConfig& cfg, const std::vector<double>& percentiles) {
  RngStream rng(0xA11CEULL);
  CustomerDistribution dist = cfg.customer;
  dist.dim = cfg.dimension;
  std::vector<double> revs;
  revs.reserve(200000);
  for (int i = 0; i < 200000; ++i) {
    const CustomerArrival c = sample_customer(dist, rng);
    revs.push_back(std::max(0.0, dot(cfg.truth.u.coords, c.x.coords)));
  }
  std::sort(revs.begin(), revs.end());
  std::vector<std::pair<double, int>> slices;
  for (double p : percentiles) {
    const double value = revs[static_cast<std::size_t>(p / 100.0 * (revs.size() - 1))];
    const GridSpec& axis = cfg.solver.rev;
    int best = 0;
    for (int i = 1; i < axis.count; ++i)
      if (std::fabs(axis.at(i) - value) < std::fabs(axis.at(best) - value)) best = i;
    slices.emplace_back(p, best);
  }
  return slices;
}

int cmd_simulate(const ExperimentConfig& cfg, bool quiet) {
  fs::create_directories(cfg.output_dir);
  const auto reports = run_seeds(
      cfg,
      [&](std::uint64_t seed) {
        return run_online(cfg.truth, cfg.customer, cfg.financial, cfg.learning, cfg.solver,
                          cfg.num_customers, seed);
      },
      quiet);
  for (std::size_t i = 0; i < reports.size(); ++i)
    write_history_csv(cfg.output_dir + "/history_seed" + std::to_string(cfg.seeds[i]) +
                          ".csv",
                      reports[i]);
  write_profit_rate_csv(cfg.output_dir + "/profit_rate.csv", reports, kDefaultProfitWindow);
  write_estimation_error_csv(cfg.output_dir + "/estimation_error.csv", reports,
                             cfg.num_customers);
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, bool quiet) {
  fs::create_directories(cfg.output_dir);
  const auto reports = run_seeds(
      cfg,
      [&](std::uint64_t seed) {
        return run_oracle(cfg.truth, cfg.customer, cfg.financial, cfg.solver,
                          cfg.num_customers, seed);
      },
      quiet);
  for (std::size_t i = 0; i < reports.size(); ++i)
    write_history_csv(cfg.output_dir + "/history_seed" + std::to_string(cfg.seeds[i]) +
                          ".csv",
                      reports[i]);
  write_profit_rate_csv(cfg.output_dir + "/profit_rate.csv", reports, kDefaultProfitWindow);

  // Policy structure exports from a dedicated solve under the first seed's
  // common-random-numbers sample.
  RngStream model_rng = RngStream(cfg.seeds.front()).derive(4);
  CustomerDistribution dist = cfg.customer;
  dist.dim = cfg.dimension;
  const CustomerSample crn = build_customer_sample(dist, cfg.solver.mc_samples, model_rng);
  const MdpModel model = make_mdp_model(cfg.truth.u.coords, cfg.truth.theta.coords,
                                        cfg.truth.baseline, cfg.financial, crn);
  const PolicyTables tables = value_iteration(model, cfg.solver).tables;
  {
    std::ofstream out(cfg.output_dir + "/arrival_policy_slices.csv");
    write_arrival_slices_csv(out, tables,
                             revenue_percentile_slices(cfg, {10.0, 50.0, 90.0}));
    if (!out) throw std::runtime_error("write failed: arrival_policy_slices.csv");
  }
  {
    std::ofstream out(cfg.output_dir + "/idle_policy.csv");
    write_idle_policy_csv(out, tables);
    if (!out) throw std::runtime_error("write failed: idle_policy.csv");
  }
  {
    std::ofstream out(cfg.output_dir + "/idle_boundary.csv");
    write_idle_boundary_csv(out, tables);
    if (!out) throw std::runtime_error("write failed: idle_boundary.csv");
  }
  return 0;
}

int cmd_estimate_demo(const std::string& records_path, const std::string& out_dir,
                      bool theta_zero, double bandwidth, int min_failures) {
  std::ifstream in(records_path);
  if (!in) throw std::runtime_error("cannot open records file: " + records_path);
  const std::vector<RentalRecord> records = read_rental_records(in);
  if (records.empty()) throw std::runtime_error("records file has no rows");
  const std::size_t d = records[0].covariate.size();

  Vec theta(d, 0.0);
  if (!theta_zero) {
    LearningConfig lcfg;
    lcfg.min_failures = min_failures;
    theta = fit_theta(records, lcfg).coords;
  } else {
    long failures = 0;
    for (const auto& r : records) failures += r.failed ? 1 : 0;
    if (failures < min_failures)
      throw std::runtime_error("insufficient failures: " + std::to_string(failures));
  }
  const BaselineEstimate est = estimate_baseline(theta, records, bandwidth);

  fs::create_directories(out_dir);
  {
    std::string header;
    for (std::size_t k = 0; k < d; ++k)
      header += (k ? "," : "") + std::string("theta_") + std::to_string(k + 1);
    CsvWriter out(out_dir + "/theta_hat.csv", header);
    std::vector<std::string> row;
    for (double v : theta) row.push_back(fmt17(v));
    out.row(row);
  }
  {
    CsvWriter out(out_dir + "/breslow_cumhaz.csv", "age,cum_hazard");
    for (std::size_t i = 0; i < est.jump_ages.size(); ++i)
      out.row({fmt17(est.jump_ages[i]), fmt17(est.cum_hazard[i])});
  }
  {
    CsvWriter out(out_dir + "/hazard_smoothed.csv", "age,rate");
    const BaselineHazard& h = *est.smoothed;
    for (std::size_t i = 0; i < h.table_ages().size(); ++i)
      out.row({fmt17(h.table_ages()[i]), fmt17(h.table_rates()[i])});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rental pricing and replacement simulator"};
  app.require_subcommand(1);

  std::string config_path, out_override, seeds_override;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_override, "output directory (overrides config)");
    sub->add_option("--seeds", seeds_override, "comma-separated seed list (overrides config)");
    sub->add_flag("--quiet", quiet, "suppress progress output");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run the online learning policy");
  add_common(simulate);
  CLI::App* oracle = app.add_subcommand("oracle", "run the perfect-knowledge benchmark");
  add_common(oracle);

  CLI::App* estimate = app.add_subcommand("estimate-demo",
                                          "fit the hazard model on a rental-record CSV");
  std::string records_path, est_out = "out";
  bool theta_zero = false;
  double bandwidth = 0.0;
  int min_failures = 2;
  estimate->add_option("records", records_path, "rental records CSV")->required();
  estimate->add_option("--out", est_out, "output directory");
  estimate->add_flag("--theta-zero", theta_zero, "skip the fit and use theta = 0");
  estimate->add_option("--bandwidth", bandwidth, "smoothing bandwidth (0 = automatic)");
  estimate->add_option("--min-failures", min_failures, "failures required for a fit");
  estimate->add_flag("--quiet", quiet, "suppress progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(estimate))
      return cmd_estimate_demo(records_path, est_out, theta_zero, bandwidth, min_failures);

    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (!seeds_override.empty()) cfg.seeds = parse_seed_list(seeds_override);
    cfg.validate();
    if (app.got_subcommand(simulate)) return cmd_simulate(cfg, quiet);
    return cmd_oracle(cfg, quiet);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
