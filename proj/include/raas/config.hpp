#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "raas/sim_env.hpp"
#include "raas/types.hpp"

namespace raas {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline json to_json(const CustomerDistribution& d) {
  return json{{"mean_interarrival", d.mean_interarrival}, {"mean_duration", d.mean_duration}};
}

inline json to_json(const FinancialParams& f) {
  return json{{"holding_cost", f.holding_cost},
              {"failure_cost", f.failure_cost},
              {"replacement_cost", f.replacement_cost}};
}

inline json to_json(const BaselineHazard& h) {
  if (h.is_constant()) return json{{"type", "constant"}, {"rate", h.constant_rate()}};
  return json{{"type", "tabulated"}, {"ages", h.table_ages()}, {"rates", h.table_rates()}};
}

inline json to_json(const GroundTruth& t) {
  return json{{"utility", t.u.coords},
              {"degradation", t.theta.coords},
              {"baseline_hazard", to_json(t.baseline)}};
}

inline json to_json(const LearningConfig& c) {
  return json{{"diameter_tol", c.diameter_tol},
              {"n_samples", c.n_samples},
              {"burn_in", c.burn_in},
              {"target_accept", c.target_accept},
              {"price_discount", c.price_discount},
              {"retrain_failures", c.retrain_failures},
              {"eps_initial", c.eps_initial},
              {"eps_decay", c.eps_decay},
              {"min_failures", c.min_failures}};
}

inline json to_json(const GridSpec& g) { return json::array({g.lo, g.hi, g.count}); }

inline json to_json(const SolverConfig& s) {
  return json{{"discount", s.discount},
              {"mc_samples", s.mc_samples},
              {"tol", s.tol},
              {"max_iter", s.max_iter},
              {"arrival_grid",
               {{"deg", to_json(s.deg)},
                {"rev", to_json(s.rev)},
                {"duration", to_json(s.dur)},
                {"age", to_json(s.age)}}},
              {"idle_grid", {{"deg", to_json(s.idle_deg)}, {"age", to_json(s.idle_age)}}}};
}

namespace detail {

template <class T>
T field_as(const json& j, const std::string& path, const std::string& field, T fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + field + ": wrong type");
  }
}

inline GridSpec grid_from(const json& j, const std::string& path, const std::string& field,
                          GridSpec fallback) {
  if (!j.contains(field)) return fallback;
  const json& g = j.at(field);
  if (!g.is_array() || g.size() != 3)
    throw ConfigError(path + "." + field + ": expected [lo, hi, count]");
  GridSpec out;
  out.lo = g[0].get<double>();
  out.hi = g[1].get<double>();
  out.count = g[2].get<int>();
  return out;
}

}  // namespace detail

inline BaselineHazard baseline_from_json(const json& j, const std::string& path) {
  const std::string type = detail::field_as<std::string>(j, path, "type", "constant");
  try {
    if (type == "constant")
      return BaselineHazard::constant(detail::field_as<double>(j, path, "rate", 0.0));
    if (type == "tabulated")
      return BaselineHazard::tabulated(j.at("ages").get<Vec>(), j.at("rates").get<Vec>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception&) {
    throw ConfigError(path + ": tabulated form needs 'ages' and 'rates' arrays");
  }
  throw ConfigError(path + ".type: must be 'constant' or 'tabulated'");
}

// Whole-experiment configuration: one JSON document reproduces a run.
struct ExperimentConfig {
  int dimension = 4;
  CustomerDistribution customer;
  GroundTruth truth{UtilityVector({0.37, 0.11, 0.34, 0.71}),
                    DegradationVector({0.5, 0.2, 0.4, 0.3}),
                    BaselineHazard::constant(0.001)};
  FinancialParams financial;
  LearningConfig learning;
  SolverConfig solver;
  long num_customers = 20000;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";

  void validate() const {
    detail::require(dimension >= 1, "dimension: must be >= 1");
    customer.validate();
    financial.validate();
    learning.validate();
    solver.validate();
    detail::require(num_customers >= 1, "num_customers: must be >= 1");
    detail::require(!seeds.empty(), "seeds: must be nonempty");
    detail::require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
                    "seeds: must be distinct");
    detail::require(truth.u.dim() == static_cast<std::size_t>(dimension),
                    "truth.utility: dimension mismatch");
    detail::require(truth.theta.dim() == static_cast<std::size_t>(dimension),
                    "truth.degradation: dimension mismatch");
  }

  // The configuration used throughout: d=4, exponential gaps/durations with
  // means 5 and 10, h=0.02, F=0.75, R=1.5, constant baseline rate 0.001.
  static ExperimentConfig reference_default() {
    ExperimentConfig c;
    c.dimension = 4;
    c.customer = CustomerDistribution{4, 5.0, 10.0};
    c.financial = FinancialParams{0.02, 0.75, 1.5};
    c.learning = LearningConfig{};
    c.learning.burn_in = 500 * c.dimension * c.dimension;
    c.solver = SolverConfig{};
    c.num_customers = 20000;
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.output_dir = "out";
    return c;
  }
};

inline json to_json(const ExperimentConfig& c) {
  return json{{"dimension", c.dimension},
              {"customer", to_json(c.customer)},
              {"truth", to_json(c.truth)},
              {"financial", to_json(c.financial)},
              {"learning", to_json(c.learning)},
              {"solver", to_json(c.solver)},
              {"num_customers", c.num_customers},
              {"seeds", c.seeds},
              {"output_dir", c.output_dir}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.dimension = detail::field_as<int>(j, "", "dimension", 4);
    if (c.dimension < 1) throw ConfigError("dimension: must be >= 1");

    const json cust = j.value("customer", json::object());
    c.customer.dim = c.dimension;
    c.customer.mean_interarrival =
        detail::field_as<double>(cust, "customer", "mean_interarrival", 5.0);
    c.customer.mean_duration =
        detail::field_as<double>(cust, "customer", "mean_duration", 10.0);

    if (!j.contains("truth")) throw ConfigError("truth: missing");
    const json& tr = j.at("truth");
    if (!tr.contains("utility")) throw ConfigError("truth.utility: missing");
    if (!tr.contains("degradation")) throw ConfigError("truth.degradation: missing");
    Vec u, th;
    try {
      u = tr.at("utility").get<Vec>();
    } catch (const json::exception&) {
      throw ConfigError("truth.utility: expected an array of numbers");
    }
    try {
      th = tr.at("degradation").get<Vec>();
    } catch (const json::exception&) {
      throw ConfigError("truth.degradation: expected an array of numbers");
    }
    try {
      c.truth =
          GroundTruth{UtilityVector(u), DegradationVector(th),
                      baseline_from_json(tr.value("baseline_hazard", json::object()),
                                         "truth.baseline_hazard")};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("truth: ") + e.what());
    }

    const json fin = j.value("financial", json::object());
    c.financial.holding_cost =
        detail::field_as<double>(fin, "financial", "holding_cost", 0.02);
    c.financial.failure_cost =
        detail::field_as<double>(fin, "financial", "failure_cost", 0.75);
    c.financial.replacement_cost =
        detail::field_as<double>(fin, "financial", "replacement_cost", 1.5);

    const json lj = j.value("learning", json::object());
    LearningConfig& l = c.learning;
    l.diameter_tol = detail::field_as<double>(lj, "learning", "diameter_tol", 1e-4);
    l.n_samples = detail::field_as<int>(lj, "learning", "n_samples", 2000);
    l.burn_in =
        detail::field_as<int>(lj, "learning", "burn_in", 500 * c.dimension * c.dimension);
    l.target_accept = detail::field_as<double>(lj, "learning", "target_accept", 0.01);
    l.price_discount = detail::field_as<double>(lj, "learning", "price_discount", 1e-2);
    l.retrain_failures = detail::field_as<int>(lj, "learning", "retrain_failures", 100);
    l.eps_initial = detail::field_as<double>(lj, "learning", "eps_initial", 0.10);
    l.eps_decay = detail::field_as<double>(lj, "learning", "eps_decay", 0.95);
    l.min_failures = detail::field_as<int>(lj, "learning", "min_failures", 2);

    const json sj = j.value("solver", json::object());
    SolverConfig& s = c.solver;
    s.discount = detail::field_as<double>(sj, "solver", "discount", 0.95);
    s.mc_samples = detail::field_as<int>(sj, "solver", "mc_samples", 512);
    s.tol = detail::field_as<double>(sj, "solver", "tol", 1e-6);
    s.max_iter = detail::field_as<int>(sj, "solver", "max_iter", 2000);
    const json ag = sj.value("arrival_grid", json::object());
    s.deg = detail::grid_from(ag, "solver.arrival_grid", "deg", s.deg);
    s.rev = detail::grid_from(ag, "solver.arrival_grid", "rev", s.rev);
    s.dur = detail::grid_from(ag, "solver.arrival_grid", "duration", s.dur);
    s.age = detail::grid_from(ag, "solver.arrival_grid", "age", s.age);
    const json ig = sj.value("idle_grid", json::object());
    s.idle_deg = detail::grid_from(ig, "solver.idle_grid", "deg", s.idle_deg);
    s.idle_age = detail::grid_from(ig, "solver.idle_grid", "age", s.idle_age);

    c.num_customers = detail::field_as<long>(j, "", "num_customers", 20000);
    c.seeds = detail::field_as<std::vector<std::uint64_t>>(j, "", "seeds",
                                                           {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    c.output_dir = detail::field_as<std::string>(j, "", "output_dir", "out");
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace raas
