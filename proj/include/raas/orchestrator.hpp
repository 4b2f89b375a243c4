#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raas/mdp.hpp"
#include "raas/rng.hpp"
#include "raas/sim_env.hpp"
#include "raas/survival.hpp"
#include "raas/types.hpp"
#include "raas/utility_learner.hpp"

namespace raas {

enum class RunPhase { ExploreUtility, CollectDegradation, Control };

inline std::string to_string(RunPhase p) {
  switch (p) {
    case RunPhase::ExploreUtility: return "explore_u";
    case RunPhase::CollectDegradation: return "collect_theta";
    case RunPhase::Control: return "control";
  }
  return "unknown";
}

// One logged transition: each customer index k contributes an interarrival
// gap event followed by an arrival-resolution event.
struct HistoryEvent {
  long k = 0;
  double wall_time = 0.0;  // at event end
  EventKind event = EventKind::Idled;
  double price = 0.0;        // offered price; 0 when no offer was made
  double reward_rate = 0.0;  // per-unit-time normalized reward
  double elapsed = 0.0;
  double profit_delta = 0.0;  // raw revenue minus raw costs for this event
  long n_failures = 0;        // running counts at event end
  long n_replacements = 0;
  double err_u = 0.0;
  double err_theta = 0.0;
  RunPhase phase = RunPhase::ExploreUtility;
};

struct RunReport {
  std::vector<HistoryEvent> history;
  Vec u_hat;
  Vec theta_hat;
  std::optional<BaselineEstimate> baseline_estimate;
  std::vector<std::pair<double, double>> profit_rate;  // (time, rolling rate)
  double total_profit = 0.0;
  double total_time = 0.0;
  long phase1_customers = -1;  // arrivals consumed by the search phase
  long feasibility_violations = 0;
  int retrain_count = 0;
  long n_failures = 0;
  long n_replacements = 0;
};

inline constexpr double kDefaultProfitWindow = 10000.0;

// Rolling net profit per unit time over a trailing window, evaluated at every
// event time; windows reaching before time 0 simply hold less mass.
inline std::vector<std::pair<double, double>> rolling_profit_rate(
    const std::vector<HistoryEvent>& history, double window) {
  detail::require(window > 0.0, "rolling_profit_rate: window must be > 0");
  std::vector<std::pair<double, double>> out;
  out.reserve(history.size());
  double sum = 0.0;
  std::size_t tail = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    sum += history[i].profit_delta;
    const double t = history[i].wall_time;
    while (tail < i && history[tail].wall_time <= t - window) sum -= history[tail++].profit_delta;
    out.emplace_back(t, sum / window);
  }
  return out;
}

// Estimation-error series indexed by customer count (values at arrival
// events; piecewise constant between updates).
inline std::pair<std::vector<std::pair<long, double>>, std::vector<std::pair<long, double>>>
estimation_errors(const RunReport& report) {
  std::vector<std::pair<long, double>> eu, et;
  for (const auto& ev : report.history) {
    const bool arrival_event =
        ev.event != EventKind::Idled && ev.event != EventKind::Replaced;
    if (arrival_event) {
      eu.emplace_back(ev.k, ev.err_u);
      et.emplace_back(ev.k, ev.err_theta);
    }
  }
  return {std::move(eu), std::move(et)};
}

namespace detail {

struct RunState {
  RobotCondition cond;
  double wall = 0.0;
  double profit = 0.0;
  long n_fail = 0;
  long n_repl = 0;
  explicit RunState(std::size_t d) : cond(RobotCondition::fresh(d)) {}
};

inline void push_event(std::vector<HistoryEvent>& history, long k, RunState& st,
                       const StepOutcome& out, double price, double err_u, double err_theta,
                       RunPhase phase, const FinancialParams& fin) {
  double delta = 0.0;
  switch (out.event) {
    case EventKind::Idled:
      delta = -fin.holding_cost * out.elapsed;
      break;
    case EventKind::Replaced:
      delta = -fin.replacement_cost - fin.holding_cost * out.elapsed;
      st.n_repl += 1;
      break;
    case EventKind::RentalSuccess:
      delta = price;
      break;
    case EventKind::RentalFailure:
      delta = price - fin.failure_cost - fin.replacement_cost;
      st.n_fail += 1;
      st.n_repl += 1;
      break;
    case EventKind::PricedRejected:
    case EventKind::OperatorRejected:
      delta = 0.0;
      break;
  }
  st.wall += out.elapsed;
  st.profit += delta;
  st.cond = out.next_state.condition;
  HistoryEvent ev;
  ev.k = k;
  ev.wall_time = st.wall;
  ev.event = out.event;
  ev.price = price;
  ev.reward_rate = out.reward;
  ev.elapsed = out.elapsed;
  ev.profit_delta = delta;
  ev.n_failures = st.n_fail;
  ev.n_replacements = st.n_repl;
  ev.err_u = err_u;
  ev.err_theta = err_theta;
  ev.phase = phase;
  history.push_back(ev);
}

inline void finish_report(RunReport& report, const RunState& st) {
  report.total_profit = st.profit;
  report.total_time = st.wall;
  report.n_failures = st.n_fail;
  report.n_replacements = st.n_repl;
  report.profit_rate = rolling_profit_rate(report.history, kDefaultProfitWindow);
}

}  // namespace detail

// Full online run: search phase for the utility vector, a guard phase that
// keeps renting near the learned prices until enough failures exist to fit
// the hazard model, then policy control with batch retraining every
// retrain_failures failures (epsilon decays per retrain).
inline RunReport run_online(const GroundTruth& truth, const CustomerDistribution& dist,
                            const FinancialParams& fin, const LearningConfig& lcfg,
                            const SolverConfig& scfg, long num_customers,
                            std::uint64_t seed) {
  detail::require(num_customers >= 1, "run_online: num_customers must be >= 1");
  dist.validate();
  fin.validate();
  lcfg.validate();
  scfg.validate();
  const std::size_t d = truth.u.dim();

  RngStream master(seed);
  RngStream env_rng = master.derive(1);
  RngStream learn_rng = master.derive(2);
  RngStream policy_rng = master.derive(3);
  RngStream model_rng = master.derive(4);

  UtilityLearner learner(static_cast<int>(d), lcfg);
  Vec u_hat = zeros(d);
  Vec theta_hat = zeros(d);
  std::vector<RentalRecord> rentals;
  long failures_total = 0;
  long failures_at_last_train = 0;
  double eps = lcfg.eps_initial;
  RunPhase phase = RunPhase::ExploreUtility;

  std::optional<CustomerSample> crn_sample;
  std::optional<MdpModel> model;
  std::optional<PolicyTables> tables;

  RunReport report;
  detail::RunState st(d);

  const auto err_u = [&] { return norm2(sub(u_hat, truth.u.coords)); };
  const auto err_theta = [&] { return norm2(sub(theta_hat, truth.theta.coords)); };

  const auto fit_and_train = [&] {
    theta_hat = fit_theta(rentals, lcfg).coords;
    report.baseline_estimate = estimate_baseline(theta_hat, rentals);
    if (!crn_sample)
      crn_sample = build_customer_sample(dist, scfg.mc_samples, model_rng);
    model = make_mdp_model(u_hat, theta_hat, *report.baseline_estimate->smoothed, fin,
                           *crn_sample);
    const auto solved = value_iteration(*model, scfg, tables ? &*tables : nullptr);
    tables = solved.tables;
    failures_at_last_train = failures_total;
  };

  for (long k = 1; k <= num_customers; ++k) {
    const CustomerArrival customer = sample_customer(dist, env_rng);

    // Interarrival gap: holding cost always accrues; a replacement decision
    // is only available once a policy exists. Exploration stays on the
    // arrival side: a forced Replace reveals nothing (the reset is
    // deterministic and parameter-free) and costs a full replacement.
    IdleAction idle_action = IdleAction::Continue;
    if (phase == RunPhase::Control) {
      const ProjectedIdleState is{dot(theta_hat, st.cond.cumulative_context), st.cond.age};
      idle_action = greedy_idle_action(*tables, is);
    }
    const StepOutcome gap_out =
        step(PhaseState{st.cond, Phase::Idle},
             idle_action == IdleAction::Replace ? SimAction::Replace : SimAction::Continue,
             customer, std::nullopt, truth, fin, env_rng);
    detail::push_event(report.history, k, st, gap_out, 0.0, err_u(), err_theta(), phase,
                       fin);

    // Arrival decision. The event is labeled with the phase the decision was
    // made in, even when it triggers a phase transition below.
    const RunPhase phase_at_arrival = phase;
    bool offer = true;
    double price = 0.0;
    if (phase == RunPhase::ExploreUtility) {
      price = learner.propose(customer.x, learn_rng);
    } else if (phase == RunPhase::CollectDegradation) {
      price = std::max(0.0, dot(u_hat, customer.x.coords) - lcfg.price_discount);
    } else {
      const ProjectedArrivalState as =
          project_arrival_state(theta_hat, u_hat, st.cond, customer.x, customer.duration);
      const ArrivalAction aa = epsilon_greedy(
          greedy_arrival_action(*tables, *model, scfg, as), eps, policy_rng);
      offer = aa == ArrivalAction::Accept;
      // Estimated-utility pricing keeps the near-optimal markdown: with a
      // deterministic closed-inequality customer, pricing at the estimate
      // exactly would be rejected whenever the estimate errs high, which is
      // about half the time no matter how small the error.
      price = std::max(0.0, dot(u_hat, customer.x.coords) - lcfg.price_discount);
    }

    const RobotCondition before = st.cond;
    StepOutcome arr_out =
        offer ? step(PhaseState{st.cond, Phase::Arrival}, SimAction::Accept, customer,
                     price, truth, fin, env_rng)
              : step(PhaseState{st.cond, Phase::Arrival}, SimAction::Reject, customer,
                     std::nullopt, truth, fin, env_rng);
    const bool rented = arr_out.event == EventKind::RentalSuccess ||
                        arr_out.event == EventKind::RentalFailure;
    if (rented) {
      const bool failed = arr_out.event == EventKind::RentalFailure;
      const double exit_age =
          before.age + (failed ? *arr_out.failure_time : customer.duration);
      rentals.emplace_back(add(before.cumulative_context, customer.x.coords), before.age,
                           exit_age, failed);
      if (failed) failures_total += 1;
    }

    if (phase == RunPhase::ExploreUtility) {
      const bool accepted = rented;
      learner.observe(customer.x, price, accepted, learn_rng);
      for (const auto& h : learner.set().halfspaces)
        if (!h.satisfied(truth.u.coords, 0.0)) report.feasibility_violations += 1;
      u_hat = learner.estimate(learn_rng);
      if (learner.converged(customer.x, learn_rng)) {
        report.phase1_customers = k;
        if (failures_total >= lcfg.min_failures) {
          fit_and_train();
          phase = RunPhase::Control;
        } else {
          phase = RunPhase::CollectDegradation;
        }
      }
    } else if (phase == RunPhase::CollectDegradation) {
      if (failures_total >= lcfg.min_failures) {
        fit_and_train();
        phase = RunPhase::Control;
      }
    } else {
      if (failures_total - failures_at_last_train >= lcfg.retrain_failures) {
        fit_and_train();
        report.retrain_count += 1;
        eps *= lcfg.eps_decay;
      }
    }

    detail::push_event(report.history, k, st, arr_out, offer ? price : 0.0, err_u(),
                       err_theta(), phase_at_arrival, fin);
  }

  report.u_hat = u_hat;
  report.theta_hat = theta_hat;
  detail::finish_report(report, st);
  return report;
}

// Benchmark with perfect knowledge: solve once with the true parameters, then
// run greedy control pricing each job at its exact utility.
inline RunReport run_oracle(const GroundTruth& truth, const CustomerDistribution& dist,
                            const FinancialParams& fin, const SolverConfig& scfg,
                            long num_customers, std::uint64_t seed) {
  detail::require(num_customers >= 1, "run_oracle: num_customers must be >= 1");
  dist.validate();
  fin.validate();
  scfg.validate();
  const std::size_t d = truth.u.dim();

  RngStream master(seed);
  RngStream env_rng = master.derive(1);
  RngStream model_rng = master.derive(4);

  const CustomerSample crn = build_customer_sample(dist, scfg.mc_samples, model_rng);
  const MdpModel model =
      make_mdp_model(truth.u.coords, truth.theta.coords, truth.baseline, fin, crn);
  const PolicyTables tables = value_iteration(model, scfg).tables;

  RunReport report;
  report.u_hat = truth.u.coords;
  report.theta_hat = truth.theta.coords;
  report.phase1_customers = 0;
  detail::RunState st(d);

  for (long k = 1; k <= num_customers; ++k) {
    const CustomerArrival customer = sample_customer(dist, env_rng);

    const ProjectedIdleState is{dot(truth.theta.coords, st.cond.cumulative_context),
                                st.cond.age};
    const IdleAction idle_action = greedy_idle_action(tables, is);
    const StepOutcome gap_out =
        step(PhaseState{st.cond, Phase::Idle},
             idle_action == IdleAction::Replace ? SimAction::Replace : SimAction::Continue,
             customer, std::nullopt, truth, fin, env_rng);
    detail::push_event(report.history, k, st, gap_out, 0.0, 0.0, 0.0, RunPhase::Control,
                       fin);

    const ProjectedArrivalState as = project_arrival_state(
        truth.theta.coords, truth.u.coords, st.cond, customer.x, customer.duration);
    const ArrivalAction aa = greedy_arrival_action(tables, model, scfg, as);
    const bool offer = aa == ArrivalAction::Accept;
    const double price = offer ? std::max(0.0, dot(truth.u.coords, customer.x.coords)) : 0.0;
    const StepOutcome arr_out =
        offer ? step(PhaseState{st.cond, Phase::Arrival}, SimAction::Accept, customer,
                     price, truth, fin, env_rng)
              : step(PhaseState{st.cond, Phase::Arrival}, SimAction::Reject, customer,
                     std::nullopt, truth, fin, env_rng);
    detail::push_event(report.history, k, st, arr_out, price, 0.0, 0.0, RunPhase::Control,
                       fin);
  }

  detail::finish_report(report, st);
  return report;
}

}  // namespace raas
