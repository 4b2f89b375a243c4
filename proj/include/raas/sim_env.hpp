#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "raas/rng.hpp"
#include "raas/types.hpp"

namespace raas {

struct CustomerDistribution {
  int dim = 4;
  double mean_interarrival = 5.0;
  double mean_duration = 10.0;

  void validate() const {
    detail::require(dim >= 1, "customer.dim: must be >= 1");
    detail::require(mean_interarrival > 0.0, "customer.mean_interarrival: must be > 0");
    detail::require(mean_duration > 0.0, "customer.mean_duration: must be > 0");
  }
};

// Context uniform on the positive-orthant part of the unit ball: a uniform
// ball point (gaussian direction times U^(1/d) radius) reflected coordinate-
// wise, which is exact by symmetry. Durations and gaps are exponential.
inline CustomerArrival sample_customer(const CustomerDistribution& dist, RngStream& rng) {
  const int d = dist.dim;
  Vec x(d);
  double n = 0.0;
  do {
    n = 0.0;
    for (int i = 0; i < d; ++i) {
      x[i] = rng.gaussian();
      n += x[i] * x[i];
    }
    n = std::sqrt(n);
  } while (n < 1e-300);
  const double radius = std::pow(rng.uniform01(), 1.0 / d);
  for (int i = 0; i < d; ++i) x[i] = std::fabs(x[i]) * radius / n;
  const double duration = rng.exponential(dist.mean_duration);
  const double gap = rng.exponential(dist.mean_interarrival);
  return CustomerArrival(ContextVector(std::move(x)), duration, gap);
}

// Participation rule: the job is taken whenever utility covers the price.
inline bool customer_accepts(const UtilityVector& u, const ContextVector& x, double price) {
  detail::require(price >= 0.0, "customer_accepts: negative price");
  return dot(u.coords, x.coords) >= price;
}

inline double cumulative_hazard(const BaselineHazard& baseline, double t0, double t1) {
  detail::require(t0 >= 0.0, "cumulative_hazard: negative start age");
  detail::require(t1 >= t0, "cumulative_hazard: interval end before start");
  return baseline.cumulative_between(t0, t1);
}

// Probability that a rental of length T started at the given condition ends
// in a breakdown: 1 - exp(-exp(theta'(X+x)) * (L0(age+T) - L0(age))).
inline double failure_probability(const DegradationVector& theta,
                                  const BaselineHazard& baseline,
                                  const RobotCondition& cond, const ContextVector& x,
                                  double duration) {
  detail::require(duration >= 0.0, "failure_probability: negative duration");
  const double c = dot(theta.coords, cond.cumulative_context) + dot(theta.coords, x.coords);
  const double inc = cumulative_hazard(baseline, cond.age, cond.age + duration);
  return -std::expm1(-std::exp(c) * inc);
}

// Inverse-transform failure time for a fixed unit-exponential draw. Returns
// the breakdown time when it lands strictly inside the rental; a tie with the
// rental end counts as survival.
inline std::optional<double> failure_time_given_exponential(
    double exp_draw, const DegradationVector& theta, const BaselineHazard& baseline,
    const RobotCondition& cond, const ContextVector& x, double duration) {
  detail::require(exp_draw > 0.0, "failure_time_given_exponential: draw must be > 0");
  detail::require(duration > 0.0, "failure_time_given_exponential: duration must be > 0");
  const double c = dot(theta.coords, cond.cumulative_context) + dot(theta.coords, x.coords);
  const double target = exp_draw * std::exp(-c);
  const double t_star = baseline.inverse_increment(cond.age, target);
  if (t_star < duration) return t_star;
  return std::nullopt;
}

inline std::optional<double> sample_failure_time(const DegradationVector& theta,
                                                 const BaselineHazard& baseline,
                                                 const RobotCondition& cond,
                                                 const ContextVector& x, double duration,
                                                 RngStream& rng) {
  return failure_time_given_exponential(rng.exponential(1.0), theta, baseline, cond, x,
                                        duration);
}

enum class EventKind {
  PricedRejected,    // customer declined the offered price
  RentalSuccess,     // rental ran to completion
  RentalFailure,     // robot broke down mid-rental
  Idled,             // waited out an interarrival gap
  Replaced,          // voluntary swap during a gap
  OperatorRejected,  // operator declined to offer
};

inline std::string to_string(EventKind e) {
  switch (e) {
    case EventKind::PricedRejected: return "priced_rejected";
    case EventKind::RentalSuccess: return "rental_success";
    case EventKind::RentalFailure: return "rental_failure";
    case EventKind::Idled: return "idled";
    case EventKind::Replaced: return "replaced";
    case EventKind::OperatorRejected: return "operator_rejected";
  }
  return "unknown";
}

enum class SimAction { Accept, Reject, Continue, Replace };

// One transition of the ground-truth environment. Rewards are normalized per
// unit of elapsed time; zero-time events carry zero reward.
struct StepOutcome {
  PhaseState next_state;
  double reward = 0.0;
  double elapsed = 0.0;
  EventKind event = EventKind::Idled;
  std::optional<double> failure_time;
};

// Arrival phase needs the pending customer (and a price when accepting);
// idle phase needs the upcoming customer, whose interarrival time is the gap
// being traversed.
inline StepOutcome step(const PhaseState& state, SimAction action,
                        const std::optional<CustomerArrival>& customer,
                        std::optional<double> price, const GroundTruth& truth,
                        const FinancialParams& fin, RngStream& rng) {
  const std::size_t d = state.condition.cumulative_context.size();
  if (state.phase == Phase::Arrival) {
    if (action != SimAction::Accept && action != SimAction::Reject)
      throw std::invalid_argument("step: arrival phase requires Accept or Reject");
    if (!customer) throw std::invalid_argument("step: arrival phase requires a customer");
    if (action == SimAction::Reject) {
      return StepOutcome{PhaseState{state.condition, Phase::Idle}, 0.0, 0.0,
                         EventKind::OperatorRejected, std::nullopt};
    }
    if (!price) throw std::invalid_argument("step: Accept requires a price");
    detail::require(*price >= 0.0, "step: negative price");
    if (!customer_accepts(truth.u, customer->x, *price)) {
      return StepOutcome{PhaseState{state.condition, Phase::Idle}, 0.0, 0.0,
                         EventKind::PricedRejected, std::nullopt};
    }
    const auto failure = sample_failure_time(truth.theta, truth.baseline, state.condition,
                                             customer->x, customer->duration, rng);
    if (!failure) {
      return StepOutcome{
          PhaseState{after_rental(state.condition, customer->x, customer->duration),
                     Phase::Idle},
          *price / customer->duration, customer->duration, EventKind::RentalSuccess,
          std::nullopt};
    }
    const double f = *failure;
    return StepOutcome{PhaseState{RobotCondition::fresh(d), Phase::Idle},
                       (*price - fin.failure_cost - fin.replacement_cost) / f, f,
                       EventKind::RentalFailure, f};
  }

  // Idle phase.
  if (action != SimAction::Continue && action != SimAction::Replace)
    throw std::invalid_argument("step: idle phase requires Continue or Replace");
  if (!customer)
    throw std::invalid_argument("step: idle phase requires the upcoming customer");
  const double gap = customer->interarrival;
  if (action == SimAction::Continue) {
    return StepOutcome{PhaseState{state.condition, Phase::Arrival}, -fin.holding_cost, gap,
                       EventKind::Idled, std::nullopt};
  }
  return StepOutcome{PhaseState{RobotCondition::fresh(d), Phase::Arrival},
                     -fin.replacement_cost / gap - fin.holding_cost, gap,
                     EventKind::Replaced, std::nullopt};
}

}  // namespace raas
