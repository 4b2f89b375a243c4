#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "raas/csv.hpp"
#include "raas/rng.hpp"
#include "raas/sim_env.hpp"
#include "raas/types.hpp"

namespace raas {

// Floor applied wherever a reward divides by an elapsed time; keeps the
// normalized rewards bounded when a duration or failure time approaches 0.
inline constexpr double kTimeFloor = 1e-3;

enum class ArrivalAction { Accept, Reject };
enum class IdleAction { Continue, Replace };

inline std::string to_string(ArrivalAction a) {
  return a == ArrivalAction::Accept ? "Accept" : "Reject";
}
inline std::string to_string(IdleAction a) {
  return a == IdleAction::Continue ? "Continue" : "Replace";
}

inline ArrivalAction epsilon_greedy(ArrivalAction a, double eps, RngStream& rng) {
  detail::require(eps >= 0.0 && eps <= 1.0, "epsilon_greedy: eps must be in [0,1]");
  if (rng.uniform01() < eps)
    return rng.uniform01() < 0.5 ? ArrivalAction::Accept : ArrivalAction::Reject;
  return a;
}
inline IdleAction epsilon_greedy(IdleAction a, double eps, RngStream& rng) {
  detail::require(eps >= 0.0 && eps <= 1.0, "epsilon_greedy: eps must be in [0,1]");
  if (rng.uniform01() < eps)
    return rng.uniform01() < 0.5 ? IdleAction::Continue : IdleAction::Replace;
  return a;
}

// Arrival decision state: everything the dynamics depend on collapses to the
// projected degradation (robot plus incoming job), the projected revenue, the
// requested duration, and the robot age.
struct ProjectedArrivalState {
  double deg = 0.0;
  double rev = 0.0;
  double duration = 0.0;
  double age = 0.0;
};

struct ProjectedIdleState {
  double deg = 0.0;
  double age = 0.0;
};

inline ProjectedArrivalState project_arrival_state(const Vec& theta, const Vec& utility,
                                                   const RobotCondition& cond,
                                                   const ContextVector& x, double duration) {
  ProjectedArrivalState s;
  s.deg = dot(theta, cond.cumulative_context) + dot(theta, x.coords);
  s.rev = std::max(0.0, dot(utility, x.coords));
  s.duration = duration;
  s.age = cond.age;
  return s;
}

// Common-random-numbers customer draws, stored raw so the same draws can be
// re-projected whenever the estimates change.
struct CustomerSample {
  std::vector<Vec> contexts;
  Vec durations;
  Vec gaps;
};

inline CustomerSample build_customer_sample(const CustomerDistribution& dist, int n,
                                            RngStream& rng) {
  detail::require(n >= 1, "build_customer_sample: n must be >= 1");
  CustomerSample s;
  s.contexts.reserve(n);
  s.durations.reserve(n);
  s.gaps.reserve(n);
  for (int i = 0; i < n; ++i) {
    const CustomerArrival c = sample_customer(dist, rng);
    s.contexts.push_back(c.x.coords);
    s.durations.push_back(c.duration);
    s.gaps.push_back(c.interarrival);
  }
  return s;
}

// Decision model: parameter estimates (or ground truth for the oracle), the
// cost structure, and the fixed customer sample with its projections.
struct MdpModel {
  Vec utility;
  Vec degradation;
  BaselineHazard baseline;
  FinancialParams fin;
  Vec cust_deg;      // degradation increment per draw
  Vec cust_rev;      // offered price per draw (clamped at 0)
  Vec cust_dur;
  double inv_mean_gap = 0.0;  // reciprocal of the sample-mean interarrival
};

inline MdpModel make_mdp_model(const Vec& utility, const Vec& degradation,
                               const BaselineHazard& baseline, const FinancialParams& fin,
                               const CustomerSample& sample) {
  MdpModel m{utility, degradation, baseline, fin, {}, {}, {}, 0.0};
  const std::size_t n = sample.contexts.size();
  detail::require(n >= 1, "make_mdp_model: empty customer sample");
  m.cust_deg.resize(n);
  m.cust_rev.resize(n);
  m.cust_dur = sample.durations;
  double gap_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m.cust_deg[i] = dot(degradation, sample.contexts[i]);
    m.cust_rev[i] = std::max(0.0, dot(utility, sample.contexts[i]));
    gap_sum += sample.gaps[i];
  }
  // Normalized branch costs divide by the branch's expected elapsed time;
  // the expectation of 1/gap itself diverges for exponential gaps.
  m.inv_mean_gap = static_cast<double>(n) / gap_sum;
  return m;
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1,1], computed once by Newton iteration.
inline const std::pair<std::array<double, 64>, std::array<double, 64>>&
gauss_legendre_64() {
  static const auto table = [] {
    constexpr int n = 64;
    std::array<double, 64> nodes{}, weights{};
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-15) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    return std::make_pair(nodes, weights);
  }();
  return table;
}

}  // namespace detail

// Failure probability and conditional mean failure time E[f | failure] for a
// rental of length T starting at robot age t with hazard multiplier exp(deg).
// The failure branch of the backup divides by the conditional mean, floored
// at kTimeFloor so the normalized loss stays bounded when the hazard is
// concentrated at the start of the rental.
struct HazardTerms {
  double p_fail = 0.0;
  double mean_failure_time = 0.0;
};

inline HazardTerms hazard_terms(const BaselineHazard& baseline, double deg, double duration,
                                double age) {
  HazardTerms out;
  if (!(duration > 0.0)) return out;
  const double mult = std::exp(std::min(deg, 500.0));
  const double base = baseline.cumulative(age);
  const double inc = baseline.cumulative(age + duration) - base;
  out.p_fail = -std::expm1(-mult * inc);
  if (out.p_fail < 1e-12) {
    out.p_fail = std::max(out.p_fail, 0.0);
    return out;
  }
  // E[f | failure] = integral of f * density over the rental, divided by
  // p_fail; the integrand is smooth, so the 64-point rule applies directly.
  const auto& [nodes, weights] = detail::gauss_legendre_64();
  const double half = 0.5 * duration;
  double integral = 0.0;
  for (int q = 0; q < 64; ++q) {
    const double f = half * (nodes[q] + 1.0);
    integral += weights[q] * f * mult * baseline.rate(age + f) *
                std::exp(-mult * (baseline.cumulative(age + f) - base));
  }
  integral *= half;
  out.mean_failure_time =
      std::min(duration, std::max(0.0, integral / out.p_fail));
  return out;
}

namespace detail {

struct AxisPos {
  int i;
  double w;
};

inline AxisPos locate(const GridSpec& axis, double x) {
  const double xc = std::min(axis.hi, std::max(axis.lo, x));
  double u = (xc - axis.lo) / axis.spacing();
  int i = static_cast<int>(u);
  if (i > axis.count - 2) i = axis.count - 2;
  if (i < 0) i = 0;
  double w = u - i;
  if (w < 0.0) w = 0.0;
  if (w > 1.0) w = 1.0;
  return {i, w};
}

inline double interp2(const Vec& table, const GridSpec& a, const GridSpec& b, double x,
                      double y) {
  const AxisPos pa = locate(a, x);
  const AxisPos pb = locate(b, y);
  const int nb = b.count;
  const double v00 = table[pa.i * nb + pb.i];
  const double v01 = table[pa.i * nb + pb.i + 1];
  const double v10 = table[(pa.i + 1) * nb + pb.i];
  const double v11 = table[(pa.i + 1) * nb + pb.i + 1];
  return (1.0 - pa.w) * ((1.0 - pb.w) * v00 + pb.w * v01) +
         pa.w * ((1.0 - pb.w) * v10 + pb.w * v11);
}

}  // namespace detail

// Converged decision tables on the discretized projected state spaces.
struct PolicyTables {
  GridSpec deg, rev, dur, age;  // arrival axes
  GridSpec idle_deg, idle_age;  // idle axes
  Vec arrival_value;
  std::vector<std::uint8_t> arrival_accept;
  Vec idle_value, idle_q_continue, idle_q_replace;
  std::vector<std::uint8_t> idle_replace;

  std::size_t arr_index(int i0, int i1, int i2, int i3) const {
    return ((static_cast<std::size_t>(i0) * rev.count + i1) * dur.count + i2) * age.count +
           i3;
  }
  std::size_t idle_index(int i, int j) const {
    return static_cast<std::size_t>(i) * idle_age.count + j;
  }
  std::size_t arrival_size() const {
    return static_cast<std::size_t>(deg.count) * rev.count * dur.count * age.count;
  }
  std::size_t idle_size() const {
    return static_cast<std::size_t>(idle_deg.count) * idle_age.count;
  }
};

namespace detail {

struct ArrivalEval {
  double value;
  double q_accept;
  double q_reject;
  bool accept;
};

// One arrival-phase Bellman evaluation against the idle tables. Evaluated
// exactly at the query state: the immediate term rev/T is 1/T-shaped, so it
// is never interpolated across the duration axis.
inline ArrivalEval arrival_backup(double deg, double rev, double duration, double age,
                                  const HazardTerms& ht, const PolicyTables& t,
                                  const MdpModel& model, double discount, double idle00) {
  const double q_reject =
      discount * interp2(t.idle_q_continue, t.idle_deg, t.idle_age, deg, age);
  const double surv_cont =
      discount * interp2(t.idle_value, t.idle_deg, t.idle_age, deg, age + duration);
  const double q_accept =
      (1.0 - ht.p_fail) * (rev / std::max(duration, kTimeFloor) + surv_cont) +
      ht.p_fail * ((rev - model.fin.failure_cost - model.fin.replacement_cost) /
                       std::max(ht.mean_failure_time, kTimeFloor) +
                   discount * idle00);
  const bool accept = q_accept >= q_reject;  // tie resolves to Accept
  return {accept ? q_accept : q_reject, q_accept, q_reject, accept};
}

}  // namespace detail

struct ValueIterationResult {
  PolicyTables tables;
  Vec residuals;
  int iterations = 0;
  bool converged = false;
};

// Synchronous sweeps to a fixed point: each iteration rebuilds the idle
// value/action tables and the exported arrival table from the previous
// snapshot, so the measured sup-norm residuals contract at rate discount.
inline ValueIterationResult value_iteration(const MdpModel& model, const SolverConfig& cfg,
                                            const PolicyTables* warm_start = nullptr) {
  cfg.validate();
  PolicyTables t;
  t.deg = cfg.deg;
  t.rev = cfg.rev;
  t.dur = cfg.dur;
  t.age = cfg.age;
  t.idle_deg = cfg.idle_deg;
  t.idle_age = cfg.idle_age;
  const std::size_t arr_n = t.arrival_size();
  const std::size_t idle_n = t.idle_size();
  t.arrival_value.assign(arr_n, 0.0);
  t.arrival_accept.assign(arr_n, 0);
  t.idle_value.assign(idle_n, 0.0);
  t.idle_q_continue.assign(idle_n, 0.0);
  t.idle_q_replace.assign(idle_n, 0.0);
  t.idle_replace.assign(idle_n, 0);
  if (warm_start && warm_start->arrival_value.size() == arr_n &&
      warm_start->idle_value.size() == idle_n) {
    t.arrival_value = warm_start->arrival_value;
    t.idle_value = warm_start->idle_value;
    t.idle_q_continue = warm_start->idle_q_continue;
    t.idle_q_replace = warm_start->idle_q_replace;
  }

  const int mc = static_cast<int>(model.cust_deg.size());
  const double inv_mc = 1.0 / mc;
  const double gamma = cfg.discount;

  // Hazard functionals are policy-independent: precompute them at every
  // arrival grid node and at every (idle node, customer draw) pair.
  std::vector<HazardTerms> arr_terms(static_cast<std::size_t>(t.deg.count) * t.dur.count *
                                     t.age.count);
  for (int i0 = 0; i0 < t.deg.count; ++i0)
    for (int i2 = 0; i2 < t.dur.count; ++i2)
      for (int i3 = 0; i3 < t.age.count; ++i3)
        arr_terms[(static_cast<std::size_t>(i0) * t.dur.count + i2) * t.age.count + i3] =
            hazard_terms(model.baseline, t.deg.at(i0), t.dur.at(i2), t.age.at(i3));

  std::vector<HazardTerms> draw_idle_terms(static_cast<std::size_t>(mc) * idle_n);
  for (int m = 0; m < mc; ++m)
    for (int i = 0; i < t.idle_deg.count; ++i)
      for (int j = 0; j < t.idle_age.count; ++j)
        draw_idle_terms[static_cast<std::size_t>(m) * idle_n + t.idle_index(i, j)] =
            hazard_terms(model.baseline, t.idle_deg.at(i) + model.cust_deg[m],
                         model.cust_dur[m], t.idle_age.at(j));

  std::vector<HazardTerms> draw_repl_terms(mc);
  for (int m = 0; m < mc; ++m)
    draw_repl_terms[m] =
        hazard_terms(model.baseline, model.cust_deg[m], model.cust_dur[m], 0.0);

  ValueIterationResult result;
  Vec new_arr(arr_n), new_idle(idle_n), new_qc(idle_n), new_qr(idle_n);
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double idle00 =
        detail::interp2(t.idle_value, t.idle_deg, t.idle_age, 0.0, 0.0);

    double repl_cont = 0.0;
    for (int m = 0; m < mc; ++m)
      repl_cont += detail::arrival_backup(model.cust_deg[m], model.cust_rev[m],
                                          model.cust_dur[m], 0.0, draw_repl_terms[m], t,
                                          model, gamma, idle00)
                       .value;
    repl_cont *= inv_mc;

    for (int i = 0; i < t.idle_deg.count; ++i) {
      const double c = t.idle_deg.at(i);
      for (int j = 0; j < t.idle_age.count; ++j) {
        const double age = t.idle_age.at(j);
        const std::size_t idx = t.idle_index(i, j);
        double cont = 0.0;
        for (int m = 0; m < mc; ++m)
          cont += detail::arrival_backup(
                      c + model.cust_deg[m], model.cust_rev[m], model.cust_dur[m], age,
                      draw_idle_terms[static_cast<std::size_t>(m) * idle_n + idx], t,
                      model, gamma, idle00)
                      .value;
        const double q_cont = -model.fin.holding_cost + gamma * cont * inv_mc;
        const double q_repl = -model.fin.replacement_cost * model.inv_mean_gap -
                              model.fin.holding_cost + gamma * repl_cont;
        new_qc[idx] = q_cont;
        new_qr[idx] = q_repl;
        new_idle[idx] = std::max(q_cont, q_repl);
        t.idle_replace[idx] = q_repl > q_cont ? 1 : 0;  // tie resolves to Continue
      }
    }

    for (int i0 = 0; i0 < t.deg.count; ++i0)
      for (int i1 = 0; i1 < t.rev.count; ++i1)
        for (int i2 = 0; i2 < t.dur.count; ++i2)
          for (int i3 = 0; i3 < t.age.count; ++i3) {
            const auto ev = detail::arrival_backup(
                t.deg.at(i0), t.rev.at(i1), t.dur.at(i2), t.age.at(i3),
                arr_terms[(static_cast<std::size_t>(i0) * t.dur.count + i2) * t.age.count +
                          i3],
                t, model, gamma, idle00);
            const std::size_t idx = t.arr_index(i0, i1, i2, i3);
            new_arr[idx] = ev.value;
            t.arrival_accept[idx] = ev.accept ? 1 : 0;
          }

    double residual = 0.0;
    for (std::size_t i = 0; i < arr_n; ++i)
      residual = std::max(residual, std::fabs(new_arr[i] - t.arrival_value[i]));
    for (std::size_t i = 0; i < idle_n; ++i) {
      residual = std::max(residual, std::fabs(new_idle[i] - t.idle_value[i]));
      residual = std::max(residual, std::fabs(new_qc[i] - t.idle_q_continue[i]));
      residual = std::max(residual, std::fabs(new_qr[i] - t.idle_q_replace[i]));
    }
    if (!std::isfinite(residual))
      throw std::runtime_error("value_iteration: non-finite value encountered");
    t.arrival_value.swap(new_arr);
    t.idle_value.swap(new_idle);
    t.idle_q_continue.swap(new_qc);
    t.idle_q_replace.swap(new_qr);
    result.residuals.push_back(residual);
    result.iterations = it + 1;
    if (residual < cfg.tol) {
      result.converged = true;
      break;
    }
  }
  result.tables = std::move(t);
  return result;
}

struct ArrivalBackupResult {
  double value = 0.0;
  ArrivalAction action = ArrivalAction::Reject;
  double q_accept = 0.0;
  double q_reject = 0.0;
};

// Exact single-state arrival backup against converged tables.
inline ArrivalBackupResult bellman_backup_arrival(const ProjectedArrivalState& s,
                                                  const PolicyTables& tables,
                                                  const MdpModel& model,
                                                  const SolverConfig& cfg) {
  const HazardTerms ht = hazard_terms(model.baseline, s.deg, s.duration, s.age);
  const double idle00 =
      detail::interp2(tables.idle_value, tables.idle_deg, tables.idle_age, 0.0, 0.0);
  const auto ev = detail::arrival_backup(s.deg, s.rev, s.duration, s.age, ht, tables, model,
                                         cfg.discount, idle00);
  return {ev.value, ev.accept ? ArrivalAction::Accept : ArrivalAction::Reject, ev.q_accept,
          ev.q_reject};
}

struct IdleBackupResult {
  double value = 0.0;
  IdleAction action = IdleAction::Continue;
  double q_continue = 0.0;
  double q_replace = 0.0;
};

// Exact single-state idle backup: expectation over the model's customer
// sample of arrival backups, with hazard terms computed on the fly.
inline IdleBackupResult bellman_backup_idle(const ProjectedIdleState& s,
                                            const PolicyTables& tables,
                                            const MdpModel& model,
                                            const SolverConfig& cfg) {
  const int mc = static_cast<int>(model.cust_deg.size());
  const double idle00 =
      detail::interp2(tables.idle_value, tables.idle_deg, tables.idle_age, 0.0, 0.0);
  double cont = 0.0, repl = 0.0;
  for (int m = 0; m < mc; ++m) {
    const HazardTerms ht_c = hazard_terms(model.baseline, s.deg + model.cust_deg[m],
                                          model.cust_dur[m], s.age);
    cont += detail::arrival_backup(s.deg + model.cust_deg[m], model.cust_rev[m],
                                   model.cust_dur[m], s.age, ht_c, tables, model,
                                   cfg.discount, idle00)
                .value;
    const HazardTerms ht_r =
        hazard_terms(model.baseline, model.cust_deg[m], model.cust_dur[m], 0.0);
    repl += detail::arrival_backup(model.cust_deg[m], model.cust_rev[m], model.cust_dur[m],
                                   0.0, ht_r, tables, model, cfg.discount, idle00)
                .value;
  }
  const double q_continue =
      -model.fin.holding_cost + cfg.discount * cont / mc;
  const double q_replace = -model.fin.replacement_cost * model.inv_mean_gap -
                           model.fin.holding_cost + cfg.discount * repl / mc;
  const bool do_continue = q_continue >= q_replace;
  return {do_continue ? q_continue : q_replace,
          do_continue ? IdleAction::Continue : IdleAction::Replace, q_continue, q_replace};
}

inline ArrivalAction greedy_arrival_action(const PolicyTables& tables, const MdpModel& model,
                                           const SolverConfig& cfg,
                                           const ProjectedArrivalState& s) {
  return bellman_backup_arrival(s, tables, model, cfg).action;
}

// Idle decisions interpolate the converged action-value tables.
inline IdleAction greedy_idle_action(const PolicyTables& tables,
                                     const ProjectedIdleState& s) {
  const double qc =
      detail::interp2(tables.idle_q_continue, tables.idle_deg, tables.idle_age, s.deg, s.age);
  const double qr =
      detail::interp2(tables.idle_q_replace, tables.idle_deg, tables.idle_age, s.deg, s.age);
  return qc >= qr ? IdleAction::Continue : IdleAction::Replace;
}

// Smallest grid degradation at which the idle policy replaces, per age node.
inline std::vector<std::optional<double>> replacement_boundary(const PolicyTables& tables) {
  std::vector<std::optional<double>> out(tables.idle_age.count);
  for (int j = 0; j < tables.idle_age.count; ++j) {
    for (int i = 0; i < tables.idle_deg.count; ++i) {
      if (tables.idle_replace[tables.idle_index(i, j)]) {
        out[j] = tables.idle_deg.at(i);
        break;
      }
    }
  }
  return out;
}

inline void write_idle_policy_csv(std::ostream& out, const PolicyTables& t) {
  out << "c_c,t,value,action\n";
  for (int i = 0; i < t.idle_deg.count; ++i)
    for (int j = 0; j < t.idle_age.count; ++j) {
      const std::size_t idx = t.idle_index(i, j);
      out << fmt17(t.idle_deg.at(i)) << ',' << fmt17(t.idle_age.at(j)) << ','
          << fmt17(t.idle_value[idx]) << ','
          << (t.idle_replace[idx] ? "Replace" : "Continue") << '\n';
    }
}

inline void write_idle_boundary_csv(std::ostream& out, const PolicyTables& t) {
  out << "t,c_c_threshold\n";
  const auto boundary = replacement_boundary(t);
  for (int j = 0; j < t.idle_age.count; ++j) {
    out << fmt17(t.idle_age.at(j)) << ',';
    if (boundary[j]) out << fmt17(*boundary[j]);
    out << '\n';
  }
}

// Arrival decision regions at selected revenue-grid slices.
inline void write_arrival_slices_csv(std::ostream& out, const PolicyTables& t,
                                     const std::vector<std::pair<double, int>>& slices) {
  out << "slice_percentile,c_rev,c_deg,T,t,value,action\n";
  for (const auto& [pct, i1] : slices) {
    for (int i0 = 0; i0 < t.deg.count; ++i0)
      for (int i2 = 0; i2 < t.dur.count; ++i2)
        for (int i3 = 0; i3 < t.age.count; ++i3) {
          const std::size_t idx = t.arr_index(i0, i1, i2, i3);
          out << fmt17(pct) << ',' << fmt17(t.rev.at(i1)) << ',' << fmt17(t.deg.at(i0))
              << ',' << fmt17(t.dur.at(i2)) << ',' << fmt17(t.age.at(i3)) << ','
              << fmt17(t.arrival_value[idx]) << ','
              << (t.arrival_accept[idx] ? "Accept" : "Reject") << '\n';
        }
  }
}

}  // namespace raas
