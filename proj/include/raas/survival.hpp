#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "raas/csv.hpp"
#include "raas/types.hpp"

namespace raas {

// One rental observed for hazard estimation: covariate fixed at rental start,
// exposure window (entry_age, exit_age] on the robot-age axis, and whether the
// window ended in a breakdown (failed) or rental completion (censored).
struct RentalRecord {
  Vec covariate;
  double entry_age;
  double exit_age;
  bool failed;

  RentalRecord(Vec z, double entry, double exit, bool fail)
      : covariate(std::move(z)), entry_age(entry), exit_age(exit), failed(fail) {
    detail::require(!covariate.empty(), "RentalRecord: empty covariate");
    detail::require(entry_age >= 0.0, "RentalRecord: negative entry age");
    detail::require(exit_age > entry_age, "RentalRecord: exit must exceed entry");
  }
};

// Records at risk at age t under the left-truncated counting-process
// convention: entry < t <= exit.
inline std::vector<std::size_t> risk_set(const std::vector<RentalRecord>& records,
                                         double t) {
  detail::require(t >= 0.0, "risk_set: negative age");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < records.size(); ++j)
    if (records[j].entry_age < t && t <= records[j].exit_age) out.push_back(j);
  return out;
}

namespace detail {

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

// Shared sweep over failure ages with incrementally maintained risk sums.
// Grouped ties: every failure at the same age contributes against the same
// risk-set denominator.
struct CoxSweep {
  const std::vector<RentalRecord>& records;
  std::vector<std::size_t> by_entry;           // indices sorted by entry age
  std::vector<std::size_t> by_exit;            // indices sorted by exit age
  std::vector<double> failure_ages;            // unique, ascending
  std::vector<std::vector<std::size_t>> died;  // failures grouped per age
  std::size_t dim;

  explicit CoxSweep(const std::vector<RentalRecord>& recs) : records(recs) {
    detail::require(!records.empty(), "cox: no records");
    dim = records[0].covariate.size();
    for (const auto& r : records)
      detail::require(r.covariate.size() == dim, "cox: covariate dimension mismatch");
    by_entry.resize(records.size());
    by_exit.resize(records.size());
    std::iota(by_entry.begin(), by_entry.end(), std::size_t{0});
    by_exit = by_entry;
    std::sort(by_entry.begin(), by_entry.end(), [&](std::size_t a, std::size_t b) {
      return records[a].entry_age != records[b].entry_age
                 ? records[a].entry_age < records[b].entry_age
                 : a < b;
    });
    std::sort(by_exit.begin(), by_exit.end(), [&](std::size_t a, std::size_t b) {
      return records[a].exit_age != records[b].exit_age
                 ? records[a].exit_age < records[b].exit_age
                 : a < b;
    });
    std::vector<std::size_t> fails;
    for (std::size_t j = 0; j < records.size(); ++j)
      if (records[j].failed) fails.push_back(j);
    std::sort(fails.begin(), fails.end(), [&](std::size_t a, std::size_t b) {
      return records[a].exit_age != records[b].exit_age
                 ? records[a].exit_age < records[b].exit_age
                 : a < b;
    });
    for (std::size_t j : fails) {
      if (failure_ages.empty() || records[j].exit_age != failure_ages.back()) {
        failure_ages.push_back(records[j].exit_age);
        died.emplace_back();
      }
      died.back().push_back(j);
    }
  }

  std::size_t n_failures() const {
    std::size_t n = 0;
    for (const auto& g : died) n += g.size();
    return n;
  }

  // Evaluates the partial log-likelihood and optionally its gradient.
  // Returns false (value -inf) when exp overflow makes the point unusable.
  bool evaluate(const Vec& theta, double& loglik, Vec* grad) const {
    detail::require(theta.size() == dim, "cox: theta dimension mismatch");
    const std::size_t n = records.size();
    std::vector<double> w(n), lin(n);
    for (std::size_t j = 0; j < n; ++j) {
      lin[j] = dot(theta, records[j].covariate);
      if (lin[j] > 500.0) {
        loglik = -std::numeric_limits<double>::infinity();
        return false;
      }
      w[j] = std::exp(lin[j]);
    }
    KahanSum sum_w;
    std::vector<KahanSum> sum_wz(dim);
    std::size_t pe = 0, px = 0;
    KahanSum ll;
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    for (std::size_t gi = 0; gi < failure_ages.size(); ++gi) {
      const double t = failure_ages[gi];
      while (pe < n && records[by_entry[pe]].entry_age < t) {
        const std::size_t j = by_entry[pe++];
        sum_w.add(w[j]);
        for (std::size_t k = 0; k < dim; ++k) sum_wz[k].add(w[j] * records[j].covariate[k]);
      }
      while (px < n && records[by_exit[px]].exit_age < t) {
        const std::size_t j = by_exit[px++];
        sum_w.add(-w[j]);
        for (std::size_t k = 0; k < dim; ++k)
          sum_wz[k].add(-w[j] * records[j].covariate[k]);
      }
      const double denom = sum_w.value();
      const double nd = static_cast<double>(died[gi].size());
      ll.add(-nd * std::log(denom));
      for (std::size_t j : died[gi]) ll.add(lin[j]);
      if (grad) {
        for (std::size_t k = 0; k < dim; ++k) {
          double dead_z = 0.0;
          for (std::size_t j : died[gi]) dead_z += records[j].covariate[k];
          (*grad)[k] += dead_z - nd * (sum_wz[k].value() / denom);
        }
      }
    }
    loglik = ll.value();
    return true;
  }
};

}  // namespace detail

// Grouped-ties Cox partial log-likelihood over left-truncated rental windows.
// theta is a plain vector so the likelihood surface can be probed anywhere.
inline double cox_partial_loglik(const Vec& theta,
                                 const std::vector<RentalRecord>& records) {
  detail::CoxSweep sweep(records);
  if (sweep.failure_ages.empty())
    throw std::invalid_argument("cox_partial_loglik: no failures in data");
  double ll = 0.0;
  sweep.evaluate(theta, ll, nullptr);
  return ll;
}

inline Vec cox_gradient(const Vec& theta, const std::vector<RentalRecord>& records) {
  detail::CoxSweep sweep(records);
  if (sweep.failure_ages.empty())
    throw std::invalid_argument("cox_gradient: no failures in data");
  double ll = 0.0;
  Vec grad(theta.size(), 0.0);
  if (!sweep.evaluate(theta, ll, &grad))
    throw std::invalid_argument("cox_gradient: overflow at theta");
  return grad;
}

// Projected gradient ascent with backtracking line search. Iterates project
// onto [0,1]^d: nonnegativity plus the max-norm bound the estimate must obey.
inline DegradationVector fit_theta(const std::vector<RentalRecord>& records,
                                   const LearningConfig& cfg) {
  detail::CoxSweep sweep(records);
  if (sweep.n_failures() < static_cast<std::size_t>(cfg.min_failures))
    throw std::runtime_error("fit_theta: insufficient failures (" +
                             std::to_string(sweep.n_failures()) + " < " +
                             std::to_string(cfg.min_failures) + ")");
  const std::size_t d = sweep.dim;
  const auto boxed = [](double v) { return std::min(1.0, std::max(0.0, v)); };

  Vec theta(d, 0.0);
  double value = 0.0;
  sweep.evaluate(theta, value, nullptr);
  Vec grad(d, 0.0);
  double ll_tmp = 0.0;
  sweep.evaluate(theta, ll_tmp, &grad);

  double step = 1.0;
  constexpr int kMaxIter = 10000;
  constexpr double kGradTol = 1e-6;
  constexpr double kArmijo = 1e-4;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double pg_norm2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double pg = grad[k];
      if (theta[k] <= 0.0) pg = std::max(pg, 0.0);
      if (theta[k] >= 1.0) pg = std::min(pg, 0.0);
      pg_norm2 += pg * pg;
    }
    if (std::sqrt(pg_norm2) < kGradTol) break;

    bool moved = false;
    while (step >= 1e-16) {
      Vec cand(d);
      double dir_gain = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        cand[k] = boxed(theta[k] + step * grad[k]);
        dir_gain += grad[k] * (cand[k] - theta[k]);
      }
      double cand_value = 0.0;
      if (sweep.evaluate(cand, cand_value, nullptr) &&
          cand_value >= value + kArmijo * dir_gain) {
        theta = std::move(cand);
        value = cand_value;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    sweep.evaluate(theta, ll_tmp, &grad);
    step = std::min(step * 2.0, 1e6);
  }
  return DegradationVector(theta);
}

// Step estimate of the cumulative baseline hazard plus its smoothed form.
struct BaselineEstimate {
  Vec jump_ages;   // unique failure ages, ascending
  Vec cum_hazard;  // cumulative values at the jumps, nondecreasing from 0
  std::optional<BaselineHazard> smoothed;
  double bandwidth = 0.0;
};

// Nonparametric cumulative-hazard steps: at each failure age, the group size
// divided by the risk-set sum of exp(theta'z).
inline BaselineEstimate breslow_cumhaz(const Vec& theta_hat,
                                       const std::vector<RentalRecord>& records) {
  detail::CoxSweep sweep(records);
  if (sweep.failure_ages.empty())
    throw std::invalid_argument("breslow_cumhaz: no failures in data");
  const std::size_t n = records.size();
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lin = dot(theta_hat, records[j].covariate);
    detail::require(lin <= 500.0, "breslow_cumhaz: overflow at theta");
    w[j] = std::exp(lin);
  }
  detail::KahanSum sum_w;
  std::size_t pe = 0, px = 0;
  BaselineEstimate est;
  double cum = 0.0;
  for (std::size_t gi = 0; gi < sweep.failure_ages.size(); ++gi) {
    const double t = sweep.failure_ages[gi];
    while (pe < n && records[sweep.by_entry[pe]].entry_age < t) sum_w.add(w[sweep.by_entry[pe++]]);
    while (px < n && records[sweep.by_exit[px]].exit_age < t) sum_w.add(-w[sweep.by_exit[px++]]);
    cum += static_cast<double>(sweep.died[gi].size()) / sum_w.value();
    est.jump_ages.push_back(t);
    est.cum_hazard.push_back(cum);
  }
  return est;
}

// Step-function lookup of the Breslow estimate.
inline double cumulative_at(const BaselineEstimate& est, double t) {
  const auto it = std::upper_bound(est.jump_ages.begin(), est.jump_ages.end(), t);
  if (it == est.jump_ages.begin()) return 0.0;
  return est.cum_hazard[static_cast<std::size_t>(it - est.jump_ages.begin()) - 1];
}

inline double silverman_bandwidth(const Vec& jump_ages) {
  const std::size_t n = jump_ages.size();
  detail::require(n >= 1, "silverman_bandwidth: no jumps");
  double mean = 0.0;
  for (double a : jump_ages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : jump_ages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double bw = 1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
  if (bw > 0.0) return bw;
  return std::max(1e-6, 0.05 * std::max(jump_ages.back(), 1.0));
}

// Gaussian-kernel smoothing of the cumulative-hazard increments onto a
// uniform age grid. Ages live on [0, inf), so each kernel is reflected at the
// origin; without the mirror term the rate near age zero is biased low by up
// to half, exactly over the ages a freshly replaced robot operates at. The
// grid extends 4 bandwidths past the last jump so the right tail keeps its
// mass. bandwidth <= 0 selects the Silverman rule.
inline BaselineHazard smooth_hazard(const BaselineEstimate& est, double bandwidth,
                                    int grid_points = 512) {
  detail::require(!est.jump_ages.empty(), "smooth_hazard: no jumps");
  detail::require(grid_points >= 2, "smooth_hazard: grid_points must be >= 2");
  const double bw = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(est.jump_ages);
  const double t_max = est.jump_ages.back() + 4.0 * bw;
  const double step = t_max / (grid_points - 1);
  const double inv_norm = 1.0 / (bw * std::sqrt(2.0 * M_PI));
  Vec ages(grid_points), rates(grid_points, 0.0);
  for (int k = 0; k < grid_points; ++k) {
    const double t = step * k;
    ages[k] = t;
    double r = 0.0;
    for (std::size_t i = 0; i < est.jump_ages.size(); ++i) {
      const double mass = est.cum_hazard[i] - (i ? est.cum_hazard[i - 1] : 0.0);
      const double u = (t - est.jump_ages[i]) / bw;
      const double v = (t + est.jump_ages[i]) / bw;
      r += mass * inv_norm * (std::exp(-0.5 * u * u) + std::exp(-0.5 * v * v));
    }
    rates[k] = r;
  }
  return BaselineHazard::tabulated(std::move(ages), std::move(rates));
}

inline BaselineEstimate estimate_baseline(const Vec& theta_hat,
                                          const std::vector<RentalRecord>& records,
                                          double bandwidth = 0.0) {
  BaselineEstimate est = breslow_cumhaz(theta_hat, records);
  est.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(est.jump_ages);
  est.smoothed = smooth_hazard(est, est.bandwidth);
  return est;
}

inline std::string rental_csv_header(std::size_t dim) {
  std::string h;
  for (std::size_t k = 0; k < dim; ++k) h += "z_" + std::to_string(k + 1) + ",";
  return h + "entry_age,exit_age,failed";
}

inline void write_rental_records(std::ostream& out,
                                 const std::vector<RentalRecord>& records) {
  detail::require(!records.empty(), "write_rental_records: no records");
  const std::size_t d = records[0].covariate.size();
  out << rental_csv_header(d) << '\n';
  for (const auto& r : records) {
    for (std::size_t k = 0; k < d; ++k) out << fmt17(r.covariate[k]) << ',';
    out << fmt17(r.entry_age) << ',' << fmt17(r.exit_age) << ',' << (r.failed ? 1 : 0)
        << '\n';
  }
}

inline std::vector<RentalRecord> read_rental_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("rental CSV: empty input");
  std::size_t dim = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(hs, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4 || cells[cells.size() - 1] != "failed")
      throw std::runtime_error("rental CSV: bad header");
    dim = cells.size() - 3;
  }
  std::vector<RentalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != dim + 3)
      throw std::runtime_error("rental CSV: wrong column count at line " +
                               std::to_string(lineno));
    Vec z(vals.begin(), vals.begin() + dim);
    out.emplace_back(std::move(z), vals[dim], vals[dim + 1], vals[dim + 2] != 0.0);
  }
  return out;
}

}  // namespace raas
