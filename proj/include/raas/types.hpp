#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace raas {

using Vec = std::vector<double>;

// Absolute slack absorbing floating-point error on norm bounds.
inline constexpr double kNormSlack = 1e-12;

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

inline Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec scaled(const Vec& a, double c) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline bool all_nonneg(const Vec& a) {
  for (double v : a)
    if (!(v >= 0.0)) return false;
  return true;
}

// Job characteristics vector: nonnegative, Euclidean norm at most 1.
struct ContextVector {
  Vec coords;

  explicit ContextVector(Vec c) : coords(std::move(c)) {
    detail::require(!coords.empty(), "ContextVector: empty");
    detail::require(all_nonneg(coords), "ContextVector: negative coordinate");
    detail::require(norm2(coords) <= 1.0 + kNormSlack, "ContextVector: norm exceeds 1");
  }
  std::size_t dim() const { return coords.size(); }
};

// Customer willingness-to-pay weights: nonnegative, Euclidean norm at most 1.
struct UtilityVector {
  Vec coords;

  explicit UtilityVector(Vec c) : coords(std::move(c)) {
    detail::require(!coords.empty(), "UtilityVector: empty");
    detail::require(all_nonneg(coords), "UtilityVector: negative coordinate");
    detail::require(norm2(coords) <= 1.0 + kNormSlack, "UtilityVector: norm exceeds 1");
  }
  std::size_t dim() const { return coords.size(); }
};

// Wear sensitivity weights: nonnegative, max-norm at most 1.
struct DegradationVector {
  Vec coords;

  explicit DegradationVector(Vec c) : coords(std::move(c)) {
    detail::require(!coords.empty(), "DegradationVector: empty");
    detail::require(all_nonneg(coords), "DegradationVector: negative coordinate");
    detail::require(norm_inf(coords) <= 1.0 + kNormSlack,
                    "DegradationVector: max-norm exceeds 1");
  }
  std::size_t dim() const { return coords.size(); }
};

struct CustomerArrival {
  ContextVector x;
  double duration;      // requested rental length, time units
  double interarrival;  // gap since the previous customer interaction

  CustomerArrival(ContextVector ctx, double dur, double gap)
      : x(std::move(ctx)), duration(dur), interarrival(gap) {
    detail::require(duration > 0.0, "CustomerArrival: duration must be > 0");
    detail::require(interarrival > 0.0, "CustomerArrival: interarrival must be > 0");
  }
};

// Cumulative usage since the robot was last replaced.
struct RobotCondition {
  Vec cumulative_context;
  double age;  // total operational time

  RobotCondition(Vec ctx, double t_age) : cumulative_context(std::move(ctx)), age(t_age) {
    detail::require(all_nonneg(cumulative_context), "RobotCondition: negative context");
    detail::require(age >= 0.0, "RobotCondition: negative age");
  }

  static RobotCondition fresh(std::size_t d) { return RobotCondition(zeros(d), 0.0); }
};

inline RobotCondition after_rental(const RobotCondition& cond, const ContextVector& x,
                                   double duration) {
  return RobotCondition(add(cond.cumulative_context, x.coords), cond.age + duration);
}

enum class Phase { Arrival, Idle };

struct PhaseState {
  RobotCondition condition;
  Phase phase;
};

struct FinancialParams {
  double holding_cost = 0.0;      // per time unit while waiting
  double failure_cost = 0.0;      // charged on each mid-rental breakdown
  double replacement_cost = 0.0;  // charged on each robot swap

  void validate() const {
    detail::require(holding_cost >= 0.0, "financial.holding_cost: must be >= 0");
    detail::require(failure_cost >= 0.0, "financial.failure_cost: must be >= 0");
    detail::require(replacement_cost >= 0.0, "financial.replacement_cost: must be >= 0");
  }
};

// Age-dependent failure intensity at zero covariates. Either a constant rate
// or a tabulated curve with linear interpolation; the table extends flat on
// both sides so the cumulative form is defined for every age.
class BaselineHazard {
 public:
  static BaselineHazard constant(double rate) {
    detail::require(rate >= 0.0, "BaselineHazard: rate must be >= 0");
    BaselineHazard h;
    h.constant_ = true;
    h.rate_ = rate;
    return h;
  }

  static BaselineHazard tabulated(Vec ages, Vec rates) {
    detail::require(ages.size() >= 2, "BaselineHazard: table needs >= 2 knots");
    detail::require(ages.size() == rates.size(), "BaselineHazard: table size mismatch");
    detail::require(ages.front() >= 0.0, "BaselineHazard: negative age knot");
    for (std::size_t i = 1; i < ages.size(); ++i)
      detail::require(ages[i] > ages[i - 1], "BaselineHazard: ages must increase");
    detail::require(all_nonneg(rates), "BaselineHazard: negative rate");
    BaselineHazard h;
    h.constant_ = false;
    h.ages_ = std::move(ages);
    h.rates_ = std::move(rates);
    h.cum_.resize(h.ages_.size());
    h.cum_[0] = h.ages_[0] * h.rates_[0];  // flat extension down to age 0
    for (std::size_t i = 1; i < h.ages_.size(); ++i) {
      h.cum_[i] = h.cum_[i - 1] + 0.5 * (h.rates_[i - 1] + h.rates_[i]) *
                                      (h.ages_[i] - h.ages_[i - 1]);
    }
    return h;
  }

  bool is_constant() const { return constant_; }
  double constant_rate() const { return rate_; }
  const Vec& table_ages() const { return ages_; }
  const Vec& table_rates() const { return rates_; }

  double rate(double t) const {
    detail::require(t >= 0.0, "BaselineHazard::rate: negative age");
    if (constant_) return rate_;
    if (t <= ages_.front()) return rates_.front();
    if (t >= ages_.back()) return rates_.back();
    const std::size_t i = segment(t);
    const double w = (t - ages_[i]) / (ages_[i + 1] - ages_[i]);
    return rates_[i] + w * (rates_[i + 1] - rates_[i]);
  }

  // Integral of the rate from age 0 to t.
  double cumulative(double t) const {
    detail::require(t >= 0.0, "BaselineHazard::cumulative: negative age");
    if (constant_) return rate_ * t;
    if (t <= ages_.front()) return rates_.front() * t;
    if (t >= ages_.back()) return cum_.back() + rates_.back() * (t - ages_.back());
    const std::size_t i = segment(t);
    const double dt = t - ages_[i];
    const double slope = (rates_[i + 1] - rates_[i]) / (ages_[i + 1] - ages_[i]);
    return cum_[i] + rates_[i] * dt + 0.5 * slope * dt * dt;
  }

  double cumulative_between(double t0, double t1) const {
    return cumulative(t1) - cumulative(t0);
  }

  // Smallest dt >= 0 with cumulative(t0+dt) - cumulative(t0) >= target,
  // or +inf when the tail mass never reaches the target. Constant rates
  // invert in closed form; tables are bisected to 1e-9 time units.
  double inverse_increment(double t0, double target) const {
    detail::require(t0 >= 0.0, "BaselineHazard::inverse_increment: negative age");
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (target <= 0.0) return 0.0;
    if (constant_) return rate_ > 0.0 ? target / rate_ : kInf;
    const double base = cumulative(t0);
    double hi = std::max(1.0, ages_.back() - t0);
    for (int round = 0; round < 200; ++round) {
      if (cumulative(t0 + hi) - base >= target) break;
      if (t0 + hi >= ages_.back() && rates_.back() <= 0.0) return kInf;
      hi *= 2.0;
      if (!(hi < kInf)) return kInf;
    }
    if (cumulative(t0 + hi) - base < target) return kInf;
    double lo = 0.0;
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      if (cumulative(t0 + mid) - base >= target)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  }

 private:
  BaselineHazard() = default;

  std::size_t segment(double t) const {
    const auto it = std::upper_bound(ages_.begin(), ages_.end(), t);
    return static_cast<std::size_t>(it - ages_.begin()) - 1;
  }

  bool constant_ = true;
  double rate_ = 0.0;
  Vec ages_;
  Vec rates_;
  Vec cum_;
};

struct GroundTruth {
  UtilityVector u;
  DegradationVector theta;
  BaselineHazard baseline;
};

// Knobs for the utility learner and the online exploration schedule.
struct LearningConfig {
  double diameter_tol = 1e-4;   // uncertainty-set width that ends the search phase
  int n_samples = 2000;         // hit-and-run cloud size
  int burn_in = 8000;           // chain steps discarded before sampling (500*d^2)
  double target_accept = 0.01;  // chain tuning knob; unused by the exact-chord sampler
  double price_discount = 1e-2; // markdown applied while waiting for first failures
  int retrain_failures = 100;   // failures accumulated between policy refreshes
  double eps_initial = 0.10;    // epsilon-greedy starting exploration rate
  double eps_decay = 0.95;      // multiplies epsilon after each retrain
  int min_failures = 2;         // failures required before the first hazard fit

  void validate() const {
    detail::require(diameter_tol > 0.0, "learning.diameter_tol: must be > 0");
    detail::require(n_samples > 0, "learning.n_samples: must be > 0");
    detail::require(burn_in > 0, "learning.burn_in: must be > 0");
    detail::require(target_accept > 0.0, "learning.target_accept: must be > 0");
    detail::require(price_discount > 0.0, "learning.price_discount: must be > 0");
    detail::require(retrain_failures > 0, "learning.retrain_failures: must be > 0");
    detail::require(eps_initial >= 0.0 && eps_initial <= 1.0,
                    "learning.eps_initial: must be in [0,1]");
    detail::require(eps_decay > 0.0 && eps_decay <= 1.0,
                    "learning.eps_decay: must be in (0,1]");
    detail::require(min_failures > 0, "learning.min_failures: must be > 0");
  }
};

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;

  void validate(const std::string& name) const {
    detail::require(lo < hi, name + ": lo must be < hi");
    detail::require(count >= 2, name + ": count must be >= 2");
  }
  double spacing() const { return (hi - lo) / (count - 1); }
  double at(int i) const { return lo + spacing() * i; }
};

struct SolverConfig {
  double discount = 0.95;  // per decision epoch
  GridSpec deg{0.0, 8.0, 33};     // arrival grid: projected degradation
  GridSpec rev{0.0, 1.0, 17};     // arrival grid: projected revenue
  GridSpec dur{0.0, 50.0, 17};    // arrival grid: rental duration
  GridSpec age{0.0, 400.0, 17};   // arrival grid: robot age
  GridSpec idle_deg{0.0, 8.0, 33};
  GridSpec idle_age{0.0, 400.0, 17};
  int mc_samples = 512;  // common-random-numbers customer draws per backup
  double tol = 1e-6;     // sup-norm stopping tolerance
  int max_iter = 2000;

  void validate() const {
    detail::require(discount >= 0.0 && discount < 1.0, "solver.discount: must be in [0,1)");
    deg.validate("solver.arrival_grid.deg");
    rev.validate("solver.arrival_grid.rev");
    dur.validate("solver.arrival_grid.duration");
    age.validate("solver.arrival_grid.age");
    idle_deg.validate("solver.idle_grid.deg");
    idle_age.validate("solver.idle_grid.age");
    detail::require(mc_samples > 0, "solver.mc_samples: must be > 0");
    detail::require(tol > 0.0, "solver.tol: must be > 0");
    detail::require(max_iter > 0, "solver.max_iter: must be > 0");
  }
};

}  // namespace raas
