#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "raas/rng.hpp"
#include "raas/types.hpp"

namespace raas {

struct Halfspace {
  Vec normal;
  double offset = 0.0;
  enum class Sense { Ge, Le } sense = Sense::Ge;

  double slack(const Vec& s) const {
    const double v = dot(normal, s);
    return sense == Sense::Ge ? v - offset : offset - v;
  }
  bool satisfied(const Vec& s, double tol) const { return slack(s) >= -tol; }
};

// Convex body known to contain the customer utility vector: the unit ball
// intersected with the accumulated response halfspaces. Tracks the orthonormal
// directions along which the body has become thin, plus a feasible anchor
// point that seeds the sampler.
struct UncertaintySet {
  int dim = 0;
  std::vector<Halfspace> halfspaces;
  std::vector<Vec> small_width_dirs;   // pairwise orthonormal
  std::vector<double> small_widths;    // measured width per direction
  Vec anchor;
  double width_threshold = 1e-3;       // width below which a direction joins

  static UncertaintySet unit_ball(int d, double width_threshold) {
    detail::require(d >= 1, "UncertaintySet: dim must be >= 1");
    detail::require(width_threshold > 0.0, "UncertaintySet: width_threshold must be > 0");
    UncertaintySet s;
    s.dim = d;
    s.anchor = zeros(static_cast<std::size_t>(d));
    s.width_threshold = width_threshold;
    return s;
  }

  bool contains(const Vec& s, double tol) const {
    if (norm2(s) > 1.0 + tol) return false;
    for (const auto& h : halfspaces)
      if (!h.satisfied(s, tol)) return false;
    return true;
  }
};

namespace detail {

inline Vec random_unit_direction(int dim, RngStream& rng) {
  Vec dir(static_cast<std::size_t>(dim));
  double n = 0.0;
  do {
    n = 0.0;
    for (auto& v : dir) {
      v = rng.gaussian();
      n += v * v;
    }
    n = std::sqrt(n);
  } while (n < 1e-300);
  for (auto& v : dir) v /= n;
  return dir;
}

// Exact feasible interval of {point + t * dir} against the ball and every
// halfspace. Returns false when the chord degenerates.
inline bool chord_bounds(const UncertaintySet& set, const Vec& point, const Vec& dir,
                         double& t_lo, double& t_hi) {
  const double sd = dot(point, dir);
  const double disc = sd * sd - (dot(point, point) - 1.0);
  if (disc <= 0.0) return false;
  const double root = std::sqrt(disc);
  t_lo = -sd - root;
  t_hi = -sd + root;
  for (const auto& h : set.halfspaces) {
    const double ad = dot(h.normal, dir);
    const double as = dot(h.normal, point);
    const double sign = h.sense == Halfspace::Sense::Ge ? 1.0 : -1.0;
    const double margin = sign * (h.offset - as);  // need sign*ad*t >= margin
    if (std::fabs(ad) <= 1e-14) {
      if (margin > 1e-12) return false;  // violated, unreachable along dir
      continue;
    }
    const double t = margin / (sign * ad);
    if (sign * ad > 0.0)
      t_lo = std::max(t_lo, t);
    else
      t_hi = std::min(t_hi, t);
  }
  return t_hi - t_lo >= 1e-12;
}

}  // namespace detail

// Uniform samples from the set via hit-and-run: random direction, exact chord
// endpoints, uniform point on the chord. Degenerate chords retry the
// direction up to 100 times before failing.
inline std::vector<Vec> hit_and_run_sample(const UncertaintySet& set, int n_samples,
                                           int burn_in, RngStream& rng, int thin = 1) {
  detail::require(n_samples >= 1, "hit_and_run_sample: n_samples must be >= 1");
  detail::require(burn_in >= 0, "hit_and_run_sample: burn_in must be >= 0");
  detail::require(thin >= 1, "hit_and_run_sample: thin must be >= 1");
  detail::require(set.contains(set.anchor, 1e-9), "hit_and_run_sample: anchor infeasible");
  Vec point = set.anchor;
  std::vector<Vec> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  const long total = static_cast<long>(burn_in) + static_cast<long>(n_samples) * thin;
  for (long i = 0; i < total; ++i) {
    double t_lo = 0.0, t_hi = 0.0;
    bool ok = false;
    for (int retry = 0; retry < 100 && !ok; ++retry) {
      const Vec dir = detail::random_unit_direction(set.dim, rng);
      if (detail::chord_bounds(set, point, dir, t_lo, t_hi)) {
        const double t = rng.uniform(t_lo, t_hi);
        for (int k = 0; k < set.dim; ++k) point[k] += t * dir[k];
        ok = true;
      }
    }
    if (!ok) throw std::runtime_error("hit_and_run_sample: degenerate chord");
    if (i >= burn_in && (i - burn_in) % thin == 0) samples.push_back(point);
  }
  return samples;
}

// Coordinate-wise mean of a fresh sample cloud; lies in the convex hull of
// the samples but not necessarily in the set itself.
inline Vec approx_centroid(const UncertaintySet& set, const LearningConfig& cfg,
                           RngStream& rng) {
  const auto cloud = hit_and_run_sample(set, cfg.n_samples, cfg.burn_in, rng);
  Vec mean = zeros(static_cast<std::size_t>(set.dim));
  for (const auto& s : cloud)
    for (int k = 0; k < set.dim; ++k) mean[k] += s[k];
  for (auto& v : mean) v /= static_cast<double>(cloud.size());
  return mean;
}

// Sample estimate of the set's extent along a unit direction.
inline double directed_diameter(const UncertaintySet& set, const Vec& direction,
                                int n_samples, int burn_in, RngStream& rng) {
  detail::require(std::fabs(norm2(direction) - 1.0) <= 1e-9,
                  "directed_diameter: direction must be unit length");
  const auto cloud = hit_and_run_sample(set, n_samples, burn_in, rng);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : cloud) {
    const double p = dot(direction, s);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return hi - lo;
}

// Expands the set along its small-width directions: each halfspace normal is
// projected onto the orthogonal complement of those directions and its offset
// is relaxed by the worst case of the removed component over the set's known
// thin extent, so the original set stays contained. Normals that project to
// (numerically) nothing constrain only thin directions and are dropped.
inline UncertaintySet cylindrify(const UncertaintySet& set) {
  if (set.small_width_dirs.empty()) return set;
  UncertaintySet out = set;
  out.halfspaces.clear();
  for (const auto& h : set.halfspaces) {
    Vec perp = h.normal;
    double anchor_drop = 0.0;
    double width_room = 0.0;
    for (std::size_t v = 0; v < set.small_width_dirs.size(); ++v) {
      const double comp = dot(h.normal, set.small_width_dirs[v]);
      for (int k = 0; k < set.dim; ++k) perp[k] -= comp * set.small_width_dirs[v][k];
      anchor_drop += comp * dot(set.small_width_dirs[v], set.anchor);
      width_room += std::fabs(comp) * set.small_widths[v];
    }
    if (norm2(perp) < 1e-12) continue;
    Halfspace nh;
    nh.normal = std::move(perp);
    nh.sense = h.sense;
    nh.offset = h.sense == Halfspace::Sense::Ge ? h.offset - anchor_drop - width_room
                                                : h.offset - anchor_drop + width_room;
    out.halfspaces.push_back(std::move(nh));
  }
  out.small_width_dirs.clear();
  out.small_widths.clear();
  return out;
}

// Query price for a context given the current centroid estimate; negative
// products clamp to a free offer.
inline double propose_price(const Vec& centroid, const ContextVector& x) {
  return std::max(0.0, dot(centroid, x.coords));
}

namespace detail {

// Ratchets a point toward higher slack of the target halfspace while staying
// inside the set: each random chord is replaced by its better endpoint,
// pulled fractionally inside. Used when a cut leaves only a thin sliver.
inline std::optional<Vec> climb_to_halfspace(const UncertaintySet& set, Vec start,
                                             const Halfspace& target, int max_steps,
                                             RngStream& rng) {
  Vec best = std::move(start);
  double best_slack = target.slack(best);
  Vec point = best;
  for (int i = 0; i < max_steps && best_slack < 1e-9; ++i) {
    const Vec dir = random_unit_direction(set.dim, rng);
    double t_lo = 0.0, t_hi = 0.0;
    if (!chord_bounds(set, point, dir, t_lo, t_hi)) continue;
    const double shrink = 1e-4 * (t_hi - t_lo);
    const double grad = target.sense == Halfspace::Sense::Ge ? dot(target.normal, dir)
                                                             : -dot(target.normal, dir);
    const double t = grad >= 0.0 ? t_hi - shrink : t_lo + shrink;
    for (int k = 0; k < set.dim; ++k) point[k] += t * dir[k];
    const double s = target.slack(point);
    if (s > best_slack) {
      best_slack = s;
      best = point;
    }
  }
  if (best_slack >= -1e-12) return best;
  return std::nullopt;
}

}  // namespace detail

// Prunes the set with the response halfspace, repairs the anchor to a point
// feasible for the pruned set, and re-detects small-width directions on a
// fresh sample cloud. Throws when the cut leaves nothing reachable, which a
// consistent deterministic responder can never cause.
inline UncertaintySet cut(const UncertaintySet& set, const ContextVector& x, double price,
                          bool accepted, const LearningConfig& cfg, RngStream& rng) {
  detail::require(price >= 0.0, "cut: negative price");
  Halfspace hs;
  hs.normal = x.coords;
  hs.offset = price;
  hs.sense = accepted ? Halfspace::Sense::Ge : Halfspace::Sense::Le;

  UncertaintySet out = set;
  out.halfspaces.push_back(hs);

  // Anchor repair: reuse samples of the pre-cut set that land in the kept
  // half; their mean is interior to the pruned set.
  const auto cloud = hit_and_run_sample(set, cfg.n_samples, cfg.burn_in, rng);
  Vec mean = zeros(static_cast<std::size_t>(set.dim));
  std::size_t kept = 0;
  Vec best_point = cloud.front();
  double best_slack = hs.slack(best_point);
  for (const auto& s : cloud) {
    const double sl = hs.slack(s);
    if (sl > best_slack) {
      best_slack = sl;
      best_point = s;
    }
    if (sl >= 0.0) {
      for (int k = 0; k < set.dim; ++k) mean[k] += s[k];
      ++kept;
    }
  }
  if (kept >= 8) {
    for (auto& v : mean) v /= static_cast<double>(kept);
    out.anchor = out.contains(mean, 1e-10) ? mean : best_point;
  } else {
    const auto climbed =
        detail::climb_to_halfspace(set, best_point, hs, 4 * cfg.n_samples, rng);
    if (!climbed) throw std::runtime_error("cut: uncertainty set is numerically empty");
    out.anchor = *climbed;
  }

  // Small-width re-detection against the pruned set: candidate directions are
  // the halfspace normals with the already-known thin directions projected
  // out. Detected directions stay orthonormal by construction.
  const auto cloud2 = hit_and_run_sample(out, cfg.n_samples, cfg.burn_in, rng);
  for (const auto& h : out.halfspaces) {
    Vec cand = h.normal;
    for (const auto& v : out.small_width_dirs) {
      const double comp = dot(cand, v);
      for (int k = 0; k < out.dim; ++k) cand[k] -= comp * v[k];
    }
    const double n = norm2(cand);
    if (n < 1e-9) continue;
    for (auto& c : cand) c /= n;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : cloud2) {
      const double p = dot(cand, s);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    if (hi - lo < out.width_threshold) {
      out.small_width_dirs.push_back(std::move(cand));
      out.small_widths.push_back(hi - lo);
    }
  }
  return out;
}

// Search ends when the set is thin along the incoming context direction.
inline bool phase1_converged(const UncertaintySet& set, const ContextVector& x,
                             const LearningConfig& cfg, RngStream& rng) {
  const double n = norm2(x.coords);
  detail::require(n > 0.0, "phase1_converged: zero context");
  Vec dir = scaled(x.coords, 1.0 / n);
  return directed_diameter(set, dir, cfg.n_samples, cfg.burn_in, rng) < cfg.diameter_tol;
}

struct PriceQueryRecord {
  ContextVector x;
  double price;
  bool accepted;

  PriceQueryRecord(ContextVector ctx, double p, bool acc)
      : x(std::move(ctx)), price(p), accepted(acc) {
    detail::require(price >= 0.0, "PriceQueryRecord: negative price");
  }
};

// Sequential wrapper used by the online loop: price from the cylindrified
// centroid, prune on the response, report convergence and the current raw-set
// centroid estimate.
class UtilityLearner {
 public:
  // Directions freeze (join the cylindrified set) only once their width is
  // well below the termination diameter, since frozen directions stop
  // refining: along a random unit context the set's width is bounded by
  // sqrt(d) times the frozen widths, so the freeze level must leave room
  // under diameter_tol.
  UtilityLearner(int dim, LearningConfig cfg)
      : cfg_(cfg),
        set_(UncertaintySet::unit_ball(
            dim, 0.5 * cfg.diameter_tol / std::sqrt(static_cast<double>(dim)))) {}

  double propose(const ContextVector& x, RngStream& rng) const {
    const UncertaintySet cyl = cylindrify(set_);
    return propose_price(approx_centroid(cyl, cfg_, rng), x);
  }

  void observe(const ContextVector& x, double price, bool accepted, RngStream& rng) {
    set_ = cut(set_, x, price, accepted, cfg_, rng);
    queries_.emplace_back(x, price, accepted);
  }

  bool converged(const ContextVector& x, RngStream& rng) const {
    return phase1_converged(set_, x, cfg_, rng);
  }

  Vec estimate(RngStream& rng) const { return approx_centroid(set_, cfg_, rng); }

  const UncertaintySet& set() const { return set_; }
  const std::vector<PriceQueryRecord>& queries() const { return queries_; }

 private:
  LearningConfig cfg_;
  UncertaintySet set_;
  std::vector<PriceQueryRecord> queries_;
};

}  // namespace raas
