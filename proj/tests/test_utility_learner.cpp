#include "catch_amalgamated.hpp"

#include <cmath>

#include "raas/rng.hpp"
#include "raas/sim_env.hpp"
#include "raas/utility_learner.hpp"

using namespace raas;

namespace {

LearningConfig small_cfg() {
  LearningConfig cfg;
  cfg.n_samples = 2000;
  cfg.burn_in = 2000;
  return cfg;
}

Halfspace ge(Vec normal, double offset) {
  Halfspace h;
  h.normal = std::move(normal);
  h.offset = offset;
  h.sense = Halfspace::Sense::Ge;
  return h;
}

Halfspace le(Vec normal, double offset) {
  Halfspace h;
  h.normal = std::move(normal);
  h.offset = offset;
  h.sense = Halfspace::Sense::Le;
  return h;
}

}  // namespace

TEST_CASE("hit-and-run stays inside the region") {
  RngStream rng(1);
  SECTION("unit ball") {
    const auto set = UncertaintySet::unit_ball(4, 1e-3);
    for (const auto& s : hit_and_run_sample(set, 2000, 500, rng))
      CHECK(norm2(s) <= 1.0 + 1e-10);
  }
  SECTION("ball with a tight halfspace") {
    auto set = UncertaintySet::unit_ball(3, 1e-3);
    set.halfspaces.push_back(ge({1.0, 0.0, 0.0}, 0.9));
    set.anchor = {0.95, 0.0, 0.0};
    for (const auto& s : hit_and_run_sample(set, 2000, 500, rng)) {
      CHECK(s[0] >= 0.9 - 1e-10);
      CHECK(norm2(s) <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("hit-and-run and centroid on the 1-D interval [0,1]") {
  auto set = UncertaintySet::unit_ball(1, 1e-3);
  set.halfspaces.push_back(ge({1.0}, 0.0));
  set.anchor = {0.5};
  RngStream rng(2);
  const auto cloud = hit_and_run_sample(set, 2000, 2000, rng);
  double mean = 0.0;
  for (const auto& s : cloud) {
    CHECK(s[0] >= -1e-10);
    CHECK(s[0] <= 1.0 + 1e-10);
    mean += s[0];
  }
  mean /= static_cast<double>(cloud.size());
  CHECK(mean == Catch::Approx(0.5).margin(0.05));
  CHECK(approx_centroid(set, small_cfg(), rng)[0] == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("centroid of the 4-D ball is near the origin") {
  const auto set = UncertaintySet::unit_ball(4, 1e-3);
  RngStream rng(3);
  const Vec c = approx_centroid(set, small_cfg(), rng);
  for (double v : c) CHECK(std::fabs(v) <= 0.05);
}

TEST_CASE("directed diameter") {
  RngStream rng(4);
  SECTION("unit ball has diameter 2 in any direction") {
    const auto set = UncertaintySet::unit_ball(3, 1e-3);
    const double w = directed_diameter(set, {0.0, 1.0, 0.0}, 2000, 2000, rng);
    CHECK(w == Catch::Approx(2.0).margin(0.1));
  }
  SECTION("thin slab width is recovered") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set.halfspaces.push_back(ge({1.0, 0.0}, 0.5));
    set.halfspaces.push_back(le({1.0, 0.0}, 0.5001));
    set.anchor = {0.50005, 0.0};
    const double w = directed_diameter(set, {1.0, 0.0}, 2000, 2000, rng);
    CHECK(w <= 0.0001 + 1e-6);  // samples cannot exceed the true width
    CHECK(w > 0.0);
  }
  SECTION("unit direction is required") {
    const auto set = UncertaintySet::unit_ball(2, 1e-3);
    CHECK_THROWS_AS(directed_diameter(set, {1.0, 1.0}, 100, 100, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("cylindrify") {
  SECTION("no small-width directions: identity") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set.halfspaces.push_back(ge({0.6, 0.8}, 0.1));
    const auto out = cylindrify(set);
    REQUIRE(out.halfspaces.size() == 1);
    CHECK(out.halfspaces[0].normal == set.halfspaces[0].normal);
    CHECK(out.halfspaces[0].offset == set.halfspaces[0].offset);
  }

  SECTION("thin direction expands to the full ball slab") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set.halfspaces.push_back(le({0.0, 1.0}, 1e-6));
    set.halfspaces.push_back(ge({0.0, 1.0}, -1e-6));
    set.small_width_dirs.push_back({0.0, 1.0});
    set.small_widths.push_back(2e-6);
    const auto out = cylindrify(set);
    // Constraints along the expanded axis vanish; the cylinder covers the
    // equatorial box {|s1| <= 1, |s2| <= 1e-6} up to the ball boundary.
    CHECK(out.halfspaces.empty());
    for (double s1 : {-0.999, -0.5, 0.0, 0.5, 0.999})
      for (double s2 : {-1e-6, 0.0, 1e-6}) CHECK(out.contains({s1, s2}, 1e-9));
  }

  SECTION("original set is contained in the cylindrified set") {
    auto set = UncertaintySet::unit_ball(3, 1e-3);
    set.halfspaces.push_back(ge({0.6, 0.64, 0.48}, 0.2));
    set.halfspaces.push_back(le({1.0, 0.0, 0.0}, 0.41));
    set.halfspaces.push_back(ge({1.0, 0.0, 0.0}, 0.4));
    set.anchor = {0.405, 0.3, 0.3};
    set.small_width_dirs.push_back({1.0, 0.0, 0.0});
    set.small_widths.push_back(0.01);
    const auto cyl = cylindrify(set);
    RngStream rng(5);
    for (const auto& s : hit_and_run_sample(set, 1000, 1000, rng))
      CHECK(cyl.contains(s, 1e-9));
  }
}

TEST_CASE("propose_price") {
  CHECK(propose_price(Vec{0.0, 0.0, 0.0, 0.0}, ContextVector({0.5, 0.0, 0.0, 0.0})) == 0.0);
  CHECK(propose_price(Vec{0.37, 0.11, 0.34, 0.71}, ContextVector({0.0, 0.0, 0.0, 1.0})) ==
        0.71);
  CHECK(propose_price(Vec{-0.5, 0.0}, ContextVector({1.0, 0.0})) == 0.0);
}

TEST_CASE("cut") {
  RngStream rng(6);
  const LearningConfig cfg = small_cfg();

  SECTION("1-D accepted cut at zero leaves [0,1]") {
    const auto set = UncertaintySet::unit_ball(1, 1e-3);
    const auto out = cut(set, ContextVector({1.0}), 0.0, true, cfg, rng);
    REQUIRE(out.halfspaces.size() == 1);
    const auto cloud = hit_and_run_sample(out, 1000, 1000, rng);
    double lo = 1e9, hi = -1e9;
    for (const auto& s : cloud) {
      lo = std::min(lo, s[0]);
      hi = std::max(hi, s[0]);
    }
    CHECK(lo >= -1e-10);
    CHECK(hi <= 1.0 + 1e-10);
    CHECK(hi - lo > 0.9);
  }

  SECTION("monotone shrinkage: prior halfspaces are retained") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set = cut(set, ContextVector({1.0, 0.0}), 0.1, true, cfg, rng);
    const auto before = set.halfspaces;
    set = cut(set, ContextVector({0.0, 1.0}), 0.3, false, cfg, rng);
    REQUIRE(set.halfspaces.size() == before.size() + 1);
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(set.halfspaces[i].normal == before[i].normal);
      CHECK(set.halfspaces[i].offset == before[i].offset);
    }
  }

  SECTION("feasibility: responses generated from a fixed u keep u inside") {
    const UtilityVector u({0.37, 0.11, 0.34, 0.71});
    const CustomerDistribution dist{4, 5.0, 10.0};
    RngStream env(7);
    auto set = UncertaintySet::unit_ball(4, 1e-3);
    for (int k = 0; k < 25; ++k) {
      const CustomerArrival c = sample_customer(dist, env);
      const Vec centroid = approx_centroid(cylindrify(set), cfg, rng);
      const double p = propose_price(centroid, c.x);
      const bool accepted = customer_accepts(u, c.x, p);
      set = cut(set, c.x, p, accepted, cfg, rng);
      for (const auto& h : set.halfspaces) CHECK(h.satisfied(u.coords, 0.0));
    }
  }

  SECTION("two opposite cuts bracket the projection within 1e-6") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set = cut(set, ContextVector({1.0, 0.0}), 0.2, true, cfg, rng);
    set = cut(set, ContextVector({1.0, 0.0}), 0.2 + 1e-6, false, cfg, rng);
    const auto cloud = hit_and_run_sample(set, 500, 2000, rng);
    for (const auto& s : cloud) {
      CHECK(s[0] >= 0.2 - 1e-10);
      CHECK(s[0] <= 0.2 + 1e-6 + 1e-10);
    }
  }
}

TEST_CASE("sampler satisfies accumulated constraints to 1e-10") {
  RngStream rng(8);
  const LearningConfig cfg = small_cfg();
  auto set = UncertaintySet::unit_ball(3, 1e-3);
  set = cut(set, ContextVector({1.0, 0.0, 0.0}), 0.3, true, cfg, rng);
  set = cut(set, ContextVector({0.0, 1.0, 0.0}), 0.4, false, cfg, rng);
  set = cut(set, ContextVector({0.5, 0.5, 0.70710678}), 0.2, true, cfg, rng);
  for (const auto& s : hit_and_run_sample(set, 2000, 2000, rng)) {
    CHECK(norm2(s) <= 1.0 + 1e-10);
    for (const auto& h : set.halfspaces) CHECK(h.satisfied(s, 1e-10));
  }
}

TEST_CASE("phase1_converged") {
  RngStream rng(9);
  LearningConfig cfg = small_cfg();

  SECTION("fresh ball is not converged at 1e-4") {
    const auto set = UncertaintySet::unit_ball(4, 1e-3);
    CHECK_FALSE(phase1_converged(set, ContextVector({0.5, 0.5, 0.5, 0.5}), cfg, rng));
  }

  SECTION("thin slab converges along its normal") {
    auto set = UncertaintySet::unit_ball(2, 1e-3);
    set.halfspaces.push_back(ge({1.0, 0.0}, 0.5));
    set.halfspaces.push_back(le({1.0, 0.0}, 0.50005));
    set.anchor = {0.500025, 0.0};
    CHECK(phase1_converged(set, ContextVector({1.0, 0.0}), cfg, rng));
  }

  SECTION("huge tolerance converges immediately") {
    const auto set = UncertaintySet::unit_ball(4, 1e-3);
    cfg.diameter_tol = 3.0;
    CHECK(phase1_converged(set, ContextVector({0.0, 0.0, 0.0, 1.0}), cfg, rng));
  }

  SECTION("zero context is rejected") {
    const auto set = UncertaintySet::unit_ball(2, 1e-3);
    CHECK_THROWS_AS(phase1_converged(set, ContextVector({0.0, 0.0}), cfg, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("price consistency: pricing at the true u is always accepted") {
  const UtilityVector u({0.37, 0.11, 0.34, 0.71});
  const CustomerDistribution dist{4, 5.0, 10.0};
  RngStream env(10);
  for (int i = 0; i < 1000; ++i) {
    const CustomerArrival c = sample_customer(dist, env);
    CHECK(customer_accepts(u, c.x, propose_price(u.coords, c.x)));
  }
}

TEST_CASE("learner converges to the true utility vector") {
  const UtilityVector u({0.37, 0.11, 0.34, 0.71});
  const CustomerDistribution dist{4, 5.0, 10.0};
  LearningConfig cfg;  // full-size defaults: 2000 samples, burn-in 500 d^2
  RngStream env(11), learn(12);
  UtilityLearner learner(4, cfg);
  long converged_at = -1;
  for (long k = 1; k <= 200; ++k) {
    const CustomerArrival c = sample_customer(dist, env);
    const double p = learner.propose(c.x, learn);
    const bool accepted = customer_accepts(u, c.x, p);
    learner.observe(c.x, p, accepted, learn);
    if (learner.converged(c.x, learn)) {
      converged_at = k;
      break;
    }
  }
  REQUIRE(converged_at > 0);
  CHECK(converged_at >= 10);
  CHECK(converged_at <= 120);
  const Vec estimate = learner.estimate(learn);
  CHECK(norm2(sub(estimate, u.coords)) < 0.05);
}
