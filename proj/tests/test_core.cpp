#include "catch_amalgamated.hpp"

#include "raas/config.hpp"
#include "raas/types.hpp"

using namespace raas;

TEST_CASE("dot product") {
  const Vec u{0.37, 0.11, 0.34, 0.71};
  const Vec e4{0.0, 0.0, 0.0, 1.0};
  CHECK(dot(u, e4) == 0.71);
  CHECK(dot(u, Vec{0.0, 0.0, 0.0, 0.0}) == 0.0);
  CHECK(dot(Vec{0.5, 0.2, 0.4, 0.3}, Vec{1.0, 1.0, 1.0, 1.0}) ==
        Catch::Approx(1.4).margin(1e-15));
  CHECK_THROWS_AS(dot(u, Vec{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("type invariants reject bad construction") {
  CHECK_THROWS_AS(ContextVector({-0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ContextVector({0.9, 0.9}), std::invalid_argument);
  CHECK_NOTHROW(ContextVector({1.0, 0.0}));  // boundary norm admitted

  CHECK_THROWS_AS(UtilityVector({0.8, 0.8}), std::invalid_argument);
  CHECK_THROWS_AS(UtilityVector({-1e-9, 0.5}), std::invalid_argument);

  CHECK_NOTHROW(DegradationVector({1.0, 1.0, 1.0}));  // max-norm bound, not L2
  CHECK_THROWS_AS(DegradationVector({1.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(DegradationVector({-0.2, 0.5}), std::invalid_argument);

  CHECK_THROWS_AS(CustomerArrival(ContextVector({0.5}), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CustomerArrival(ContextVector({0.5}), 1.0, 0.0), std::invalid_argument);

  CHECK_THROWS_AS(RobotCondition({0.5, -0.1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RobotCondition({0.5, 0.1}, -1.0), std::invalid_argument);

  FinancialParams bad;
  bad.holding_cost = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK_THROWS_AS(BaselineHazard::constant(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(BaselineHazard::tabulated({0.0, 1.0}, {0.1, -0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BaselineHazard::tabulated({1.0, 0.5}, {0.1, 0.1}),
                  std::invalid_argument);

  LearningConfig lc;
  lc.eps_decay = 0.0;
  CHECK_THROWS_AS(lc.validate(), std::invalid_argument);
  lc = LearningConfig{};
  lc.eps_initial = 1.5;
  CHECK_THROWS_AS(lc.validate(), std::invalid_argument);

  SolverConfig sc;
  sc.discount = 1.0;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
  sc = SolverConfig{};
  sc.deg.count = 1;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("robot condition bookkeeping") {
  const RobotCondition fresh = RobotCondition::fresh(3);
  CHECK(fresh.age == 0.0);
  CHECK(norm2(fresh.cumulative_context) == 0.0);
  const RobotCondition used = after_rental(fresh, ContextVector({0.1, 0.2, 0.3}), 7.5);
  CHECK(used.age == 7.5);
  CHECK(used.cumulative_context == Vec{0.1, 0.2, 0.3});
}

TEST_CASE("baseline hazard forms share one interface") {
  const BaselineHazard c = BaselineHazard::constant(0.002);
  const BaselineHazard t = BaselineHazard::tabulated({0.0, 100.0}, {0.002, 0.002});
  for (double age : {0.0, 1.0, 17.3, 99.0, 250.0}) {
    CHECK(c.rate(age) == Catch::Approx(t.rate(age)));
    CHECK(c.cumulative(age) == Catch::Approx(t.cumulative(age)).margin(1e-12));
  }
  // Linear interpolation between knots, flat extension past the table.
  const BaselineHazard ramp = BaselineHazard::tabulated({0.0, 10.0}, {0.0, 1.0});
  CHECK(ramp.rate(5.0) == Catch::Approx(0.5));
  CHECK(ramp.rate(20.0) == Catch::Approx(1.0));
  CHECK(ramp.cumulative(10.0) == Catch::Approx(5.0));
  CHECK(ramp.cumulative(12.0) == Catch::Approx(7.0));
  CHECK_THROWS_AS(ramp.cumulative(-1.0), std::invalid_argument);
}

TEST_CASE("baseline hazard inverse increment") {
  const BaselineHazard c = BaselineHazard::constant(0.001);
  CHECK(c.inverse_increment(0.0, 0.01) == Catch::Approx(10.0));
  CHECK(c.inverse_increment(5.0, 0.0) == 0.0);
  CHECK(std::isinf(BaselineHazard::constant(0.0).inverse_increment(0.0, 0.5)));

  const BaselineHazard t = BaselineHazard::tabulated({0.0, 50.0}, {0.001, 0.001});
  CHECK(t.inverse_increment(3.0, 0.01) == Catch::Approx(10.0).margin(1e-6));
  const BaselineHazard dead = BaselineHazard::tabulated({0.0, 1.0}, {1.0, 0.0});
  CHECK(std::isinf(dead.inverse_increment(2.0, 0.5)));  // tail rate is zero
}

TEST_CASE("config serialization round-trip is identity") {
  const ExperimentConfig ref = ExperimentConfig::reference_default();
  const ExperimentConfig back = experiment_config_from_json(to_json(ref));

  CHECK(back.dimension == ref.dimension);
  CHECK(back.customer.mean_interarrival == ref.customer.mean_interarrival);
  CHECK(back.customer.mean_duration == ref.customer.mean_duration);
  CHECK(back.truth.u.coords == ref.truth.u.coords);
  CHECK(back.truth.theta.coords == ref.truth.theta.coords);
  CHECK(back.truth.baseline.is_constant());
  CHECK(back.truth.baseline.constant_rate() == ref.truth.baseline.constant_rate());
  CHECK(back.financial.holding_cost == ref.financial.holding_cost);
  CHECK(back.financial.failure_cost == ref.financial.failure_cost);
  CHECK(back.financial.replacement_cost == ref.financial.replacement_cost);
  CHECK(to_json(back.learning) == to_json(ref.learning));
  CHECK(to_json(back.solver) == to_json(ref.solver));
  CHECK(back.num_customers == ref.num_customers);
  CHECK(back.seeds == ref.seeds);
  CHECK(back.output_dir == ref.output_dir);

  // Tabulated baselines round-trip too.
  ExperimentConfig tab = ref;
  tab.truth = GroundTruth{ref.truth.u, ref.truth.theta,
                          BaselineHazard::tabulated({0.0, 7.0, 31.0}, {0.01, 0.02, 0.001})};
  const ExperimentConfig tab_back = experiment_config_from_json(to_json(tab));
  CHECK_FALSE(tab_back.truth.baseline.is_constant());
  CHECK(tab_back.truth.baseline.table_ages() == Vec{0.0, 7.0, 31.0});
  CHECK(tab_back.truth.baseline.table_rates() == Vec{0.01, 0.02, 0.001});
}

TEST_CASE("config errors name the offending field") {
  json j = to_json(ExperimentConfig::reference_default());
  j["financial"]["holding_cost"] = -1.0;
  try {
    experiment_config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("holding_cost") != std::string::npos);
  }

  j = to_json(ExperimentConfig::reference_default());
  j["seeds"] = json::array({1, 1});
  try {
    experiment_config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seeds") != std::string::npos);
  }

  j = to_json(ExperimentConfig::reference_default());
  j["truth"]["utility"] = json::array({0.37, 0.11});
  CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
}

TEST_CASE("bundled default config matches the reference defaults") {
  const ExperimentConfig file =
      load_experiment_config(std::string(RAAS_SOURCE_DIR) + "/configs/default.json");
  const ExperimentConfig ref = ExperimentConfig::reference_default();
  CHECK(to_json(file) == to_json(ref));
}
