#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "survee/errors.hpp"
#include "survee/rng.hpp"
#include "survee/simulation.hpp"

using namespace survee;

TEST_CASE("generate_cohort is deterministic in the stream") {
  rng::Stream a(77);
  rng::Stream b(77);
  const SimCohort first = generate_cohort(40, a);
  const SimCohort second = generate_cohort(40, b);
  CHECK((first.data.covariates.array() == second.data.covariates.array()).all());
  CHECK((first.data.observed_time.array() == second.data.observed_time.array()).all());
  CHECK((first.treatment.array() == second.treatment.array()).all());

  rng::Stream c(78);
  const SimCohort third = generate_cohort(40, c);
  CHECK_FALSE((first.data.observed_time.array() == third.data.observed_time.array()).all());
}

TEST_CASE("cohort structure matches the data-generating process") {
  rng::Stream stream(5);
  const SimCohort cohort = generate_cohort(4000, stream);
  const auto& d = cohort.data;
  REQUIRE(d.size() == 4000);
  CHECK(d.num_covariates() == 1);
  CHECK(d.covariates.minCoeff() > -1.0);
  CHECK(d.covariates.maxCoeff() < 1.0);
  CHECK(d.observed_time.minCoeff() >= 1);
  CHECK(d.grid.num_intervals == d.observed_time.maxCoeff());
  CHECK(d.event.minCoeff() >= 0);
  CHECK(d.event.maxCoeff() <= 1);

  // A | W ~ Bernoulli(expit(-1.5 W)): treated units should have lower W
  double w_treated = 0, w_control = 0;
  int n1 = 0, n0 = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (cohort.treatment[i] == 1) {
      w_treated += d.covariates(i, 0);
      ++n1;
    } else {
      w_control += d.covariates(i, 0);
      ++n0;
    }
  }
  REQUIRE(n1 > 0);
  REQUIRE(n0 > 0);
  CHECK(w_treated / n1 < w_control / n0);

  // censoring is present but not dominant
  const double event_rate = d.event.cast<double>().mean();
  CHECK(event_rate > 0.3);
  CHECK(event_rate < 0.95);
}

TEST_CASE("administrative follow-up cap censors at the study end") {
  rng::Stream a(77);
  rng::Stream b(77);
  const SimCohort full = generate_cohort(200, a);
  const SimCohort capped = generate_cohort(200, b, 30);
  REQUIRE(full.data.observed_time.maxCoeff() > 30);
  CHECK(capped.data.grid.num_intervals == 30);
  CHECK((capped.data.covariates.array() == full.data.covariates.array()).all());
  for (Eigen::Index i = 0; i < 200; ++i) {
    if (full.data.observed_time[i] > 30) {
      CHECK(capped.data.observed_time[i] == 30);
      CHECK(capped.data.event[i] == 0);
    } else {
      CHECK(capped.data.observed_time[i] == full.data.observed_time[i]);
      CHECK(capped.data.event[i] == full.data.event[i]);
    }
  }
}

TEST_CASE("true_effect reproduces the known risk-difference scale") {
  // Weibull arithmetic puts the marginal RD near 0.13 / 0.11 / 0.06 at
  // t = 10 / 20 / 30; Monte Carlo error at 4e5 draws is ~0.002.
  const TrueEffect truth = true_effect(400000, 99, 40);
  CHECK(truth.rd(10) > 0.10);
  CHECK(truth.rd(10) < 0.16);
  CHECK(truth.rd(20) > 0.08);
  CHECK(truth.rd(20) < 0.15);
  CHECK(truth.rd(30) > 0.02);
  CHECK(truth.rd(30) < 0.10);
  CHECK(truth.rd(0) == 0.0);
  CHECK_THROWS_AS(truth.rd(41), ValidationError);

  const TrueEffect again = true_effect(400000, 99, 40);
  CHECK(again.cdf1 == truth.cdf1);
  CHECK(again.cdf0 == truth.cdf0);
}

TEST_CASE("run_experiment produces sane metrics and is job-count invariant") {
  SimConfig config;
  config.n = 150;
  config.iterations = 6;
  config.target_times = {10, 20};
  config.time_models = {TimeDesignSpec::log_linear()};
  config.seed = 31;
  config.truth_draws = 200000;

  const auto rows = run_experiment(config);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.model == "loglinear");
    CHECK(row.n == 150);
    CHECK(row.failures + row.iterations_used == 6);
    CHECK(std::isfinite(row.bias));
    CHECK(row.ese > 0.0);
    CHECK(row.ase > 0.0);
    CHECK(row.ser > 0.0);
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
  }

  config.jobs = 3;
  const auto parallel_rows = run_experiment(config);
  REQUIRE(parallel_rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parallel_rows[i].bias == rows[i].bias);
    CHECK(parallel_rows[i].ese == rows[i].ese);
    CHECK(parallel_rows[i].coverage == rows[i].coverage);
  }
}

TEST_CASE("metrics_csv is a well-formed table") {
  MetricsRow row;
  row.model = "disjoint";
  row.n = 500;
  row.t = 20;
  row.bias = 0.0031;
  row.ese = 0.044;
  row.ase = 0.0441;
  row.ser = 1.002;
  row.coverage = 0.95;
  row.iterations_used = 1000;
  const std::string csv = metrics_csv({row});
  CHECK(csv.find("model,n,t,bias,ese,ase,ser,coverage,failures,iterations") == 0);
  CHECK(csv.find("disjoint,500,20,") != std::string::npos);
  CHECK(csv.find("\n") != std::string::npos);
}
