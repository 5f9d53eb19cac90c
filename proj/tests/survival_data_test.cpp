#include <doctest.h>

#include <Eigen/Core>
#include <vector>

#include <limits>

#include "support.hpp"
#include "survee/errors.hpp"
#include "survee/survival_data.hpp"

using namespace survee;

TEST_CASE("discretize is ceil(t / resolution)") {
  TimeGrid days{10, 1.0};
  CHECK(days.discretize(0.5) == 1);
  CHECK(days.discretize(1.0) == 1);
  CHECK(days.discretize(1.0001) == 2);
  CHECK(days.discretize(10.0) == 10);

  TimeGrid weeks{6, 7.0};
  CHECK(weeks.discretize(1.0) == 1);
  CHECK(weeks.discretize(7.0) == 1);
  CHECK(weeks.discretize(7.5) == 2);
  CHECK(weeks.discretize(14.0) == 2);
}

TEST_CASE("validate accepts the micro data") {
  CHECK_NOTHROW(testsupport::micro_data().validate());
}

TEST_CASE("validate rejects broken records") {
  auto base = testsupport::micro_data();

  SUBCASE("time outside the grid") {
    auto d = base;
    d.observed_time[2] = 0;
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d.observed_time[2] = 6;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("non-binary event") {
    auto d = base;
    d.event[1] = 2;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("non-finite covariate") {
    auto d = base;
    d.covariates(3, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("negative weight") {
    auto d = base;
    d.unit_weights = Eigen::VectorXd::Ones(6);
    (*d.unit_weights)[4] = -0.5;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("length mismatch") {
    auto d = base;
    d.event.conservativeResize(5);
    CHECK_THROWS_AS(d.validate(), DimensionError);
  }
}

TEST_CASE("unique event times are sorted, distinct, events only") {
  const auto d = testsupport::micro_data();
  CHECK(d.unique_event_times() == std::vector<int>{1, 2, 4});
}

TEST_CASE("indicator matrices match the worked example") {
  const auto d = testsupport::micro_data();
  const auto ind = indicator_matrices(d, {1, 2, 3, 4, 5});

  Eigen::MatrixXd risk(5, 6);
  risk << 1, 1, 1, 1, 1, 1,
          0, 1, 1, 1, 1, 1,
          0, 0, 0, 1, 1, 1,
          0, 0, 0, 1, 1, 1,
          0, 0, 0, 0, 0, 1;
  Eigen::MatrixXd last(5, 6);
  last << 1, 0, 0, 0, 0, 0,
          0, 1, 1, 0, 0, 0,
          0, 0, 0, 0, 0, 0,
          0, 0, 0, 1, 1, 0,
          0, 0, 0, 0, 0, 1;
  Eigen::MatrixXd events(5, 6);
  events << 1, 0, 0, 0, 0, 0,
            0, 1, 0, 0, 0, 0,
            0, 0, 0, 0, 0, 0,
            0, 0, 0, 1, 0, 0,
            0, 0, 0, 0, 0, 0;
  CHECK((ind.risk_set.array() == risk.array()).all());
  CHECK((ind.final_time.array() == last.array()).all());
  CHECK((ind.events.array() == events.array()).all());

  // disjoint rows are the same construction on the unique event times
  const auto sub = indicator_matrices(d, {1, 2, 4});
  CHECK((sub.risk_set.row(2).array() == ind.risk_set.row(3).array()).all());
  CHECK((sub.events.row(1).array() == ind.events.row(1).array()).all());
}

TEST_CASE("select_rows keeps order, allows repeats, checks bounds") {
  const auto d = testsupport::micro_data();
  const auto picked = select_rows(d, {4, 0, 0, 5});
  CHECK(picked.size() == 4);
  CHECK(picked.ids == std::vector<std::string>{"5", "1", "1", "6"});
  CHECK(picked.observed_time[0] == 4);
  CHECK(picked.covariates(1, 0) == -1);
  CHECK(picked.covariates(2, 0) == -1);
  CHECK(picked.grid.num_intervals == d.grid.num_intervals);
  CHECK_THROWS_AS(select_rows(d, {6}), Error);
}
