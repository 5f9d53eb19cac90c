#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "support.hpp"
#include "survee/errors.hpp"
#include "survee/long_oracle.hpp"

using namespace survee;

TEST_CASE("expand_long produces one row per person-period at risk") {
  const auto data = testsupport::micro_data();
  const auto design = build_design(TimeDesignSpec::linear(), data.grid);
  const LongTable table = expand_long(data, design);

  // person-periods: 1+2+2+4+4+5
  REQUIRE(table.rows() == 18);
  CHECK(table.design.cols() == 3);  // x, intercept, t
  CHECK(table.y.sum() == doctest::Approx(3.0));

  // unit 2 (t*=2, event) contributes rows at t=1 (y=0) and t=2 (y=1)
  int seen = 0;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    if (table.unit[static_cast<std::size_t>(r)] == 1) {
      ++seen;
      if (table.interval[static_cast<std::size_t>(r)] == 2) CHECK(table.y[r] == 1.0);
      else CHECK(table.y[r] == 0.0);
    }
  }
  CHECK(seen == 2);
  CHECK((table.weights.array() == 1.0).all());
}

TEST_CASE("expand_long restricted to unique event times for disjoint designs") {
  const auto data = testsupport::micro_data();
  const auto design =
      build_design(TimeDesignSpec::disjoint(), data.grid, data.unique_event_times());
  const LongTable table = expand_long(data, design);
  // unit 6 (t*=5, censored) is at risk at rows 1, 2 and 4 only
  int unit6 = 0;
  for (Eigen::Index r = 0; r < table.rows(); ++r)
    unit6 += table.unit[static_cast<std::size_t>(r)] == 5;
  CHECK(unit6 == 3);
  // row count: t=1 has 6 at risk, t=2 has 5, t=4 has 3
  CHECK(table.rows() == 6 + 5 + 3);
}

TEST_CASE("unit and period weights multiply into long weights") {
  auto data = testsupport::micro_data();
  Eigen::VectorXd w(6);
  w << 1, 2, 1, 0.5, 1, 3;
  data.unit_weights = w;
  const auto design = build_design(TimeDesignSpec::linear(), data.grid);
  Eigen::MatrixXd pw = Eigen::MatrixXd::Constant(design.num_rows(), 6, 2.0);
  const LongTable table = expand_long(data, design, &pw);
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const auto unit = table.unit[static_cast<std::size_t>(r)];
    CHECK(table.weights[r] == doctest::Approx(2.0 * w[static_cast<Eigen::Index>(unit)]));
  }
}

TEST_CASE("IRLS recovers the closed-form constant hazard") {
  const auto data = testsupport::micro_data();
  const auto design = build_design(TimeDesignSpec::intercept_only(), data.grid);
  const LongTable table = expand_long(data, design);
  Eigen::VectorXd beta = fit_long_logistic(table);
  REQUIRE(beta.size() == 2);  // covariate + intercept
  // with x included the intercept is no longer exactly logit(3/18); drop x
  LongTable no_x = table;
  no_x.design = table.design.rightCols(1);
  no_x.column_names = {"intercept"};
  beta = fit_long_logistic(no_x);
  CHECK(beta[0] == doctest::Approx(std::log(3.0 / 15.0)).epsilon(1e-9));
}

TEST_CASE("IRLS raises on separation") {
  LongTable t;
  t.y.resize(6);
  t.y << 0, 0, 0, 1, 1, 1;
  t.design.resize(6, 2);
  t.design << -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3, 1;
  t.weights = Eigen::VectorXd::Ones(6);
  t.unit = {0, 1, 2, 3, 4, 5};
  t.interval = {1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(fit_long_logistic(t), ConvergenceError);
}

TEST_CASE("IRLS raises on rank-deficient designs") {
  const auto data = testsupport::micro_data();
  const auto design = build_design(TimeDesignSpec::intercept_only(), data.grid);
  LongTable table = expand_long(data, design);
  Eigen::MatrixXd dup(table.rows(), 3);
  dup << table.design, table.design.col(0);
  table.design = dup;
  CHECK_THROWS_AS(fit_long_logistic(table), SingularMatrixError);
}

TEST_CASE("bootstrap is deterministic and parallel-invariant") {
  // estimator: mean of the resampled values
  Eigen::VectorXd values(10);
  values << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  auto estimator = [&](const std::vector<Eigen::Index>& idx) {
    double sum = 0;
    for (auto i : idx) sum += values[i];
    Eigen::VectorXd out(1);
    out[0] = sum / static_cast<double>(idx.size());
    return out;
  };
  BootstrapOptions opts;
  opts.replicates = 64;
  opts.seed = 11;
  const BootstrapResult seq = bootstrap(10, estimator, opts);
  opts.jobs = 4;
  const BootstrapResult par = bootstrap(10, estimator, opts);
  REQUIRE(seq.estimates.rows() == 64);
  CHECK((seq.estimates.array() == par.estimates.array()).all());
  CHECK(seq.se[0] == par.se[0]);

  opts.seed = 12;
  const BootstrapResult other = bootstrap(10, estimator, opts);
  CHECK_FALSE((seq.estimates.array() == other.estimates.array()).all());
}

TEST_CASE("bootstrap summaries match hand computation") {
  // estimator returns the replicate's first index so draws are transparent
  auto estimator = [](const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd out(1);
    out[0] = static_cast<double>(idx[0]);
    return out;
  };
  BootstrapOptions opts;
  opts.replicates = 200;
  opts.seed = 5;
  opts.ci_level = 0.90;
  const BootstrapResult res = bootstrap(40, estimator, opts);

  std::vector<double> draws(200);
  for (int r = 0; r < 200; ++r) draws[static_cast<std::size_t>(r)] = res.estimates(r, 0);
  const double mean =
      std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  double ss = 0;
  for (double d : draws) ss += (d - mean) * (d - mean);
  CHECK(res.se[0] == doctest::Approx(std::sqrt(ss / 199.0)).epsilon(1e-12));

  std::sort(draws.begin(), draws.end());
  auto type7 = [&](double prob) {
    const double h = prob * (draws.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, draws.size() - 1);
    return draws[lo] + (h - std::floor(h)) * (draws[hi] - draws[lo]);
  };
  CHECK(res.percentile_ci(0, 0) == doctest::Approx(type7(0.05)).epsilon(1e-12));
  CHECK(res.percentile_ci(0, 1) == doctest::Approx(type7(0.95)).epsilon(1e-12));
}

TEST_CASE("bootstrap failure policy") {
  int calls = 0;
  auto flaky = [&](const std::vector<Eigen::Index>&) -> Eigen::VectorXd {
    ++calls;
    if (calls % 3 == 0) throw ConvergenceError("did not converge");
    Eigen::VectorXd out(1);
    out[0] = 1.0;
    return out;
  };
  BootstrapOptions opts;
  opts.replicates = 30;
  opts.max_failure_fraction = 0.5;
  const BootstrapResult res = bootstrap(5, flaky, opts);
  CHECK(res.failures == 10);
  CHECK(res.estimates.rows() == 20);

  calls = 0;
  opts.max_failure_fraction = 0.1;
  CHECK_THROWS_AS(bootstrap(5, flaky, opts), Error);
}

TEST_CASE("resample_dataset repeats whole units") {
  const auto data = testsupport::micro_data();
  const auto boot = resample_dataset(data, {0, 0, 3});
  CHECK(boot.size() == 3);
  CHECK(boot.observed_time[0] == 1);
  CHECK(boot.observed_time[1] == 1);
  CHECK(boot.observed_time[2] == 4);
  Eigen::VectorXi treatment(6);
  treatment << 1, 0, 1, 0, 1, 0;
  const Eigen::VectorXi picked = resample_vector(treatment, {5, 2, 2});
  CHECK(picked[0] == 0);
  CHECK(picked[1] == 1);
  CHECK(picked[2] == 1);
}
