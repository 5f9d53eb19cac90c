// Command line driver.
//
//   survee fit        pooled logistic coefficients with sandwich standard errors
//   survee gcomp      g-computation risk curves and causal risk differences
//   survee simulate   Monte Carlo operating characteristics of the estimator
//   survee benchmark  estimating-equation path versus the long-dataset bootstrap
//
// Tabular results are CSV, structured results are JSON. With the same flags
// and seed the output CSVs are byte identical across runs. Exit codes: 0 on
// success, 1 on computational failure, 2 on usage errors.

#include <sys/resource.h>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "survee/csv.hpp"
#include "survee/errors.hpp"
#include "survee/estimating_functions.hpp"
#include "survee/gcomputation.hpp"
#include "survee/long_oracle.hpp"
#include "survee/rng.hpp"
#include "survee/sandwich.hpp"
#include "survee/simulation.hpp"
#include "survee/survival_data.hpp"
#include "survee/time_design.hpp"

namespace {

using nlohmann::json;

/// Post-parse problems that are still the caller's fault (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

template <typename Body>
double median_seconds(int repeat, Body&& body) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repeat));
  for (int r = 0; r < repeat; ++r) {
    auto start = std::chrono::steady_clock::now();
    body();
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    times.push_back(dt.count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size();
  return m % 2 == 1 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
}

std::filesystem::path ensure_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw survee::SchemaError("cannot write " + path.string());
  out << text;
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// shared flag groups

struct DataArgs {
  std::string input;
  std::string id_col, time_col, event_col, weight_col, treatment_col;
  std::vector<std::string> covariate_cols;
  double time_resolution = 1.0;
  int num_intervals = 0;
};

void add_data_flags(CLI::App* cmd, DataArgs& a, bool with_treatment) {
  cmd->add_option("--input", a.input, "input CSV file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--id-col", a.id_col, "unit identifier column");
  cmd->add_option("--time-col", a.time_col, "observed time column")->required();
  cmd->add_option("--event-col", a.event_col, "event indicator column (1 event, 0 censored)")->required();
  cmd->add_option("--covariate-cols", a.covariate_cols, "covariate columns, comma separated")
      ->delimiter(',');
  if (with_treatment)
    cmd->add_option("--treatment-col", a.treatment_col, "binary treatment column")->required();
  cmd->add_option("--weight-col", a.weight_col, "unit weight column");
  cmd->add_option("--time-resolution", a.time_resolution,
                  "interval width used to discretize the time column")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--num-intervals", a.num_intervals,
                  "length of the discrete time grid (0 infers the maximum observed time)")
      ->check(CLI::NonNegativeNumber);
}

struct LoadedData {
  survee::SurvivalDataset data;
  Eigen::VectorXi treatment;
  std::vector<std::string> covariate_names;
};

LoadedData load_input(const DataArgs& a, bool with_treatment) {
  survee::CsvSchema schema;
  schema.id_column = a.id_col;
  schema.time_column = a.time_col;
  schema.event_column = a.event_col;
  schema.weight_column = a.weight_col;
  schema.time_resolution = a.time_resolution;
  schema.num_intervals = a.num_intervals;
  if (with_treatment) schema.covariate_columns.push_back(a.treatment_col);
  schema.covariate_columns.insert(schema.covariate_columns.end(), a.covariate_cols.begin(),
                                  a.covariate_cols.end());

  LoadedData out;
  out.data = survee::load_csv(a.input, schema);
  out.covariate_names = a.covariate_cols;
  if (with_treatment) {
    const Eigen::Index n = out.data.size();
    out.treatment.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = out.data.covariates(i, 0);
      if (v != 0.0 && v != 1.0)
        throw survee::ValidationError("treatment column '" + a.treatment_col +
                                      "' must be 0/1; saw " + fmt(v));
      out.treatment[i] = static_cast<int>(v);
    }
    out.data.covariates =
        out.data.covariates.rightCols(out.data.covariates.cols() - 1).eval();
  }
  return out;
}

struct ModelArgs {
  std::string time_model;
  std::vector<double> knots;
  std::vector<int> target_times;
  std::string variance = "sandwich";
  int bootstrap_replicates = 1000;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  int jobs = 1;
  double tol = 1e-9;
  int max_iter = 5000;
  std::uint64_t memory_budget = std::uint64_t{2} << 30;
  std::string mode = "auto";
  int repeat = 1;
  std::string output_dir = ".";
  bool dump_covariance = false;

  CLI::Option* seed_opt = nullptr;
  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
};

void add_model_flags(CLI::App* cmd, ModelArgs& m, bool causal) {
  cmd->add_option("--time-model", m.time_model,
                  "intercept | linear | loglinear | spline[:k1,k2,...] | disjoint")
      ->required();
  cmd->add_option("--knots", m.knots, "spline knots when --time-model gives none inline")
      ->delimiter(',');
  cmd->add_option("--target-times", m.target_times,
                  "grid times to report risks at (default: end of grid)")
      ->delimiter(',');
  if (causal) {
    cmd->add_option("--variance", m.variance, "sandwich | bootstrap")
        ->check(CLI::IsMember({"sandwich", "bootstrap"}));
    cmd->add_option("--bootstrap-replicates", m.bootstrap_replicates,
                    "replicates for --variance bootstrap")
        ->check(CLI::PositiveNumber);
  }
  cmd->add_option("--ci-level", m.ci_level, "confidence level")->check(CLI::Range(0.5, 0.9999));
  m.seed_opt = cmd->add_option("--seed", m.seed, "RNG seed");
  cmd->add_option("--jobs", m.jobs, "worker threads for bootstrap replicates")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", m.tol, "solver score tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", m.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--memory-budget", m.memory_budget, "score storage budget in bytes");
  cmd->add_option("--mode", m.mode, "score evaluation mode")
      ->check(CLI::IsMember({"auto", "vectorized", "loop"}));
  cmd->add_option("--repeat", m.repeat, "timed repetitions; wall clock is the median")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir", m.output_dir, "directory for output files");
  if (causal)
    cmd->add_flag("--dump-covariance", m.dump_covariance,
                  "also write the joint sandwich covariance matrix");
}

survee::TimeDesignSpec resolve_time_model(const std::string& text,
                                          const std::vector<double>& knots) {
  if (text == "spline") {
    if (knots.empty())
      throw UsageError("--time-model spline needs knots: spline:k1,k2,... or --knots");
    return survee::TimeDesignSpec::spline(knots);
  }
  survee::TimeDesignSpec spec;
  try {
    spec = survee::parse_time_model(text);
  } catch (const survee::Error& e) {
    throw UsageError(e.what());
  }
  if (!knots.empty()) {
    if (spec.form != survee::TimeForm::spline)
      throw UsageError("--knots only applies to --time-model spline");
    throw UsageError("knots given both inline and via --knots; pick one");
  }
  return spec;
}

survee::FitOptions make_fit_options(const ModelArgs& m) {
  survee::FitOptions o;
  o.solver.tolerance = m.tol;
  o.solver.max_iterations = m.max_iter;
  o.memory_budget_bytes = m.memory_budget;
  if (m.mode == "vectorized")
    o.mode = survee::ModeChoice::vectorized;
  else if (m.mode == "loop")
    o.mode = survee::ModeChoice::loop;
  else
    o.mode = survee::ModeChoice::automatic;
  return o;
}

json base_summary(const char* command) {
  json j;
  j["version"] = SURVEE_VERSION;
  j["command"] = command;
  return j;
}

json data_config_json(const DataArgs& a) {
  return json{{"input", a.input},
              {"id_col", a.id_col},
              {"time_col", a.time_col},
              {"event_col", a.event_col},
              {"covariate_cols", a.covariate_cols},
              {"treatment_col", a.treatment_col},
              {"weight_col", a.weight_col},
              {"time_resolution", a.time_resolution},
              {"num_intervals", a.num_intervals}};
}

json model_config_json(const ModelArgs& m) {
  return json{{"time_model", m.time_model},
              {"knots", m.knots},
              {"target_times", m.target_times},
              {"variance", m.variance},
              {"bootstrap_replicates", m.bootstrap_replicates},
              {"ci_level", m.ci_level},
              {"seed", m.seed},
              {"jobs", m.jobs},
              {"tol", m.tol},
              {"max_iter", m.max_iter},
              {"memory_budget", m.memory_budget},
              {"mode", m.mode},
              {"repeat", m.repeat},
              {"output_dir", m.output_dir},
              {"dump_covariance", m.dump_covariance}};
}

json diagnostics_json(const survee::FitResult& fit) {
  return json{{"iterations", fit.diagnostics.iterations},
              {"final_norm", fit.diagnostics.final_norm},
              {"converged", fit.diagnostics.converged},
              {"jacobian_condition", fit.diagnostics.jacobian_condition},
              {"mode", fit.mode_used == survee::ScoreMode::vectorized ? "vectorized" : "loop"},
              {"pinned_coordinates", fit.pinned.size()},
              {"num_parameters", fit.beta.size()}};
}

// ---------------------------------------------------------------------------
// fit

int run_fit(const DataArgs& da, const ModelArgs& ma) {
  if (ma.variance != "sandwich")
    throw UsageError("fit supports --variance sandwich only");
  const auto out_dir = ensure_output_dir(ma.output_dir);

  LoadedData loaded;
  const double t_load = median_seconds(1, [&] { loaded = load_input(da, false); });
  const survee::TimeDesignSpec time_spec = resolve_time_model(ma.time_model, ma.knots);
  const survee::FitOptions opts = make_fit_options(ma);

  survee::FitResult fit;
  const double t_fit = median_seconds(
      ma.repeat, [&] { fit = survee::fit_pooled_logistic(loaded.data, time_spec, opts); });
  for (std::size_t c = 0; c < loaded.covariate_names.size() &&
                          c < fit.coefficient_names.size();
       ++c)
    fit.coefficient_names[c] = loaded.covariate_names[c];

  const Eigen::Index total = fit.beta.size();
  std::vector<Eigen::Index> free_index;
  for (Eigen::Index j = 0; j < total; ++j)
    if (std::find(fit.pinned.begin(), fit.pinned.end(), j) == fit.pinned.end())
      free_index.push_back(j);
  const auto nf = static_cast<Eigen::Index>(free_index.size());

  auto select_free = [&](const Eigen::MatrixXd& stack) {
    Eigen::MatrixXd sub(nf, stack.cols());
    for (Eigen::Index c = 0; c < nf; ++c)
      sub.row(c) = stack.row(free_index[static_cast<std::size_t>(c)]);
    return sub;
  };

  survee::SandwichResult sw;
  const double t_var = median_seconds(ma.repeat, [&] {
    auto ef_mean = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
      Eigen::VectorXd full = fit.beta;
      for (Eigen::Index c = 0; c < nf; ++c)
        full[free_index[static_cast<std::size_t>(c)]] = theta[c];
      const auto stack =
          survee::score_stack(loaded.data, fit.design, full, nullptr, fit.mode_used);
      return select_free(stack.matrix).rowwise().mean();
    };
    Eigen::VectorXd free_beta(nf);
    for (Eigen::Index c = 0; c < nf; ++c)
      free_beta[c] = fit.beta[free_index[static_cast<std::size_t>(c)]];
    const Eigen::MatrixXd bread = survee::bread_matrix(ef_mean, free_beta);
    const auto at_hat =
        survee::score_stack(loaded.data, fit.design, fit.beta, nullptr, fit.mode_used);
    const Eigen::MatrixXd meat = survee::meat_matrix(select_free(at_hat.matrix));
    sw = survee::sandwich(bread, meat, loaded.data.size());
  });

  std::string coef = "term,estimate,se,lcl,ucl,pinned\n";
  std::vector<Eigen::Index> free_pos(static_cast<std::size_t>(total), -1);
  for (Eigen::Index c = 0; c < nf; ++c)
    free_pos[static_cast<std::size_t>(free_index[static_cast<std::size_t>(c)])] = c;
  for (Eigen::Index j = 0; j < total; ++j) {
    coef += fit.coefficient_names[static_cast<std::size_t>(j)] + "," + fmt(fit.beta[j]);
    const Eigen::Index c = free_pos[static_cast<std::size_t>(j)];
    if (c < 0) {
      coef += ",,,,1\n";
    } else {
      const auto [lcl, ucl] = survee::wald_ci(fit.beta[j], sw.se[c], ma.ci_level);
      coef += "," + fmt(sw.se[c]) + "," + fmt(lcl) + "," + fmt(ucl) + ",0\n";
    }
  }
  write_text(out_dir / "coefficients.csv", coef);

  std::string cov = "term";
  for (const auto j : free_index) cov += "," + fit.coefficient_names[static_cast<std::size_t>(j)];
  cov += "\n";
  for (Eigen::Index r = 0; r < nf; ++r) {
    cov += fit.coefficient_names[static_cast<std::size_t>(free_index[static_cast<std::size_t>(r)])];
    for (Eigen::Index c = 0; c < nf; ++c) cov += "," + fmt(sw.covariance(r, c));
    cov += "\n";
  }
  write_text(out_dir / "covariance.csv", cov);

  json j = base_summary("fit");
  j["config"] = model_config_json(ma);
  j["config"]["data"] = data_config_json(da);
  j["num_units"] = loaded.data.size();
  j["num_intervals"] = loaded.data.grid.num_intervals;
  j["diagnostics"] = diagnostics_json(fit);
  j["bread_condition"] = sw.bread_condition;
  j["wall_clock_seconds"] = {{"load", t_load}, {"fit", t_fit}, {"variance", t_var}};
  write_text(out_dir / "summary.json", j.dump(2) + "\n");

  std::cout << "wrote coefficients.csv, covariance.csv, summary.json to " << out_dir.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gcomp

std::string risk_curve_csv(const survee::RiskCurve& curve) {
  std::string csv =
      "time,risk1,se1,lcl1,ucl1,risk0,se0,lcl0,ucl0,rd,se_rd,lcl_rd,ucl_rd\n";
  for (std::size_t t = 0; t < curve.times.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    csv += std::to_string(curve.times[t]);
    for (const double v :
         {curve.risk1[i], curve.se1[i], curve.lcl1[i], curve.ucl1[i], curve.risk0[i],
          curve.se0[i], curve.lcl0[i], curve.ucl0[i], curve.rd[i], curve.se_rd[i],
          curve.lcl_rd[i], curve.ucl_rd[i]})
      csv += "," + fmt(v, "%.6f");
    csv += "\n";
  }
  return csv;
}

int run_gcomp(const DataArgs& da, const ModelArgs& ma, const std::string& arm_strategy) {
  if (ma.variance == "bootstrap" && !ma.seed_given())
    throw UsageError("--variance bootstrap requires --seed");
  const auto out_dir = ensure_output_dir(ma.output_dir);

  LoadedData loaded;
  const double t_load = median_seconds(1, [&] { loaded = load_input(da, true); });

  survee::GComputationSpec spec;
  spec.arm_strategy = arm_strategy == "single" ? survee::ArmStrategy::single_model
                                               : survee::ArmStrategy::separate_models;
  spec.time = resolve_time_model(ma.time_model, ma.knots);
  spec.covariates = survee::CovariateFormula::all_linear(
      static_cast<int>(loaded.data.num_covariates()));
  spec.target_times = ma.target_times.empty()
                          ? std::vector<int>{loaded.data.grid.num_intervals}
                          : ma.target_times;
  spec.ci_level = ma.ci_level;
  spec.fit = make_fit_options(ma);

  survee::ContrastResult result;
  const double t_est = median_seconds(
      ma.repeat, [&] { result = survee::causal_contrast(loaded.data, loaded.treatment, spec); });

  survee::RiskCurve curve = result.curve;
  const auto T = spec.target_times.size();
  double t_boot = 0.0;
  json boot_info;
  if (ma.variance == "bootstrap") {
    survee::BootstrapOptions bo;
    bo.replicates = ma.bootstrap_replicates;
    bo.seed = ma.seed;
    bo.jobs = ma.jobs;
    bo.ci_level = ma.ci_level;
    survee::BootstrapResult br;
    auto estimator = [&](const std::vector<Eigen::Index>& idx) {
      return survee::causal_point_estimates(survee::resample_dataset(loaded.data, idx),
                                            survee::resample_vector(loaded.treatment, idx),
                                            spec);
    };
    t_boot = median_seconds(ma.repeat,
                            [&] { br = survee::bootstrap(loaded.data.size(), estimator, bo); });
    for (std::size_t t = 0; t < T; ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      const auto r1 = static_cast<Eigen::Index>(t);
      const auto r0 = static_cast<Eigen::Index>(T + t);
      const auto rd = static_cast<Eigen::Index>(2 * T + t);
      curve.se1[i] = br.se[r1];
      curve.lcl1[i] = br.percentile_ci(r1, 0);
      curve.ucl1[i] = br.percentile_ci(r1, 1);
      curve.se0[i] = br.se[r0];
      curve.lcl0[i] = br.percentile_ci(r0, 0);
      curve.ucl0[i] = br.percentile_ci(r0, 1);
      curve.se_rd[i] = br.se[rd];
      curve.lcl_rd[i] = br.percentile_ci(rd, 0);
      curve.ucl_rd[i] = br.percentile_ci(rd, 1);
    }
    boot_info = {{"replicates", bo.replicates}, {"failures", br.failures}};
  }

  write_text(out_dir / "risk_curve.csv", risk_curve_csv(curve));

  if (ma.dump_covariance) {
    std::vector<std::string> names;
    for (const auto& slice : result.layout.slices)
      for (Eigen::Index i = 0; i < slice.size; ++i)
        names.push_back(slice.name + "[" + std::to_string(i) + "]");
    std::string cov = "term";
    for (const auto& name : names) cov += "," + name;
    cov += "\n";
    for (Eigen::Index r = 0; r < result.covariance.rows(); ++r) {
      cov += names[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < result.covariance.cols(); ++c)
        cov += "," + fmt(result.covariance(r, c));
      cov += "\n";
    }
    write_text(out_dir / "covariance.csv", cov);
  }

  json j = base_summary("gcomp");
  j["config"] = model_config_json(ma);
  j["config"]["data"] = data_config_json(da);
  j["config"]["arm_strategy"] = arm_strategy;
  j["num_units"] = loaded.data.size();
  j["num_intervals"] = loaded.data.grid.num_intervals;
  json diag = json::array();
  if (result.fits.size() == 2) {
    diag.push_back(diagnostics_json(result.fits[0]));
    diag[0]["model"] = "arm1";
    diag.push_back(diagnostics_json(result.fits[1]));
    diag[1]["model"] = "arm0";
  } else if (!result.fits.empty()) {
    diag.push_back(diagnostics_json(result.fits[0]));
    diag[0]["model"] = "pooled";
  }
  j["diagnostics"] = diag;
  if (!boot_info.is_null()) j["bootstrap"] = boot_info;
  json results = json::array();
  for (std::size_t t = 0; t < T; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    results.push_back({{"time", curve.times[t]},
                       {"risk1", curve.risk1[i]},
                       {"risk0", curve.risk0[i]},
                       {"rd", curve.rd[i]},
                       {"se_rd", curve.se_rd[i]},
                       {"ci_rd", {curve.lcl_rd[i], curve.ucl_rd[i]}}});
  }
  j["results"] = results;
  j["wall_clock_seconds"] = {{"load", t_load}, {"estimate", t_est}};
  if (ma.variance == "bootstrap") j["wall_clock_seconds"]["bootstrap"] = t_boot;
  write_text(out_dir / "summary.json", j.dump(2) + "\n");

  std::cout << "wrote risk_curve.csv"
            << (ma.dump_covariance ? ", covariance.csv" : "") << ", summary.json to "
            << out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config_path;
  std::optional<int> n, iters, jobs;
  std::optional<std::uint64_t> seed, truth_draws;
  std::vector<std::string> time_models;
  std::vector<int> target_times;
  std::vector<double> confounder_knots;
  double tol = 1e-9;
  int max_iter = 5000;
  int repeat = 1;
  std::string output_dir = ".";
};

void add_simulate_flags(CLI::App* cmd, SimulateArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON file with simulation settings")
      ->check(CLI::ExistingFile);
  cmd->add_option("--n", a.n, "units per simulated cohort")->check(CLI::PositiveNumber);
  cmd->add_option("--iters", a.iters, "number of simulated cohorts")->check(CLI::PositiveNumber);
  cmd->add_option("--time-model", a.time_models,
                  "hazard model for time; repeat the flag to compare several")
      ->take_all();
  cmd->add_option("--target-times", a.target_times, "times to evaluate the risk difference at")
      ->delimiter(',');
  cmd->add_option("--confounder-knots", a.confounder_knots,
                  "cubic spline knots for the confounder")
      ->delimiter(',');
  cmd->add_option("--seed", a.seed, "RNG seed (required unless the config provides one)");
  cmd->add_option("--jobs", a.jobs, "worker threads across cohorts")->check(CLI::PositiveNumber);
  cmd->add_option("--truth-draws", a.truth_draws, "Monte Carlo draws for the true risks");
  cmd->add_option("--tol", a.tol, "solver score tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", a.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--repeat", a.repeat, "timed repetitions; wall clock is the median")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir", a.output_dir, "directory for output files");
}

int run_simulate(const SimulateArgs& a) {
  survee::SimConfig cfg;
  bool seed_set = false;
  std::vector<std::string> model_texts;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    json c;
    try {
      c = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad --config JSON: ") + e.what());
    }
    try {
      cfg.n = c.value("n", cfg.n);
      cfg.iterations = c.value("iterations", cfg.iterations);
      if (c.contains("target_times"))
        cfg.target_times = c["target_times"].get<std::vector<int>>();
      if (c.contains("time_models"))
        model_texts = c["time_models"].get<std::vector<std::string>>();
      if (c.contains("confounder_knots"))
        cfg.confounder_knots = c["confounder_knots"].get<std::vector<double>>();
      if (c.contains("seed")) {
        cfg.seed = c["seed"].get<std::uint64_t>();
        seed_set = true;
      }
      cfg.jobs = c.value("jobs", cfg.jobs);
      cfg.truth_draws = c.value("truth_draws", cfg.truth_draws);
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad --config value: ") + e.what());
    }
  }
  if (a.n) cfg.n = *a.n;
  if (a.iters) cfg.iterations = *a.iters;
  if (!a.target_times.empty()) cfg.target_times = a.target_times;
  if (!a.time_models.empty()) model_texts = a.time_models;
  if (!a.confounder_knots.empty()) cfg.confounder_knots = a.confounder_knots;
  if (a.seed) {
    cfg.seed = *a.seed;
    seed_set = true;
  }
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.truth_draws) cfg.truth_draws = *a.truth_draws;
  cfg.solver.tolerance = a.tol;
  cfg.solver.max_iterations = a.max_iter;
  if (!seed_set) throw UsageError("simulate requires --seed (or a seed in --config)");

  if (model_texts.empty())
    model_texts = {"intercept", "linear", "loglinear", "spline:5,10,15,20,25", "disjoint"};
  cfg.time_models.clear();
  for (const auto& text : model_texts) cfg.time_models.push_back(resolve_time_model(text, {}));

  const auto out_dir = ensure_output_dir(a.output_dir);
  std::vector<survee::MetricsRow> rows;
  const double t_run = median_seconds(a.repeat, [&] { rows = survee::run_experiment(cfg); });

  write_text(out_dir / "metrics.csv", survee::metrics_csv(rows));

  json j = base_summary("simulate");
  j["config"] = {{"config", a.config_path},
                 {"n", cfg.n},
                 {"iterations", cfg.iterations},
                 {"target_times", cfg.target_times},
                 {"time_models", model_texts},
                 {"confounder_knots", cfg.confounder_knots},
                 {"seed", cfg.seed},
                 {"jobs", cfg.jobs},
                 {"truth_draws", cfg.truth_draws},
                 {"tol", a.tol},
                 {"max_iter", a.max_iter},
                 {"repeat", a.repeat},
                 {"output_dir", a.output_dir}};
  json metrics = json::array();
  for (const auto& row : rows)
    metrics.push_back({{"model", row.model},
                       {"n", row.n},
                       {"t", row.t},
                       {"bias", row.bias},
                       {"ese", row.ese},
                       {"ase", row.ase},
                       {"ser", row.ser},
                       {"coverage", row.coverage},
                       {"failures", row.failures},
                       {"iterations", row.iterations_used}});
  j["metrics"] = metrics;
  j["wall_clock_seconds"] = {{"simulate", t_run}};
  write_text(out_dir / "summary.json", j.dump(2) + "\n");

  std::cout << "wrote metrics.csv, summary.json to " << out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  int n = 86;
  int num_intervals = 59;
  std::string time_model = "spline:10,20,30,40";
  std::vector<double> knots;
  std::vector<int> target_times;
  int bootstrap_replicates = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
  double tol = 1e-9;
  int max_iter = 5000;
  std::uint64_t memory_budget = std::uint64_t{2} << 30;
  std::string mode = "auto";
  int repeat = 1;
  std::string output_dir = ".";
};

void add_benchmark_flags(CLI::App* cmd, BenchmarkArgs& a) {
  cmd->add_option("--n", a.n, "units in the synthetic cohort")->check(CLI::PositiveNumber);
  cmd->add_option("--num-intervals", a.num_intervals, "length of the discrete time grid")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--time-model", a.time_model, "hazard model for time");
  cmd->add_option("--knots", a.knots, "spline knots when --time-model gives none inline")
      ->delimiter(',');
  cmd->add_option("--target-times", a.target_times, "times to estimate (default: end of grid)")
      ->delimiter(',');
  cmd->add_option("--bootstrap-replicates", a.bootstrap_replicates,
                  "replicates for the long-dataset bootstrap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "RNG seed")->required();
  cmd->add_option("--jobs", a.jobs, "worker threads for bootstrap replicates")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", a.tol, "solver score tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", a.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--memory-budget", a.memory_budget, "score storage budget in bytes");
  cmd->add_option("--mode", a.mode, "score evaluation mode")
      ->check(CLI::IsMember({"auto", "vectorized", "loop"}));
  cmd->add_option("--repeat", a.repeat, "timed repetitions; wall clock is the median")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir", a.output_dir, "directory for output files");
}

survee::SurvivalDataset make_benchmark_cohort(int n, int K, std::uint64_t seed,
                                              Eigen::VectorXi& treatment) {
  auto stream = survee::rng::Stream::substream(seed, 0, 0);
  survee::SurvivalDataset d;
  d.grid = {K, 1.0};
  d.covariates.resize(n, 2);
  d.observed_time.resize(n);
  d.event.resize(n);
  treatment.resize(n);
  for (int i = 0; i < n; ++i) {
    d.covariates(i, 0) = 1.0 + static_cast<double>(stream.below(7));
    d.covariates(i, 1) = stream.uniform(0.5, 5.0);
    treatment[i] = stream.bernoulli(0.5);
    const auto raw = 1 + static_cast<int>(stream.below(7 * K / 5));
    if (raw > K) {
      d.observed_time[i] = K;
      d.event[i] = 0;
    } else {
      d.observed_time[i] = raw;
      d.event[i] = stream.bernoulli(0.85);
    }
  }
  d.validate();
  return d;
}

/// The standard implementation: expand each arm to a person-period table,
/// fit by IRLS, and standardize predicted risks over everyone's covariates.
Eigen::VectorXd long_gcomp_estimates(const survee::SurvivalDataset& data,
                                     const Eigen::VectorXi& treatment,
                                     const survee::TimeDesignSpec& time_spec,
                                     const std::vector<int>& targets, double tol,
                                     int max_iter) {
  std::vector<Eigen::Index> idx1, idx0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    (treatment[i] == 1 ? idx1 : idx0).push_back(i);
  if (idx1.empty() || idx0.empty())
    throw survee::ValidationError("resample lost an entire treatment arm");

  const Eigen::Index n = data.size();
  const Eigen::Index p = data.covariates.cols();
  auto arm_risks = [&](const std::vector<Eigen::Index>& idx) {
    const survee::SurvivalDataset arm = survee::select_rows(data, idx);
    const auto design = survee::build_design(time_spec, data.grid, arm.unique_event_times());
    const auto table = survee::expand_long(arm, design);
    const Eigen::VectorXd beta = survee::fit_long_logistic(table, tol, max_iter);

    const Eigen::VectorXd eta_x = data.covariates * beta.head(p);
    const Eigen::VectorXd eta_time = design.matrix * beta.tail(design.num_columns());
    Eigen::MatrixXd unit_risks(static_cast<Eigen::Index>(targets.size()), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double surv = 1.0;
      std::size_t ti = 0;
      for (Eigen::Index k = 0; k < design.num_rows(); ++k) {
        const int row_time = design.row_times[static_cast<std::size_t>(k)];
        while (ti < targets.size() && targets[ti] < row_time) {
          unit_risks(static_cast<Eigen::Index>(ti), i) = 1.0 - surv;
          ++ti;
        }
        if (ti == targets.size()) break;
        surv *= 1.0 - expit(eta_x[i] + eta_time[k]);
      }
      while (ti < targets.size()) {
        unit_risks(static_cast<Eigen::Index>(ti), i) = 1.0 - surv;
        ++ti;
      }
    }
    return unit_risks.rowwise().mean().eval();
  };

  const Eigen::VectorXd r1 = arm_risks(idx1);
  const Eigen::VectorXd r0 = arm_risks(idx0);
  Eigen::VectorXd out(3 * static_cast<Eigen::Index>(targets.size()));
  out << r1, r0, r1 - r0;
  return out;
}

int run_benchmark(const BenchmarkArgs& a) {
  const auto out_dir = ensure_output_dir(a.output_dir);
  const survee::TimeDesignSpec time_spec = resolve_time_model(a.time_model, a.knots);
  const std::vector<int> targets =
      a.target_times.empty() ? std::vector<int>{a.num_intervals} : a.target_times;

  Eigen::VectorXi treatment;
  const survee::SurvivalDataset data =
      make_benchmark_cohort(a.n, a.num_intervals, a.seed, treatment);

  survee::GComputationSpec spec;
  spec.arm_strategy = survee::ArmStrategy::separate_models;
  spec.time = time_spec;
  spec.covariates =
      survee::CovariateFormula::all_linear(static_cast<int>(data.num_covariates()));
  spec.target_times = targets;
  spec.fit.solver.tolerance = a.tol;
  spec.fit.solver.max_iterations = a.max_iter;
  spec.fit.memory_budget_bytes = a.memory_budget;
  if (a.mode == "vectorized")
    spec.fit.mode = survee::ModeChoice::vectorized;
  else if (a.mode == "loop")
    spec.fit.mode = survee::ModeChoice::loop;

  survee::ContrastResult contrast;
  const double t_ee = median_seconds(
      a.repeat, [&] { contrast = survee::causal_contrast(data, treatment, spec); });

  survee::BootstrapOptions bo;
  bo.replicates = a.bootstrap_replicates;
  bo.seed = a.seed;
  bo.jobs = a.jobs;
  // Sparse resamples can put the long MLE at the boundary; count those as
  // failed replicates rather than aborting the timing run.
  bo.max_failure_fraction = 0.5;
  Eigen::VectorXd long_full;
  survee::BootstrapResult br;
  const double t_long = median_seconds(a.repeat, [&] {
    long_full = long_gcomp_estimates(data, treatment, time_spec, targets, a.tol, a.max_iter);
    br = survee::bootstrap(
        data.size(),
        [&](const std::vector<Eigen::Index>& idx) {
          return long_gcomp_estimates(survee::resample_dataset(data, idx),
                                      survee::resample_vector(treatment, idx), time_spec,
                                      targets, a.tol, a.max_iter);
        },
        bo);
  });

  std::string timings = "stage,seconds\n";
  timings += "estimating_equations," + fmt(t_ee, "%.6f") + "\n";
  timings += "long_bootstrap," + fmt(t_long, "%.6f") + "\n";
  write_text(out_dir / "timings.csv", timings);

  const auto design = survee::build_design(time_spec, data.grid, data.unique_event_times());
  const auto n64 = static_cast<std::uint64_t>(a.n);
  const auto K64 = static_cast<std::uint64_t>(a.num_intervals);
  const auto Kstar = static_cast<std::uint64_t>(data.unique_event_times().size());
  const auto p64 = static_cast<std::uint64_t>(data.num_covariates());
  const auto q64 = static_cast<std::uint64_t>(design.num_columns());
  json memory;
  const auto bytes = [](std::uint64_t elements) { return elements * sizeof(double); };
  const auto std_el =
      survee::estimate_elements(n64, K64, Kstar, p64, q64, survee::StorageModel::standard);
  const auto vec_el = survee::estimate_elements(
      n64, K64, Kstar, p64, q64,
      time_spec.form == survee::TimeForm::disjoint ? survee::StorageModel::vectorized_disjoint
                                                   : survee::StorageModel::vectorized);
  const auto loop_el =
      survee::estimate_elements(n64, K64, Kstar, p64, q64, survee::StorageModel::loop);
  memory["standard_elements"] = std_el;
  memory["vectorized_elements"] = vec_el;
  memory["loop_elements"] = loop_el;
  memory["standard_bytes"] = bytes(std_el);
  memory["vectorized_bytes"] = bytes(vec_el);
  memory["loop_bytes"] = bytes(loop_el);
  struct rusage usage {};
  getrusage(RUSAGE_SELF, &usage);
  memory["measured_peak_rss_bytes"] = static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u;

  const auto T = targets.size();
  const auto last = static_cast<Eigen::Index>(T) - 1;
  json j = base_summary("benchmark");
  j["config"] = {{"n", a.n},
                 {"num_intervals", a.num_intervals},
                 {"time_model", a.time_model},
                 {"knots", a.knots},
                 {"target_times", targets},
                 {"bootstrap_replicates", a.bootstrap_replicates},
                 {"seed", a.seed},
                 {"jobs", a.jobs},
                 {"tol", a.tol},
                 {"max_iter", a.max_iter},
                 {"memory_budget", a.memory_budget},
                 {"mode", a.mode},
                 {"repeat", a.repeat},
                 {"output_dir", a.output_dir}};
  j["problem"] = {{"num_units", a.n},
                  {"num_intervals", a.num_intervals},
                  {"unique_event_times", Kstar},
                  {"covariates", p64},
                  {"time_columns", q64},
                  {"long_rows_per_fit", static_cast<std::uint64_t>(
                                            survee::expand_long(data, design).rows())}};
  j["wall_clock_seconds"] = {{"estimating_equations", t_ee}, {"long_bootstrap", t_long}};
  j["speedup"] = t_long / t_ee;
  j["estimating_equations"] = {{"rd", contrast.curve.rd[last]},
                               {"se_rd", contrast.curve.se_rd[last]}};
  j["long_bootstrap"] = {{"rd", long_full[2 * static_cast<Eigen::Index>(T) + last]},
                         {"se_rd", br.se[2 * static_cast<Eigen::Index>(T) + last]},
                         {"failures", br.failures}};
  j["memory"] = memory;
  write_text(out_dir / "summary.json", j.dump(2) + "\n");

  std::cout << "estimating equations " << fmt(t_ee, "%.3f") << " s, long bootstrap "
            << fmt(t_long, "%.3f") << " s, speedup " << fmt(t_long / t_ee, "%.1f")
            << "x; wrote timings.csv, summary.json to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-time survival analysis with stacked estimating equations"};
  app.set_version_flag("--version", SURVEE_VERSION);
  app.require_subcommand(1);

  DataArgs fit_data, gcomp_data;
  ModelArgs fit_model, gcomp_model;
  std::string arm_strategy = "separate";
  SimulateArgs sim_args;
  BenchmarkArgs bench_args;

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the pooled logistic hazard model");
  add_data_flags(fit_cmd, fit_data, false);
  add_model_flags(fit_cmd, fit_model, false);

  CLI::App* gcomp_cmd =
      app.add_subcommand("gcomp", "g-computation risks and risk differences");
  add_data_flags(gcomp_cmd, gcomp_data, true);
  add_model_flags(gcomp_cmd, gcomp_model, true);
  gcomp_cmd->add_option("--arm-strategy", arm_strategy, "separate | single hazard models by arm")
      ->check(CLI::IsMember({"separate", "single"}));

  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo study of bias, SER, and coverage");
  add_simulate_flags(sim_cmd, sim_args);

  CLI::App* bench_cmd = app.add_subcommand(
      "benchmark", "time the estimating-equation path against the long-dataset bootstrap");
  add_benchmark_flags(bench_cmd, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(fit_cmd)) return run_fit(fit_data, fit_model);
    if (app.got_subcommand(gcomp_cmd)) return run_gcomp(gcomp_data, gcomp_model, arm_strategy);
    if (app.got_subcommand(sim_cmd)) return run_simulate(sim_args);
    if (app.got_subcommand(bench_cmd)) return run_benchmark(bench_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const survee::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
