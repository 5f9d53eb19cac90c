#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

// End-to-end checks of the installed command line: exit-code contract
// (0 success, 1 computational, 2 usage), output schemas, and byte-level
// determinism. The binary path is injected by the build.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(SURVEE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "survee_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// 80 units, two arms, events through week 12 with interior censoring. The
// pattern is arithmetic so the file is identical across runs and platforms.
fs::path cohort_csv() {
  static const fs::path path = [] {
    fs::path p = workdir() / "cohort.csv";
    std::ofstream out(p);
    out << "id,weeks,relapse,arm,age,sev\n";
    for (int i = 0; i < 80; ++i) {
      const int arm = i % 2;
      const int weeks = 1 + (i * 5 + arm * 3) % 12;
      const int relapse = (i % 4 != 0) ? 1 : 0;
      const double age = 40.0 + (i * 13) % 25;
      const double sev = 1.0 + (i * 7) % 4;
      out << "u" << i + 1 << "," << weeks << "," << relapse << "," << arm << ","
          << age << "," << sev << "\n";
    }
    return p;
  }();
  return path;
}

std::string gcomp_args(const std::string& extra, const fs::path& outdir) {
  return "gcomp --input " + cohort_csv().string() +
         " --id-col id --time-col weeks --event-col relapse"
         " --treatment-col arm --covariate-cols age,sev"
         " --time-model loglinear --target-times 4,8,12 " +
         extra + " --output-dir " + outdir.string();
}

}  // namespace

TEST_CASE("help exits zero and names the subcommands") {
  const fs::path log = workdir() / "help.log";
  CHECK(run_cli("--help", log) == 0);
  const std::string text = slurp(log);
  for (const char* name : {"fit", "gcomp", "simulate", "benchmark"})
    CHECK_MESSAGE(text.find(name) != std::string::npos, "missing ", name);
}

TEST_CASE("missing required flags exit 2") {
  const fs::path log = workdir() / "usage.log";
  CHECK(run_cli("fit --input " + cohort_csv().string() + " --time-col weeks", log) == 2);
  CHECK(run_cli("gcomp", log) == 2);
}

TEST_CASE("nonexistent input exits 2") {
  const fs::path log = workdir() / "noinput.log";
  CHECK(run_cli("fit --input /nonexistent.csv --time-col t --event-col e", log) == 2);
}

TEST_CASE("unknown time model exits 2") {
  const fs::path log = workdir() / "badmodel.log";
  const int rc = run_cli(gcomp_args("", workdir() / "badmodel") + " --time-model quadratic", log);
  CHECK(rc == 2);
  CHECK(slurp(log).find("time model") != std::string::npos);
}

TEST_CASE("fit names the input columns and reports convergence") {
  const fs::path out = workdir() / "fit";
  const fs::path log = workdir() / "fit.log";
  const int rc = run_cli("fit --input " + cohort_csv().string() +
                             " --id-col id --time-col weeks --event-col relapse"
                             " --covariate-cols age,sev --time-model spline:3,6,9"
                             " --output-dir " + out.string(),
                         log);
  REQUIRE_MESSAGE(rc == 0, slurp(log));

  const std::string coef = slurp(out / "coefficients.csv");
  CHECK(first_line(coef) == "term,estimate,se,lcl,ucl,pinned");
  CHECK(coef.find("\nage,") == std::string::npos);  // first column has no leading newline
  CHECK(coef.substr(coef.find('\n') + 1, 4) == "age,");
  CHECK(coef.find("sev,") != std::string::npos);
  CHECK(coef.find("intercept,") != std::string::npos);

  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("diagnostics").at("converged").get<bool>());
  CHECK(summary.at("num_units").get<int>() == 80);
  CHECK(summary.at("wall_clock_seconds").contains("fit"));
}

TEST_CASE("gcomp risk curve has the documented header and is byte-identical") {
  const fs::path out1 = workdir() / "g1";
  const fs::path out2 = workdir() / "g2";
  const fs::path log = workdir() / "gcomp.log";
  REQUIRE_MESSAGE(run_cli(gcomp_args("", out1), log) == 0, slurp(log));
  REQUIRE(run_cli(gcomp_args("", out2), log) == 0);

  const std::string curve = slurp(out1 / "risk_curve.csv");
  CHECK(first_line(curve) ==
        "time,risk1,se1,lcl1,ucl1,risk0,se0,lcl0,ucl0,rd,se_rd,lcl_rd,ucl_rd");
  CHECK(curve == slurp(out2 / "risk_curve.csv"));

  const json summary = json::parse(slurp(out1 / "summary.json"));
  REQUIRE(summary.at("results").size() == 3);
  CHECK(summary.at("results")[0].at("time").get<int>() == 4);
  for (const auto& row : summary.at("results"))
    CHECK(row.at("se_rd").get<double>() > 0.0);
}

TEST_CASE("bootstrap variance requires a seed and reports replicates") {
  const fs::path out = workdir() / "boot";
  const fs::path log = workdir() / "boot.log";
  CHECK(run_cli(gcomp_args("--variance bootstrap --bootstrap-replicates 50", out), log) == 2);

  const int rc = run_cli(
      gcomp_args("--variance bootstrap --bootstrap-replicates 50 --seed 9", out), log);
  REQUIRE_MESSAGE(rc == 0, slurp(log));
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("bootstrap").at("replicates").get<int>() == 50);
  CHECK(summary.at("bootstrap").at("failures").get<int>() == 0);
}

TEST_CASE("non-binary treatment exits 1") {
  const fs::path bad = workdir() / "bad_treatment.csv";
  {
    std::ofstream out(bad);
    out << "id,weeks,relapse,arm,age\n";
    out << "u1,3,1,0,50\nu2,5,1,1,41\nu3,2,0,2,63\nu4,7,1,0,45\n";
  }
  const fs::path log = workdir() / "badarm.log";
  const int rc = run_cli("gcomp --input " + bad.string() +
                             " --id-col id --time-col weeks --event-col relapse"
                             " --treatment-col arm --covariate-cols age"
                             " --time-model intercept --output-dir " +
                             (workdir() / "badarm").string(),
                         log);
  CHECK(rc == 1);
  CHECK(slurp(log).find("treatment") != std::string::npos);
}

TEST_CASE("an arm without events exits 1") {
  const fs::path bad = workdir() / "no_events.csv";
  {
    std::ofstream out(bad);
    out << "id,weeks,relapse,arm,age\n";
    for (int i = 0; i < 30; ++i) {
      const int arm = i % 2;
      const int relapse = arm == 1 ? 0 : (i % 3 != 0 ? 1 : 0);
      out << "u" << i + 1 << "," << 1 + (i * 5) % 9 << "," << relapse << ","
          << arm << "," << 40 + i % 20 << "\n";
    }
  }
  const fs::path log = workdir() / "noevents.log";
  const int rc = run_cli("gcomp --input " + bad.string() +
                             " --id-col id --time-col weeks --event-col relapse"
                             " --treatment-col arm --covariate-cols age"
                             " --time-model intercept --output-dir " +
                             (workdir() / "noevents").string(),
                         log);
  CHECK(rc == 1);
}

TEST_CASE("dump-covariance writes the joint matrix") {
  const fs::path out = workdir() / "cov";
  const fs::path log = workdir() / "cov.log";
  REQUIRE(run_cli(gcomp_args("--dump-covariance", out), log) == 0);
  const std::string cov = slurp(out / "covariance.csv");
  CHECK(first_line(cov).rfind("term,", 0) == 0);
  CHECK(cov.find("delta[") != std::string::npos);
  CHECK(cov.find("gamma1[") != std::string::npos);
}
