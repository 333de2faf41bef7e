#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "misclass/error.hpp"
#include "misclass/io.hpp"
#include "misclass/workflow.hpp"

using namespace misclass;
namespace fs = std::filesystem;

namespace {

const std::string kData = MISCLASS_TEST_DATA;

struct TableRow {
  int system;
  double q1, q2, low, medium, high;
};

// Registry estimates and printed modes for the ten systems.
const TableRow kTable[] = {
    {1, 0.061, 0.120, 0.091, 0.121, 0.140}, {2, 0.058, 0.147, 0.095, 0.135, 0.155},
    {3, 0.039, 0.307, 0.116, 0.193, 0.242}, {4, 0.063, 0.130, 0.096, 0.128, 0.149},
    {5, 0.031, 0.113, 0.059, 0.088, 0.106}, {6, 0.064, 0.113, 0.093, 0.121, 0.139},
    {7, 0.064, 0.092, 0.087, 0.110, 0.125}, {8, 0.074, 0.109, 0.101, 0.129, 0.146},
    {9, 0.058, 0.147, 0.095, 0.132, 0.155}, {10, 0.063, 0.115, 0.092, 0.121, 0.139},
};

std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text_file(path.string()));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '\t')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("misclass_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_analyze_config(const fs::path& out) {
  RunConfig c = load_run_config(kData + "/analyze.cfg");
  c.output_dir = out.string();
  c.iterations = 200;
  c.burn_in = 50;
  return c;
}

}  // namespace

TEST_SUITE("workflow") {

TEST_CASE("modes of the outcome rate reproduce the registry table") {
  for (const auto& row : kTable) {
    CAPTURE(row.system);
    CHECK(std::abs(compute_rho_hat(row.q1, row.q2, 0.25) - row.low) <= 0.001);
    CHECK(std::abs(compute_rho_hat(row.q1, row.q2, 0.66) - row.high) <= 0.001);
    // System 2's printed Medium mode (0.135) is not q1 + q2/2 = 0.1315 of
    // its rounded inputs.
    const double tolerance = row.system == 2 ? 0.005 : 0.001;
    CHECK(std::abs(compute_rho_hat(row.q1, row.q2, 0.50) - row.medium) <= tolerance);
  }
  CHECK(r_value(RLevel::low) == 0.25);
  CHECK(r_value(RLevel::medium) == 0.50);
  CHECK(r_value(RLevel::high) == 0.66);
  CHECK_THROWS_AS(compute_rho_hat(0.6, 0.9, 0.5), DomainError);
  CHECK_THROWS_AS(compute_rho_hat(-0.1, 0.1, 0.5), DomainError);
}

TEST_CASE("grid priors use the arm's level, anchors one point apart and registry bounds") {
  const RegistryTable registry = read_registry_file(kData + "/registry.csv");
  const SiteTable sites = read_site_file(kData + "/sites.csv");
  const auto specs = build_grid_priors(registry, sites.sites, RLevel::low, RLevel::high);
  REQUIRE(specs.size() == 30);
  const ElicitationSpec& s1 = specs[0];
  CHECK(sites.sites[0].group_path.front() == "sys1");
  CHECK(s1.mode == doctest::Approx(0.091));
  CHECK(s1.low.probability == 0.05);
  CHECK(s1.low.value == doctest::Approx(0.081));
  CHECK(s1.high.probability == 0.95);
  CHECK(s1.high.value == doctest::Approx(0.101));
  CHECK(s1.lower == doctest::Approx(0.061));
  CHECK(s1.upper == doctest::Approx(0.181));

  // Control systems take r = 0.25, treated systems r = 0.66.
  std::set<double> r_used;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto g = resolve_group(registry, sites.sites[i].group_path.front());
    r_used.insert(std::round((specs[i].mode - g.q1) / g.q2 * 100.0) / 100.0);
    CHECK((specs[i].mode - g.q1) / g.q2 ==
          doctest::Approx(sites.sites[i].arm == 0 ? 0.25 : 0.66));
  }
  CHECK(r_used.size() == 2);
}

TEST_CASE("grid parsing") {
  const auto all = parse_grid("all");
  REQUIRE(all.size() == 9);
  CHECK(all[0].label == "Low/Low");
  CHECK(all[1].label == "Low/Medium");
  CHECK(all[2].label == "Low/High");
  CHECK(all[3].label == "Medium/Low");
  CHECK(all[8].label == "High/High");
  const auto one = parse_grid("low, High");
  REQUIRE(one.size() == 1);
  CHECK(one[0].label == "Low/High");
  CHECK(*one[0].r_ctrl == RLevel::low);
  CHECK(*one[0].r_trt == RLevel::high);
  const auto none = parse_grid("none");
  CHECK_FALSE(none[0].r_ctrl.has_value());
  CHECK_THROWS_AS(parse_grid("Low"), InputError);
  CHECK_THROWS_AS(parse_grid("Low,Extreme"), InputError);
}

TEST_CASE("imputed and missing groups") {
  const RegistryTable registry = read_registry_file(kData + "/registry.csv");
  double q1 = 0.0, q2 = 0.0;
  for (const auto& row : kTable)
    if (row.system <= 9) {
      q1 += row.q1;
      q2 += row.q2;
    }
  const GroupRegistry g = resolve_group(registry, "sys10");
  CHECK(g.q1 == doctest::Approx(q1 / 9.0));
  CHECK(g.q2 == doctest::Approx(q2 / 9.0));
  CHECK(resolve_group(registry, "sys3").q2 == 0.307);
  CHECK_THROWS_AS(resolve_group(registry, "sys11"), InputError);

  const SiteRecord stray{"x", {"sys11"}, 0, 100, 30, {}};
  const std::vector<SiteRecord> sites = {stray};
  CHECK_THROWS_AS(build_grid_priors(registry, sites, RLevel::low, RLevel::low), InputError);
}

TEST_CASE("site and registry file parsing") {
  const SiteTable t = parse_site_table(
      "site_id,group_id,arm,n_obs,y_obs,cov_x,rho2\n"
      "# comment\n"
      "a,north/east,1,120,40,0.5,0.04\n"
      "b,north/west,0,80,20,-1.0,0\n");
  REQUIRE(t.sites.size() == 2);
  CHECK(t.sites[0].group_path == std::vector<std::string>{"north", "east"});
  CHECK(t.covariate_names == std::vector<std::string>{"cov_x"});
  CHECK(t.rho2 == std::vector<double>{0.04, 0.0});
  CHECK(t.rho3 == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(parse_site_table("site,group_id,arm,n_obs,y_obs\n"), InputError);
  CHECK_THROWS_AS(parse_site_table("site_id,group_id,arm,n_obs,y_obs\na,g,0,10\n"), InputError);
  CHECK_THROWS_AS(parse_site_table("site_id,group_id,arm,n_obs,y_obs\na,g,0,ten,3\n"), InputError);
  CHECK_THROWS_AS(parse_site_table("site_id,group_id,arm,n_obs,y_obs,extra\na,g,0,10,3,1\n"), InputError);
  CHECK_THROWS_AS(parse_site_table("site_id,group_id,arm,n_obs,y_obs\n"), InputError);

  CHECK_THROWS_AS(parse_registry_table("group_id,q1\n"), InputError);
  CHECK_THROWS_AS(parse_registry_table("group_id,q1,q2\ng,,\n"), InputError);
  CHECK_THROWS_AS(parse_registry_table("group_id,q1,q2\ng,0.8,0.4\n"), InputError);
  CHECK_THROWS_AS(parse_registry_table("group_id,q1,q2\ng,0.1,0.1\ng,0.1,0.1\n"), InputError);
  CHECK_THROWS_AS(read_site_file(kData + "/missing.csv"), InputError);
}

TEST_CASE("config round trip, validation and hash") {
  const RunConfig c = parse_run_config(
      "site_file = s.csv\niterations = 400\nburn_in = 100\nseed = 9\nchains = 3\n"
      "grid = Medium,High\nrate_sharing = arm\nreference_or = 1.082\n"
      "prior.a = 0.05,0.05,0.03,0.95,0.15,0.02,0.2,5653\n");
  CHECK(c.chains == 3);
  CHECK(c.rate_sharing == RateSharing::arm);
  CHECK(*c.reference_or == 1.082);
  REQUIRE(c.priors.count("a") == 1);
  CHECK(c.priors.at("a").count == 5653);
  CHECK(parse_run_config(serialize_run_config(c)) == c);
  CHECK(parse_run_config(serialize_run_config(RunConfig{})) == RunConfig{});

  CHECK(config_hash(c).size() == 16);
  RunConfig moved = c;
  moved.output_dir = "/elsewhere";
  moved.threads = 8;
  CHECK(config_hash(moved) == config_hash(c));
  RunConfig reseeded = c;
  reseeded.seed = 10;
  CHECK(config_hash(reseeded) != config_hash(c));

  CHECK_THROWS_AS(parse_run_config("iterations = 100\nburn_in = 100\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("chains = 0\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("seed = 1\nseed = 2\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("colour = blue\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("iterations\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("grid = Low\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("prior.a = 0.05,0.05\n"), InputError);
  CHECK_THROWS_AS(parse_run_config("scenarios = I,IV\n"), InputError);
  CHECK_THROWS_AS(load_run_config(kData + "/bad.cfg"), InputError);
}

TEST_CASE("relative input paths resolve against the config file") {
  const RunConfig c = load_run_config(kData + "/analyze.cfg");
  CHECK(fs::path(c.site_file).is_absolute());
  CHECK(fs::exists(c.site_file));
  CHECK(fs::exists(c.registry_file));
}

TEST_CASE("analyze writes the full grid in order") {
  const fs::path out = scratch_dir("analyze");
  const RunConfig c = small_analyze_config(out);
  const RunReport report = run(c, RunMode::analyze);
  REQUIRE(report.files.size() == 2);
  const auto rows = read_tsv(out / "summary.tsv");
  REQUIRE(rows.size() == 10);
  const std::vector<std::string> header = {
      "cell", "r_ctrl", "r_trt", "or", "cri_lower", "cri_upper", "or_mean", "prob_gt_null",
      "prob_gt_reference", "reference_or", "draws", "ess", "psrf", "jitter_events", "seed",
      "config_hash"};
  CHECK(rows[0] == header);
  const auto cells = parse_grid("all");
  for (std::size_t i = 0; i < 9; ++i) {
    CAPTURE(i);
    REQUIRE(rows[i + 1].size() == header.size());
    CHECK(rows[i + 1][0] == cells[i].label);
    const double lo = std::stod(rows[i + 1][4]);
    const double mid = std::stod(rows[i + 1][3]);
    const double hi = std::stod(rows[i + 1][5]);
    CHECK(lo < mid);
    CHECK(mid < hi);
    CHECK(rows[i + 1][9] == "1.082000");
    CHECK(rows[i + 1][10] == "300");
    CHECK(rows[i + 1][14] == "20240611");
    CHECK(rows[i + 1][15] == config_hash(c));
  }
  // Assuming more misclassification in the treated arm raises its corrected
  // rate, so the odds ratio moves up.
  CHECK(std::stod(rows[3][3]) > std::stod(rows[7][3]));

  std::istringstream diag(read_text_file((out / "diagnostics.jsonl").string()));
  std::string line;
  std::size_t records = 0;
  while (std::getline(diag, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.at("draws") == 150);
    CHECK(rec.at("config_hash") == config_hash(c));
    ++records;
  }
  CHECK(records == 18);
}

TEST_CASE("analyze output does not depend on the thread count") {
  const fs::path a = scratch_dir("threads_a");
  const fs::path b = scratch_dir("threads_b");
  RunConfig c = small_analyze_config(a);
  c.grid = "Low,High";
  c.dump_draws = true;
  run(c, RunMode::analyze);
  c.output_dir = b.string();
  c.threads = 3;
  run(c, RunMode::analyze);
  for (const char* f : {"summary.tsv", "diagnostics.jsonl", "draws_Low_High.tsv"})
    CHECK(read_text_file((a / f).string()) == read_text_file((b / f).string()));
  const auto draws = read_tsv(a / "draws_Low_High.tsv");
  CHECK(draws.size() == 1 + 2 * 150);
  CHECK(draws[0][2] == "intercept");
}

TEST_CASE("the uncorrected cell and its error paths") {
  const fs::path out = scratch_dir("none");
  RunConfig c = small_analyze_config(out);
  c.grid = "none";
  c.registry_file.clear();
  run(c, RunMode::analyze);
  const auto rows = read_tsv(out / "summary.tsv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "none");
  CHECK(rows[1][1] == "NA");

  c.grid = "all";
  CHECK_THROWS_AS(run(c, RunMode::analyze), InputError);
  c.site_file = kData + "/missing.csv";
  CHECK_THROWS_AS(run(c, RunMode::analyze), InputError);
}

TEST_CASE("elicit-only writes fitted priors and delta summaries") {
  const fs::path out = scratch_dir("elicit");
  RunConfig c = small_analyze_config(out);
  c.grid = "Low,Low";
  set_run_config_value(c, "prior.specA", "0.05,0.05,0.03,0.95,0.15,0.02,0.20,5653");
  run(c, RunMode::elicit_only);
  const auto priors = read_tsv(out / "priors.tsv");
  // Ten systems plus the custom prior.
  REQUIRE(priors.size() == 12);
  CHECK(priors[0][0] == "source");
  CHECK(priors[1][2] == "sys1");
  CHECK(std::stod(priors[1][4]) == doctest::Approx(0.091));
  CHECK(priors[11][2] == "specA");

  const auto delta = read_tsv(out / "delta.tsv");
  REQUIRE(delta.size() == 1 + 30 + 1);
  CHECK(delta[31][2] == "specA");
  CHECK(delta[31][3] == "5653");
  CHECK(delta[31][6] == "283");

  const auto pmf = read_tsv(out / "delta_pmf.tsv");
  double total = 0.0;
  for (std::size_t i = 1; i < pmf.size(); ++i) total += std::stod(pmf[i][2]);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("validate parses and checks without writing") {
  const fs::path out = scratch_dir("validate");
  RunConfig c = small_analyze_config(out);
  CHECK(run(c, RunMode::validate).files.empty());
  CHECK_FALSE(fs::exists(out));
  set_run_config_value(c, "prior.bad", "0.5,0.05,0.02,0.95,0.98,0.0,1.0");
  CHECK_THROWS_AS(run(c, RunMode::validate), ElicitationInfeasibleError);
  CHECK_THROWS_AS(parse_run_mode("plot"), InputError);
}

TEST_CASE("simulate writes metrics for each scenario and spec") {
  const fs::path out = scratch_dir("simulate");
  RunConfig c;
  c.output_dir = out.string();
  c.iterations = 60;
  c.burn_in = 20;
  c.replications = 2;
  c.scenarios = {"I", "II"};
  c.model_specs = "S1:A1,NM:observed";
  run(c, RunMode::simulate);
  const auto metrics = read_tsv(out / "metrics.tsv");
  REQUIRE(metrics.size() == 5);
  CHECK(metrics[1][0] == "I");
  CHECK(metrics[1][1] == "S1:A1");
  CHECK(metrics[1][2] == "1.128298");
  CHECK(metrics[3][2] == "1.334755");
  const auto reps = read_tsv(out / "replications.tsv");
  CHECK(reps.size() == 1 + 2 * 2 * 2);
}

}  // TEST_SUITE
